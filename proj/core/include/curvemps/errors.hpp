#pragma once

#include <stdexcept>
#include <string>

namespace curvemps {

// Invalid user input: lattice shapes, mapping files, fillings, CLI values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor legs, charges or shapes do not fit together.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace curvemps
