#pragma once

#include <functional>
#include <vector>

#include "curvemps/linalg.hpp"

namespace curvemps {

// y = A x for a symmetric operator on flat vectors.
using MatVec = std::function<void(const linalg::Vector& x, linalg::Vector& y)>;

struct LanczosOptions {
  int max_iter = 40;
  double tol = 1e-9;  // residual ||A v - theta v|| with ||v|| = 1
  int max_basis = 0;  // restart from the Ritz vector once the basis holds this many vectors; 0: never
};

struct LanczosResult {
  double value = 0.0;
  linalg::Vector vector;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Lowest eigenpair by Lanczos with full reorthogonalisation, started from
// `start`. Vectors in `deflate` (orthonormal) are projected out at every step.
LanczosResult lanczos_lowest(const MatVec& op, const linalg::Vector& start, const LanczosOptions& options,
                             const std::vector<linalg::Vector>* deflate = nullptr);

}  // namespace curvemps
