#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "curvemps/errors.hpp"

namespace curvemps {

enum class Boundary { Open, Periodic };

struct LatticeSpec {
  int n_rows = 0;
  int n_cols = 0;
  Boundary boundary = Boundary::Open;

  int n_sites() const { return n_rows * n_cols; }
  // Throws ConfigError unless both extents are >= 2.
  void validate() const;

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

std::string to_string(Boundary b);
std::string to_string(const LatticeSpec& spec);  // "4x4 obc"

struct SiteCoord {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const SiteCoord&, const SiteCoord&) = default;
};

enum class MappingKind { Snake, Hilbert, Custom };
std::string to_string(MappingKind kind);

enum class MappingErrc {
  NotSquare,
  NotPowerOfTwo,
  DuplicateSite,
  DuplicateIndex,
  OutOfRange,
  WrongLineCount,
  Malformed,
  SizeMismatch,
};

class MappingError : public ConfigError {
 public:
  MappingError(MappingErrc code, const std::string& what) : ConfigError(what), code_(code) {}
  MappingErrc code() const { return code_; }

 private:
  MappingErrc code_;
};

// Bijection between lattice sites and chain positions. Chain indices are
// 1-based at this interface; position p of order() holds chain index p + 1.
class PathMapping {
 public:
  PathMapping(const LatticeSpec& lattice, MappingKind kind, std::vector<SiteCoord> order);

  const LatticeSpec& lattice() const { return lattice_; }
  MappingKind kind() const { return kind_; }
  int size() const { return static_cast<int>(order_.size()); }
  std::span<const SiteCoord> order() const { return order_; }

  SiteCoord site(int chain_index) const;
  int chain_index(SiteCoord s) const;

  friend bool operator==(const PathMapping& a, const PathMapping& b) {
    return a.lattice_ == b.lattice_ && a.order_ == b.order_;
  }

 private:
  LatticeSpec lattice_;
  MappingKind kind_;
  std::vector<SiteCoord> order_;
  std::vector<int> inverse_;  // row * n_cols + col -> 0-based position
};

struct Edge {
  SiteCoord a;
  SiteCoord b;
  bool wrap = false;  // crosses a periodic boundary
};

// Nearest-neighbour bonds. On a periodic extent of length 2 the wrap bond
// coincides with the bulk bond as a site pair; both entries are kept, so a
// periodic R x C lattice always has 2RC entries.
struct EdgeList {
  LatticeSpec lattice;
  std::vector<Edge> edges;

  std::size_t size() const { return edges.size(); }
};

EdgeList build_edges(const LatticeSpec& spec);

PathMapping snake_map(const LatticeSpec& spec);
PathMapping hilbert_map(const LatticeSpec& spec);

PathMapping load_custom_mapping(std::istream& in, const LatticeSpec& spec);
PathMapping load_custom_mapping_file(const std::string& path, const LatticeSpec& spec);
void write_mapping(std::ostream& out, const PathMapping& mapping);

struct LocalityReport {
  std::map<int, int> distance_histogram;
  int n_edges = 0;
  int max_distance = 0;
  std::int64_t total_distance = 0;
  double mean_distance = 0.0;  // total_distance / n_edges
  std::vector<int> cut_profile;  // entry p: edges straddling the cut after position p + 1
  int max_cut = 0;
  std::int64_t total_cut = 0;
  double mean_cut = 0.0;
};

LocalityReport locality_report(const PathMapping& mapping, const EdgeList& edges);

void write_locality_metrics_csv(std::ostream& out, const LocalityReport& report);
void write_cut_profile_csv(std::ostream& out, const LocalityReport& report);

}  // namespace curvemps
