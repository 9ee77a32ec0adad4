#include "curvemps/lattice.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace curvemps {

void LatticeSpec::validate() const {
  if (n_rows < 2 || n_cols < 2) {
    throw ConfigError("lattice extents must be at least 2, got " + std::to_string(n_rows) + "x" +
                      std::to_string(n_cols));
  }
}

std::string to_string(Boundary b) { return b == Boundary::Open ? "obc" : "pbc"; }

std::string to_string(const LatticeSpec& spec) {
  return std::to_string(spec.n_rows) + "x" + std::to_string(spec.n_cols) + " " +
         to_string(spec.boundary);
}

std::string to_string(MappingKind kind) {
  switch (kind) {
    case MappingKind::Snake:
      return "snake";
    case MappingKind::Hilbert:
      return "hilbert";
    case MappingKind::Custom:
      return "custom";
  }
  return "unknown";
}

PathMapping::PathMapping(const LatticeSpec& lattice, MappingKind kind, std::vector<SiteCoord> order)
    : lattice_(lattice), kind_(kind), order_(std::move(order)) {
  const int n = lattice_.n_sites();
  if (static_cast<int>(order_.size()) != n) {
    throw MappingError(MappingErrc::WrongLineCount,
                       "mapping has " + std::to_string(order_.size()) + " sites, lattice has " +
                           std::to_string(n));
  }
  inverse_.assign(n, -1);
  for (int p = 0; p < n; ++p) {
    const SiteCoord s = order_[p];
    if (s.row < 0 || s.row >= lattice_.n_rows || s.col < 0 || s.col >= lattice_.n_cols) {
      throw MappingError(MappingErrc::OutOfRange, "site (" + std::to_string(s.row) + "," +
                                                      std::to_string(s.col) + ") outside lattice");
    }
    int& slot = inverse_[s.row * lattice_.n_cols + s.col];
    if (slot >= 0) {
      throw MappingError(MappingErrc::DuplicateSite, "site (" + std::to_string(s.row) + "," +
                                                         std::to_string(s.col) +
                                                         ") mapped twice");
    }
    slot = p;
  }
}

SiteCoord PathMapping::site(int chain_index) const {
  if (chain_index < 1 || chain_index > size()) {
    throw MappingError(MappingErrc::OutOfRange,
                       "chain index " + std::to_string(chain_index) + " out of range");
  }
  return order_[chain_index - 1];
}

int PathMapping::chain_index(SiteCoord s) const {
  if (s.row < 0 || s.row >= lattice_.n_rows || s.col < 0 || s.col >= lattice_.n_cols) {
    throw MappingError(MappingErrc::OutOfRange, "site outside lattice");
  }
  return inverse_[s.row * lattice_.n_cols + s.col] + 1;
}

EdgeList build_edges(const LatticeSpec& spec) {
  spec.validate();
  EdgeList list{spec, {}};
  const bool periodic = spec.boundary == Boundary::Periodic;
  for (int r = 0; r < spec.n_rows; ++r) {
    for (int c = 0; c < spec.n_cols; ++c) {
      if (c + 1 < spec.n_cols) {
        list.edges.push_back({{r, c}, {r, c + 1}, false});
      } else if (periodic) {
        list.edges.push_back({{r, 0}, {r, c}, true});
      }
      if (r + 1 < spec.n_rows) {
        list.edges.push_back({{r, c}, {r + 1, c}, false});
      } else if (periodic) {
        list.edges.push_back({{0, c}, {r, c}, true});
      }
    }
  }
  return list;
}

PathMapping snake_map(const LatticeSpec& spec) {
  spec.validate();
  std::vector<SiteCoord> order(spec.n_sites());
  const int n = spec.n_cols;
  for (int i = 0; i < spec.n_rows; ++i) {
    for (int j = 0; j < n; ++j) {
      const int index = (i % 2 == 0) ? i * n + j + 1 : i * n + (n - j);
      order[index - 1] = {i, j};
    }
  }
  return PathMapping(spec, MappingKind::Snake, std::move(order));
}

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Order-k curve on a 2^k x 2^k block, entering at (0,0) and leaving at (0, 2^k - 1).
std::vector<SiteCoord> hilbert_order(int k) {
  std::vector<SiteCoord> curve{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int level = 2; level <= k; ++level) {
    const int h = 1 << (level - 1);
    std::vector<SiteCoord> next;
    next.reserve(curve.size() * 4);
    for (const auto& s : curve) next.push_back({s.col, s.row});
    for (const auto& s : curve) next.push_back({s.row + h, s.col});
    for (const auto& s : curve) next.push_back({s.row + h, s.col + h});
    for (const auto& s : curve) next.push_back({h - 1 - s.col, h - 1 - s.row + h});
    curve = std::move(next);
  }
  return curve;
}

}  // namespace

PathMapping hilbert_map(const LatticeSpec& spec) {
  spec.validate();
  if (spec.n_rows != spec.n_cols) {
    throw MappingError(MappingErrc::NotSquare, "hilbert mapping needs a square lattice, got " +
                                                   std::to_string(spec.n_rows) + "x" +
                                                   std::to_string(spec.n_cols));
  }
  if (!is_power_of_two(spec.n_rows)) {
    throw MappingError(MappingErrc::NotPowerOfTwo,
                       "hilbert mapping needs a power-of-two side, got " +
                           std::to_string(spec.n_rows));
  }
  int k = 0;
  while ((1 << k) < spec.n_rows) ++k;
  return PathMapping(spec, MappingKind::Hilbert, hilbert_order(k));
}

PathMapping load_custom_mapping(std::istream& in, const LatticeSpec& spec) {
  spec.validate();
  const int n = spec.n_sites();
  std::vector<SiteCoord> order(n, SiteCoord{-1, -1});
  std::vector<bool> used_index(n, false);
  std::vector<bool> used_site(n, false);
  std::string line;
  int count = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    long row = 0, col = 0, index = 0;
    std::string extra;
    if (!(fields >> row >> col >> index) || (fields >> extra)) {
      throw MappingError(MappingErrc::Malformed,
                         "line " + std::to_string(line_no) + ": expected 'row col chain_index'");
    }
    ++count;
    if (count > n) continue;  // reported as a count error below
    if (row < 0 || row >= spec.n_rows || col < 0 || col >= spec.n_cols || index < 1 || index > n) {
      throw MappingError(MappingErrc::OutOfRange,
                         "line " + std::to_string(line_no) + ": value out of range");
    }
    const auto site_slot = static_cast<std::size_t>(row * spec.n_cols + col);
    if (used_site[site_slot]) {
      throw MappingError(MappingErrc::DuplicateSite,
                         "line " + std::to_string(line_no) + ": site listed twice");
    }
    if (used_index[index - 1]) {
      throw MappingError(MappingErrc::DuplicateIndex, "line " + std::to_string(line_no) +
                                                          ": chain index " +
                                                          std::to_string(index) + " reused");
    }
    used_site[site_slot] = true;
    used_index[index - 1] = true;
    order[index - 1] = {static_cast<int>(row), static_cast<int>(col)};
  }
  if (count != n) {
    throw MappingError(MappingErrc::WrongLineCount, "mapping file has " + std::to_string(count) +
                                                        " entries, lattice needs " +
                                                        std::to_string(n));
  }
  return PathMapping(spec, MappingKind::Custom, std::move(order));
}

PathMapping load_custom_mapping_file(const std::string& path, const LatticeSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mapping file '" + path + "'");
  return load_custom_mapping(in, spec);
}

void write_mapping(std::ostream& out, const PathMapping& mapping) {
  out << "# " << to_string(mapping.kind()) << " mapping, lattice "
      << mapping.lattice().n_rows << "x" << mapping.lattice().n_cols << "\n";
  out << "# row col chain_index\n";
  for (int p = 0; p < mapping.size(); ++p) {
    const SiteCoord s = mapping.order()[p];
    out << s.row << ' ' << s.col << ' ' << p + 1 << '\n';
  }
}

LocalityReport locality_report(const PathMapping& mapping, const EdgeList& edges) {
  if (!(mapping.lattice().n_rows == edges.lattice.n_rows &&
        mapping.lattice().n_cols == edges.lattice.n_cols)) {
    throw MappingError(MappingErrc::SizeMismatch, "mapping and edge list use different lattices");
  }
  const int n = mapping.size();
  LocalityReport report;
  report.n_edges = static_cast<int>(edges.size());
  std::vector<int> cut_delta(n + 1, 0);
  for (const Edge& e : edges.edges) {
    int a = mapping.chain_index(e.a);
    int b = mapping.chain_index(e.b);
    if (a > b) std::swap(a, b);
    const int d = b - a;
    report.distance_histogram[d] += 1;
    report.total_distance += d;
    report.max_distance = std::max(report.max_distance, d);
    // the edge straddles cuts a, a+1, ..., b-1 (cut p sits between p and p+1)
    cut_delta[a] += 1;
    cut_delta[b] -= 1;
  }
  report.cut_profile.assign(std::max(n - 1, 0), 0);
  int running = 0;
  for (int p = 1; p < n; ++p) {
    running += cut_delta[p];
    report.cut_profile[p - 1] = running;
    report.total_cut += running;
    report.max_cut = std::max(report.max_cut, running);
  }
  if (report.n_edges > 0) {
    report.mean_distance = static_cast<double>(report.total_distance) / report.n_edges;
  }
  if (n > 1) report.mean_cut = static_cast<double>(report.total_cut) / (n - 1);
  return report;
}

void write_locality_metrics_csv(std::ostream& out, const LocalityReport& report) {
  out << "metric,value\n";
  out << std::setprecision(12);
  out << "n_edges," << report.n_edges << "\n";
  out << "max_distance," << report.max_distance << "\n";
  out << "total_distance," << report.total_distance << "\n";
  out << "mean_distance," << report.mean_distance << "\n";
  out << "max_cut," << report.max_cut << "\n";
  out << "total_cut," << report.total_cut << "\n";
  out << "mean_cut," << report.mean_cut << "\n";
  for (const auto& [d, count] : report.distance_histogram) {
    out << "distance_" << d << "," << count << "\n";
  }
}

void write_cut_profile_csv(std::ostream& out, const LocalityReport& report) {
  out << "cut_position,strand_count\n";
  for (std::size_t p = 0; p < report.cut_profile.size(); ++p) {
    out << p + 1 << "," << report.cut_profile[p] << "\n";
  }
}

}  // namespace curvemps
