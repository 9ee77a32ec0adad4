#include "curvemps/mps.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace curvemps {

namespace {

Leg single_sector(Direction dir, Charge q) { return Leg(dir, {{q, 1}}); }

// Same tensor with leg k re-expressed in the opposite direction; sector
// charges are negated so the stored blocks keep satisfying the charge rule.
BlockTensor reverse_leg(const BlockTensor& t, int k) {
  std::vector<Sector> sectors = t.leg(k).sectors();
  for (auto& s : sectors) s.charge = -s.charge;
  std::vector<Leg> legs = t.legs();
  legs[k] = Leg(flip(t.leg(k).direction()), std::move(sectors));
  BlockTensor out(std::move(legs), t.flux());
  for (const auto& [key, data] : t.blocks()) out.set_block(key, data);
  return out;
}

// <a| diag-weighted |b> transfer from the left; weights[p] may be empty.
double transfer(const MPSState& a, const MPSState& b,
                const std::vector<std::array<double, local::kDim>>* weights) {
  if (a.size() != b.size() || a.size() == 0) throw ShapeError("overlap: chain lengths differ");
  if (!(a.total_charge == b.total_charge)) return 0.0;
  BlockTensor t({a.sites[0].leg(0), b.sites[0].leg(0).dual()});
  t.set_block(BlockKey{0, 0}, {1.0});
  for (int p = 0; p < a.size(); ++p) {
    BlockTensor x = contract(t, b.sites[p], {{1, 0}});
    if (weights && p < static_cast<int>(weights->size())) {
      x = local::apply_site_op(local::diagonal((*weights)[p]), x, 1);
    }
    t = contract(x, a.sites[p].dual(), {{0, 0}, {1, 1}}).permute({1, 0});
  }
  double s = 0.0;
  for (const auto& [key, data] : t.blocks()) {
    for (double v : data) s += v;
  }
  return s;
}

Leg union_leg(const Leg& a, const Leg& b) {
  std::map<Charge, int> dims;
  for (const auto& s : a.sectors()) dims[s.charge] += s.dim;
  for (const auto& s : b.sectors()) dims[s.charge] += s.dim;
  std::vector<Sector> sectors;
  for (const auto& [q, d] : dims) sectors.push_back({q, d});
  return Leg(a.direction(), std::move(sectors));
}

// Copies a rank-3 block (dl, 1, dr) into a larger one at a row/column offset.
void place_block(const std::vector<double>& src, int dl, int dr, std::vector<double>& dst, int big_r,
                 int row0, int col0, double scale) {
  for (int i = 0; i < dl; ++i) {
    for (int j = 0; j < dr; ++j) {
      dst[static_cast<std::size_t>(row0 + i) * big_r + col0 + j] += scale * src[i * dr + j];
    }
  }
}

// a + coef * b as a direct sum over bond spaces.
MPSState direct_sum(const MPSState& a, const MPSState& b, double coef) {
  const int n = a.size();
  MPSState out;
  out.total_charge = a.total_charge;
  out.center = 1;
  if (n == 1) {
    out.sites = a.sites;
    out.sites[0].axpy(coef, b.sites[0]);
    return out;
  }
  for (int p = 0; p < n; ++p) {
    const BlockTensor& ta = a.sites[p];
    const BlockTensor& tb = b.sites[p];
    const Leg l = p == 0 ? ta.leg(0) : union_leg(ta.leg(0), tb.leg(0));
    const Leg r = p == n - 1 ? ta.leg(2) : union_leg(ta.leg(2), tb.leg(2));
    BlockTensor t({l, local::physical_leg(), r});
    const auto add = [&](const BlockTensor& src, bool second, double scale) {
      for (const auto& [key, data] : src.blocks()) {
        const Charge ql = src.leg(0).charge(key[0]);
        const Charge qr = src.leg(2).charge(key[2]);
        const int li = l.find(ql);
        const int ri = r.find(qr);
        int row0 = 0, col0 = 0;
        if (second && p > 0) {
          const int ai = ta.leg(0).find(ql);
          row0 = ai < 0 ? 0 : ta.leg(0).dim(ai);
        }
        if (second && p < n - 1) {
          const int ai = ta.leg(2).find(qr);
          col0 = ai < 0 ? 0 : ta.leg(2).dim(ai);
        }
        auto& dst = t.block(BlockKey{li, key[1], ri});
        place_block(data, src.leg(0).dim(key[0]), src.leg(2).dim(key[2]), dst, r.dim(ri), row0, col0,
                    scale);
      }
    };
    add(ta, false, 1.0);
    add(tb, true, p == 0 ? coef : 1.0);
    out.sites.push_back(std::move(t));
  }
  return out;
}

}  // namespace

int MPSState::max_bond() const {
  int m = 1;
  for (int d : bond_dims()) m = std::max(m, d);
  return m;
}

std::vector<int> MPSState::bond_dims() const {
  std::vector<int> dims;
  for (int p = 0; p + 1 < size(); ++p) dims.push_back(sites[p].leg(2).total_dim());
  return dims;
}

void MPSState::check() const {
  if (sites.empty()) throw ShapeError("MPS has no sites");
  const Leg phys = local::physical_leg();
  for (int p = 0; p < size(); ++p) {
    const BlockTensor& t = sites[p];
    if (t.rank() != 3 || !(t.leg(1) == phys) || t.leg(0).direction() != Direction::In ||
        t.leg(2).direction() != Direction::Out || !(t.flux() == Charge{})) {
      throw ShapeError("MPS site " + std::to_string(p + 1) + " has the wrong leg structure");
    }
    if (p > 0 && !sites[p - 1].leg(2).same_space(t.leg(0))) {
      throw ShapeError("MPS bond " + std::to_string(p) + " does not match between sites");
    }
    t.check();
  }
  const Leg& left = sites.front().leg(0);
  const Leg& right = sites.back().leg(2);
  if (left.n_sectors() != 1 || left.total_dim() != 1 || !(left.charge(0) == Charge{})) {
    throw ShapeError("MPS left boundary must be the single sector (0,0)");
  }
  if (right.n_sectors() != 1 || right.total_dim() != 1 || !(right.charge(0) == total_charge)) {
    throw ShapeError("MPS right boundary must carry the total charge");
  }
}

MPSState product_state(const std::vector<int>& states) {
  if (states.empty()) throw ConfigError("product state needs at least one site");
  MPSState st;
  Charge q;
  for (int s : states) {
    if (s < 0 || s >= local::kDim) throw ConfigError("local state index out of range");
    const Charge next = q + local::state_charge(s);
    BlockTensor t({single_sector(Direction::In, q), local::physical_leg(), single_sector(Direction::Out, next)});
    t.set_block(BlockKey{0, s, 0}, {1.0});
    st.sites.push_back(std::move(t));
    q = next;
  }
  st.total_charge = q;
  st.center = 1;
  return st;
}

std::vector<int> default_occupations(const PathMapping& mapping, const FillingSpec& filling) {
  const int n = mapping.size();
  if (filling.n_up < 0 || filling.n_down < 0 || filling.n_up > n || filling.n_down > n) {
    throw ConfigError("filling (" + std::to_string(filling.n_up) + "," +
                      std::to_string(filling.n_down) + ") is infeasible on " + std::to_string(n) +
                      " sites");
  }
  std::vector<int> occ(n);
  int up = 0, down = 0;
  for (int mu = 1; mu <= n; ++mu) {
    const SiteCoord c = mapping.site(mu);
    occ[mu - 1] = (c.row + c.col) % 2 == 0 ? 1 : 2;
    (occ[mu - 1] == 1 ? up : down) += 1;
  }
  const auto adjust = [&](int bit, int have, int want) {
    for (int mu = n; mu >= 1 && have > want; --mu) {
      if (occ[mu - 1] & bit) {
        occ[mu - 1] &= ~bit;
        --have;
      }
    }
    // empty sites first, then sites holding the other spin
    for (int pass = 0; pass < 2 && have < want; ++pass) {
      for (int mu = 1; mu <= n && have < want; ++mu) {
        const int s = occ[mu - 1];
        if (s & bit) continue;
        if (pass == 0 && s != 0) continue;
        occ[mu - 1] |= bit;
        ++have;
      }
    }
  };
  adjust(1, up, filling.n_up);
  adjust(2, down, filling.n_down);
  return occ;
}

std::vector<int> load_occupation_pattern(std::istream& in, int n_sites) {
  std::vector<int> occ;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      if (tok == "0" || tok == "empty") {
        occ.push_back(0);
      } else if (tok == "1" || tok == "up" || tok == "u") {
        occ.push_back(1);
      } else if (tok == "2" || tok == "dn" || tok == "down" || tok == "d") {
        occ.push_back(2);
      } else if (tok == "3" || tok == "ud" || tok == "updn") {
        occ.push_back(3);
      } else {
        throw ConfigError("unknown occupation token '" + tok + "'");
      }
    }
  }
  if (static_cast<int>(occ.size()) != n_sites) {
    throw ConfigError("occupation pattern has " + std::to_string(occ.size()) + " entries, expected " +
                      std::to_string(n_sites));
  }
  return occ;
}

MPSState product_init(const PathMapping& mapping, const FillingSpec& filling, const InitOptions& options) {
  std::vector<int> occ = options.pattern ? *options.pattern : default_occupations(mapping, filling);
  if (static_cast<int>(occ.size()) != mapping.size()) {
    throw ConfigError("occupation pattern length does not match the lattice");
  }
  MPSState st = product_state(occ);
  if (!(st.total_charge == Charge{filling.n_up, filling.n_down})) {
    throw ConfigError("occupation pattern carries charge " + to_string(st.total_charge) +
                      ", requested " + to_string(Charge{filling.n_up, filling.n_down}));
  }
  if (options.noise > 0.0) {
    const MPSState r = random_state(mapping.size(), st.total_charge, options.noise_bond, options.seed);
    st = direct_sum(st, r, options.noise / norm(r));
    st = canonicalize(st, 1);
    const double nn = norm(st);
    st.sites[0].scale(1.0 / nn);
  }
  return st;
}

MPSState canonicalize(const MPSState& state, int new_center) {
  const int n = state.size();
  if (new_center < 1 || new_center > n) throw ShapeError("canonicalize: centre out of range");
  MPSState st = state;
  for (int p = 0; p + 1 < new_center; ++p) {
    QRResult qr = qr_orthogonalize(st.sites[p], {0, 1});
    st.sites[p] = std::move(qr.isometry);
    st.sites[p + 1] = contract(qr.remainder, st.sites[p + 1], {{1, 0}});
  }
  for (int p = n - 1; p + 1 > new_center; --p) {
    QRResult qr = qr_orthogonalize(st.sites[p], {1, 2});
    st.sites[p] = reverse_leg(qr.isometry, 2).permute({2, 0, 1});
    st.sites[p - 1] = contract(st.sites[p - 1], reverse_leg(qr.remainder, 0), {{2, 1}});
  }
  st.center = new_center;
  return st;
}

double overlap(const MPSState& a, const MPSState& b) { return transfer(a, b, nullptr); }

double norm(const MPSState& state) { return std::sqrt(std::max(0.0, overlap(state, state))); }

double expect_diagonal(const MPSState& state,
                       const std::vector<std::pair<int, std::array<double, local::kDim>>>& ops) {
  std::vector<std::array<double, local::kDim>> weights(state.size(), {1, 1, 1, 1});
  for (const auto& [site, d] : ops) {
    if (site < 1 || site > state.size()) throw ShapeError("observable site out of range");
    for (int s = 0; s < local::kDim; ++s) weights[site - 1][s] *= d[s];
  }
  const double nn = overlap(state, state);
  if (!(nn > 0.0)) throw NumericalError("state has zero norm");
  return transfer(state, state, &weights) / nn;
}

double measure_local(const MPSState& state, int site, local::Observable observable) {
  return expect_diagonal(state, {{site, local::observable_diagonal(observable)}});
}

double measure_szsz(const MPSState& state, int site_a, int site_b) {
  if (site_a == site_b) throw ShapeError("measure_szsz needs two distinct sites");
  const auto sz = local::observable_diagonal(local::Observable::Sz);
  return expect_diagonal(state, {{site_a, sz}, {site_b, sz}});
}

std::vector<double> schmidt_values(const MPSState& state, int cut) {
  if (cut < 1 || cut >= state.size()) throw ShapeError("bond cut out of range");
  const MPSState st = canonicalize(state, cut);
  const SVDResult svd = svd_truncate(st.sites[cut - 1], {0, 1}, {1 << 30, 0.0});
  std::vector<double> s = svd.singular_values;
  double total = 0.0;
  for (double x : s) total += x * x;
  for (double& x : s) x /= std::sqrt(total);
  return s;
}

double bond_entropy(const MPSState& state, int cut) {
  double e = 0.0;
  for (double x : schmidt_values(state, cut)) {
    const double p = x * x;
    if (p > 0.0) e -= p * std::log(p);
  }
  return e;
}

std::vector<double> to_dense(const MPSState& state) {
  const int n = state.size();
  if (n > 10) throw ShapeError("to_dense: chain too long");
  std::size_t dim = 1;
  for (int i = 0; i < n; ++i) dim *= local::kDim;
  std::vector<double> psi(dim, 0.0);
  // depth-first over configurations, carrying the row vector of the left block
  const auto recurse = [&](auto&& self, int p, int sector, const std::vector<double>& row,
                           std::size_t index) -> void {
    if (p == n) {
      psi[index] = row[0];
      return;
    }
    const BlockTensor& t = state.sites[p];
    const Charge ql = t.leg(0).charge(sector);
    for (int s = 0; s < local::kDim; ++s) {
      const int r = t.leg(2).find(ql + local::state_charge(s));
      if (r < 0) continue;
      const auto* blk = t.find_block(BlockKey{sector, s, r});
      if (!blk) continue;
      const int dl = t.leg(0).dim(sector);
      const int dr = t.leg(2).dim(r);
      std::vector<double> next(dr, 0.0);
      for (int i = 0; i < dl; ++i) {
        if (row[i] == 0.0) continue;
        for (int j = 0; j < dr; ++j) next[j] += row[i] * (*blk)[i * dr + j];
      }
      self(self, p + 1, r, next, index * local::kDim + s);
    }
  };
  recurse(recurse, 0, 0, std::vector<double>{1.0}, 0);
  return psi;
}

MPSState random_state(int n_sites, Charge total, int max_bond, std::uint64_t seed) {
  if (n_sites < 1) throw ShapeError("random_state: no sites");
  std::mt19937_64 rng(seed);
  const auto feasible = [&](Charge q, int p) {
    const Charge rest = total - q;
    return q.up >= 0 && q.down >= 0 && q.up <= p && q.down <= p && rest.up >= 0 && rest.down >= 0 &&
           rest.up <= n_sites - p && rest.down <= n_sites - p;
  };
  std::vector<Leg> bonds;
  bonds.push_back(single_sector(Direction::Out, Charge{}));
  for (int p = 1; p < n_sites; ++p) {
    std::vector<Charge> charges;
    for (int u = 0; u <= p; ++u) {
      for (int d = 0; d <= p; ++d) {
        if (feasible({u, d}, p)) charges.push_back({u, d});
      }
    }
    const int per = std::max(1, max_bond / std::max<int>(1, static_cast<int>(charges.size())));
    std::vector<Sector> sectors;
    for (const Charge& q : charges) sectors.push_back({q, per});
    bonds.emplace_back(Direction::Out, std::move(sectors));
  }
  bonds.push_back(single_sector(Direction::Out, total));
  MPSState st;
  st.total_charge = total;
  for (int p = 0; p < n_sites; ++p) {
    st.sites.push_back(BlockTensor::random({bonds[p].dual(), local::physical_leg(), bonds[p + 1]}, {}, rng));
  }
  st = canonicalize(st, 1);
  const double nn = norm(st);
  if (!(nn > 0.0)) throw NumericalError("random_state: charge sector is empty");
  st.sites[0].scale(1.0 / nn);
  return st;
}

// ---------------------------------------------------------------- state files

namespace {

constexpr const char* kStateHeader = "CURVEMPS-STATE v1";

nlohmann::json leg_json(const Leg& leg) {
  nlohmann::json sectors = nlohmann::json::array();
  for (const auto& s : leg.sectors()) sectors.push_back({s.charge.up, s.charge.down, s.dim});
  return {{"dir", leg.direction() == Direction::In ? "in" : "out"}, {"sectors", sectors}};
}

Leg leg_from_json(const nlohmann::json& j) {
  std::vector<Sector> sectors;
  for (const auto& s : j.at("sectors")) sectors.push_back({{s.at(0), s.at(1)}, s.at(2)});
  return Leg(j.at("dir") == "in" ? Direction::In : Direction::Out, std::move(sectors));
}

}  // namespace

void save_state(const std::string& path, const MPSState& state, const std::string& extra) {
  nlohmann::json manifest;
  manifest["n_sites"] = state.size();
  manifest["center"] = state.center;
  manifest["total_charge"] = {state.total_charge.up, state.total_charge.down};
  manifest["extra"] = nlohmann::json::parse(extra);
  nlohmann::json sites = nlohmann::json::array();
  std::size_t offset = 0;
  for (const BlockTensor& t : state.sites) {
    nlohmann::json legs = nlohmann::json::array();
    for (const Leg& l : t.legs()) legs.push_back(leg_json(l));
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& [key, data] : t.blocks()) {
      blocks.push_back({{"key", {key[0], key[1], key[2]}}, {"offset", offset}, {"size", data.size()}});
      offset += data.size();
    }
    sites.push_back({{"legs", legs}, {"flux", {t.flux().up, t.flux().down}}, {"blocks", blocks}});
  }
  manifest["sites"] = sites;
  manifest["payload_doubles"] = offset;
  const std::string text = manifest.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write state file '" + path + "'");
    out << kStateHeader << "\n" << text.size() << "\n" << text;
    for (const BlockTensor& t : state.sites) {
      for (const auto& [key, data] : t.blocks()) {
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
      }
    }
    if (!out) throw ConfigError("failed writing state file '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw ConfigError("cannot move state file into place at '" + path + "'");
  }
}

MPSState load_state(const std::string& path, std::string* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open state file '" + path + "'");
  std::string header;
  std::getline(in, header);
  if (header != kStateHeader) throw ConfigError("'" + path + "' is not a curvemps state file");
  std::string length_line;
  std::getline(in, length_line);
  std::size_t length = 0;
  try {
    length = std::stoul(length_line);
  } catch (const std::exception&) {
    throw ConfigError("corrupt state file header in '" + path + "'");
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("corrupt state manifest in '" + path + "': " + e.what());
  }
  MPSState st;
  st.center = manifest.at("center");
  st.total_charge = {manifest.at("total_charge").at(0), manifest.at("total_charge").at(1)};
  if (extra) *extra = manifest.at("extra").dump();
  for (const auto& site : manifest.at("sites")) {
    std::vector<Leg> legs;
    for (const auto& l : site.at("legs")) legs.push_back(leg_from_json(l));
    BlockTensor t(std::move(legs), {site.at("flux").at(0), site.at("flux").at(1)});
    for (const auto& b : site.at("blocks")) {
      const auto& k = b.at("key");
      std::vector<double> data(b.at("size").get<std::size_t>());
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
      if (!in) throw ConfigError("truncated payload in state file '" + path + "'");
      t.set_block(BlockKey{k.at(0).get<int>(), k.at(1).get<int>(), k.at(2).get<int>()}, std::move(data));
    }
    st.sites.push_back(std::move(t));
  }
  st.check();
  return st;
}

}  // namespace curvemps
