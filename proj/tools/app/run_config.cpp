#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "curvemps/errors.hpp"

namespace curvemps::app {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used == value.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": not a number: '" + value + "'");
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(value, &used);
    if (used == value.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": not an integer: '" + value + "'");
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

template <class T, class F>
std::string join(const std::vector<T>& items, F f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + f(items[i]);
  return out;
}

std::string lattice_text(const LatticeSpec& l) { return std::to_string(l.n_rows) + "x" + std::to_string(l.n_cols); }

int tree_level(const LatticeSpec& l) {
  int k = 0;
  while ((1 << k) < l.n_rows) ++k;
  if (l.n_rows != l.n_cols || (1 << k) != l.n_rows || k < 2 || k > 6) {
    throw ConfigError("built-in trees need a square 2^k x 2^k lattice with 2 <= k <= 6");
  }
  return k;
}

}  // namespace

std::string to_string(Engine e) {
  switch (e) {
    case Engine::MpsDmrg: return "mps_dmrg";
    case Engine::TtnA: return "ttn_a";
    case Engine::TtnB: return "ttn_b";
    case Engine::Ed: return "ed";
  }
  return "?";
}

Engine parse_engine(const std::string& text) {
  for (Engine e : {Engine::MpsDmrg, Engine::TtnA, Engine::TtnB, Engine::Ed}) {
    if (to_string(e) == text) return e;
  }
  throw ConfigError("engine: expected mps_dmrg, ttn_a, ttn_b or ed, got '" + text + "'");
}

LatticeSpec parse_lattice(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw ConfigError("lattice: expected RxC, got '" + text + "'");
  LatticeSpec l;
  l.n_rows = static_cast<int>(to_int("lattice", text.substr(0, x)));
  l.n_cols = static_cast<int>(to_int("lattice", text.substr(x + 1)));
  l.validate();
  return l;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "lattice") {
    const Boundary b = c.lattice.boundary;
    c.lattice = parse_lattice(value);
    c.lattice.boundary = b;
  } else if (key == "bc") {
    if (value == "obc") {
      c.lattice.boundary = Boundary::Open;
    } else if (value == "pbc") {
      c.lattice.boundary = Boundary::Periodic;
    } else {
      throw ConfigError("bc: expected obc or pbc, got '" + value + "'");
    }
  } else if (key == "mapping") {
    if (value != "snake" && value != "hilbert" && value.rfind("file:", 0) != 0) {
      throw ConfigError("mapping: expected snake, hilbert or file:PATH, got '" + value + "'");
    }
    c.mapping = value;
  } else if (key == "t") {
    c.params.t = to_double(key, value);
  } else if (key == "U") {
    c.params.U = to_double(key, value);
  } else if (key == "density") {
    c.density = Rational::parse(value);
  } else if (key == "nup") {
    c.n_up = static_cast<int>(to_int(key, value));
  } else if (key == "ndown") {
    c.n_down = static_cast<int>(to_int(key, value));
  } else if (key == "schedule") {
    c.schedule = value == "default" ? SweepSchedule::paper_default() : SweepSchedule::parse(value);
  } else if (key == "trunc_tol") {
    c.criteria.trunc_threshold = to_double(key, value);
  } else if (key == "energy_tol") {
    c.criteria.energy_threshold = to_double(key, value);
  } else if (key == "early_stop") {
    c.early_stop = to_bool(key, value);
  } else if (key == "alpha") {
    c.alpha = to_double(key, value);
  } else if (key == "alpha_decay") {
    c.alpha_decay = to_double(key, value);
  } else if (key == "pure_final_sweeps") {
    c.pure_final_sweeps = static_cast<int>(to_int(key, value));
  } else if (key == "lanczos_iter") {
    c.lanczos_iter = static_cast<int>(to_int(key, value));
  } else if (key == "lanczos_tol") {
    c.lanczos_tol = to_double(key, value);
  } else if (key == "engine") {
    c.engine = parse_engine(value);
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "checkpoint") {
    c.checkpoint = value;
  } else if (key == "resume") {
    c.resume = to_bool(key, value);
  } else if (key == "jobs") {
    c.jobs = static_cast<int>(to_int(key, value));
  } else if (key == "threads") {
    c.threads = static_cast<int>(to_int(key, value));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "noise") {
    c.noise = to_double(key, value);
  } else if (key == "pattern") {
    c.pattern = value;
  } else if (key == "eigenvalues") {
    c.eigenvalues = static_cast<int>(to_int(key, value));
  } else if (key == "compare") {
    c.compare = value;
  } else if (key == "tree") {
    c.tree = value;
  } else if (key == "edge_caps") {
    c.edge_caps = value;
  } else if (key == "axis") {
    if (value != "U" && value != "size") throw ConfigError("axis: expected U or size, got '" + value + "'");
    c.axis = value;
  } else if (key == "U_values") {
    c.u_values.clear();
    for (const auto& s : split(value, ',')) c.u_values.push_back(to_double(key, s));
  } else if (key == "sizes") {
    c.sizes.clear();
    for (const auto& s : split(value, ',')) c.sizes.push_back(parse_lattice(s));
  } else if (key == "observables") {
    c.observables.clear();
    for (const auto& s : split(value, ',')) c.observables.push_back(local::parse_observable(s));
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

std::vector<std::pair<std::string, std::string>> settings(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> s;
  s.emplace_back("lattice", lattice_text(c.lattice));
  s.emplace_back("bc", c.lattice.boundary == Boundary::Open ? "obc" : "pbc");
  s.emplace_back("mapping", c.mapping);
  s.emplace_back("t", fmt(c.params.t));
  s.emplace_back("U", fmt(c.params.U));
  if (c.density) {
    s.emplace_back("density", std::to_string(c.density->num) + "/" + std::to_string(c.density->den));
  } else {
    const FillingSpec f = filling(c);
    s.emplace_back("nup", std::to_string(f.n_up));
    s.emplace_back("ndown", std::to_string(f.n_down));
  }
  s.emplace_back("schedule", c.schedule.to_string());
  s.emplace_back("trunc_tol", fmt(c.criteria.trunc_threshold));
  s.emplace_back("energy_tol", fmt(c.criteria.energy_threshold));
  s.emplace_back("early_stop", c.early_stop ? "true" : "false");
  s.emplace_back("alpha", fmt(c.alpha));
  s.emplace_back("alpha_decay", fmt(c.alpha_decay));
  s.emplace_back("pure_final_sweeps", std::to_string(c.pure_final_sweeps));
  s.emplace_back("lanczos_iter", std::to_string(c.lanczos_iter));
  s.emplace_back("lanczos_tol", fmt(c.lanczos_tol));
  s.emplace_back("engine", to_string(c.engine));
  s.emplace_back("out", c.out_dir);
  s.emplace_back("checkpoint", c.checkpoint);
  s.emplace_back("resume", c.resume ? "true" : "false");
  s.emplace_back("jobs", std::to_string(c.jobs));
  s.emplace_back("threads", std::to_string(c.threads));
  s.emplace_back("seed", std::to_string(c.seed));
  s.emplace_back("noise", fmt(c.noise));
  s.emplace_back("pattern", c.pattern);
  s.emplace_back("eigenvalues", std::to_string(c.eigenvalues));
  s.emplace_back("compare", c.compare);
  s.emplace_back("tree", c.tree);
  s.emplace_back("edge_caps", c.edge_caps);
  s.emplace_back("axis", c.axis);
  s.emplace_back("U_values", join(c.u_values, fmt));
  s.emplace_back("sizes", join(c.sizes, lattice_text));
  s.emplace_back("observables", join(c.observables, [](local::Observable o) { return local::to_string(o); }));
  return s;
}

void write_settings(std::ostream& out, const RunConfig& config) {
  for (const auto& [k, v] : settings(config)) out << k << "=" << v << "\n";
}

FillingSpec filling(const RunConfig& c) {
  if (c.n_up.has_value() != c.n_down.has_value()) throw ConfigError("nup and ndown must be given together");
  if (c.n_up && c.density) throw ConfigError("give either density or nup/ndown, not both");
  if (c.n_up) return {*c.n_up, *c.n_down};
  return filling_to_charges(c.lattice, c.density.value_or(Rational{1, 1}));
}

PathMapping make_mapping(const RunConfig& c, const std::string& which) {
  if (which == "snake") return snake_map(c.lattice);
  if (which == "hilbert") return hilbert_map(c.lattice);
  if (which.rfind("file:", 0) == 0) return load_custom_mapping_file(which.substr(5), c.lattice);
  throw ConfigError("unknown mapping '" + which + "'");
}

PathMapping make_mapping(const RunConfig& c) { return make_mapping(c, c.mapping); }

DMRGConfig dmrg_config(const RunConfig& c) {
  DMRGConfig d;
  d.schedule = c.schedule;
  d.criteria = c.criteria;
  d.early_stop = c.early_stop;
  d.alpha = c.alpha;
  d.alpha_decay = c.alpha_decay;
  d.pure_final_sweeps = c.pure_final_sweeps;
  d.lanczos_max_iter = c.lanczos_iter;
  d.lanczos_tol = c.lanczos_tol;
  d.checkpoint_path = c.checkpoint;
  for (const auto& item : split(c.edge_caps, ',')) {
    const auto colon = item.find(':');
    const auto dash = item.find('-');
    if (colon == std::string::npos || dash == std::string::npos || dash > colon) {
      throw ConfigError("edge_caps: expected a-b:m entries, got '" + item + "'");
    }
    int a = static_cast<int>(to_int("edge_caps", item.substr(0, dash)));
    int b = static_cast<int>(to_int("edge_caps", item.substr(dash + 1, colon - dash - 1)));
    if (a > b) std::swap(a, b);
    d.edge_caps[{a, b}] = static_cast<int>(to_int("edge_caps", item.substr(colon + 1)));
  }
  d.validate();
  return d;
}

TreeTopology make_tree(const RunConfig& c) {
  if (!c.tree.empty()) return load_topology_file(c.tree, c.lattice.n_sites());
  const int k = tree_level(c.lattice);
  return c.engine == Engine::TtnA ? build_ttn_a(k) : build_ttn_b(k);
}

void validate(const RunConfig& c) {
  c.lattice.validate();
  const FillingSpec f = filling(c);
  const int n = c.lattice.n_sites();
  if (f.n_up < 0 || f.n_down < 0 || f.n_up > n || f.n_down > n) {
    throw ConfigError("charges (" + std::to_string(f.n_up) + "," + std::to_string(f.n_down) +
                      ") do not fit on " + std::to_string(n) + " sites");
  }
  if (c.params.t == 0.0 && c.params.U == 0.0) throw ConfigError("t and U are both zero");
  (void)make_mapping(c);
  if (!c.compare.empty()) (void)make_mapping(c, c.compare);
  (void)dmrg_config(c);
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (c.threads < 0) throw ConfigError("threads must be non-negative");
  if (c.eigenvalues < 1) throw ConfigError("eigenvalues must be at least 1");
  if (c.noise < 0.0) throw ConfigError("noise must be non-negative");
  if (c.out_dir.empty()) throw ConfigError("out directory must not be empty");
  if (c.engine == Engine::TtnA || c.engine == Engine::TtnB) {
    (void)make_tree(c);
    if (c.tree.empty() && c.mapping != "hilbert") {
      throw ConfigError("the built-in trees are defined on the hilbert chain; use --mapping hilbert");
    }
    if (!c.checkpoint.empty()) throw ConfigError("checkpoints are only supported by the mps_dmrg engine");
  }
  if (c.resume && c.checkpoint.empty()) throw ConfigError("resume needs a checkpoint path");
}

}  // namespace curvemps::app
