#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "app/commands.hpp"
#include "app/run_config.hpp"

using namespace curvemps;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("curvemps_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(CURVEMPS_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("settings precedence and round trip") {
  app::RunConfig c;
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "run.cfg");
    f << "# comment\nlattice = 2x4\nU=4\nschedule=8,16\nmapping=snake\n";
  }
  app::apply_config_file(c, (dir / "run.cfg").string());
  CHECK(c.lattice == LatticeSpec{2, 4, Boundary::Open});
  CHECK(c.params.U == 4.0);
  app::apply_setting(c, "U", "8");
  CHECK(c.params.U == 8.0);
  CHECK(app::filling(c) == FillingSpec{4, 4});
  app::apply_setting(c, "density", "3/4");
  CHECK(app::filling(c) == FillingSpec{3, 3});

  std::ostringstream out;
  app::write_settings(out, c);
  app::RunConfig back;
  std::istringstream in(out.str());
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) app::apply_setting(back, line.substr(0, eq), line.substr(eq + 1));
  }
  CHECK(app::settings(back) == app::settings(c));

  CHECK_THROWS_AS(app::apply_setting(c, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(app::apply_setting(c, "U", "six"), ConfigError);
  CHECK_THROWS_AS(app::parse_lattice("4by4"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("validation rejects unsupported combinations") {
  app::RunConfig c;
  c.lattice = {6, 6, Boundary::Open};
  CHECK_THROWS_AS(app::validate(c), ConfigError);
  c.lattice = {4, 4, Boundary::Open};
  c.mapping = "snake";
  c.engine = app::Engine::TtnB;
  CHECK_THROWS_AS(app::validate(c), ConfigError);
  c.mapping = "hilbert";
  CHECK_NOTHROW(app::validate(c));
  c.checkpoint = "x.bin";
  CHECK_THROWS_AS(app::validate(c), ConfigError);
}

TEST_CASE("map writes its reports") {
  app::RunConfig c;
  c.out_dir = scratch("map").string();
  std::ostringstream log;
  app::cmd_map(c, log);
  for (const char* f : {"mapping.txt", "locality.csv", "cut_profile.csv", "mpo_bonds.csv", "run.json", "config.txt"}) {
    CHECK(fs::exists(fs::path(c.out_dir) / f));
  }
  CHECK(slurp(fs::path(c.out_dir) / "locality.csv").find("13") != std::string::npos);
  fs::remove_all(c.out_dir);
}

TEST_CASE("ground and ed agree on 2x2") {
  app::RunConfig c;
  c.lattice = {2, 2, Boundary::Open};
  c.schedule = SweepSchedule::parse("16,32,64");
  c.out_dir = scratch("ground").string();
  std::ostringstream log;
  app::cmd_ground(c, log);
  const std::string result = slurp(fs::path(c.out_dir) / "result.csv");
  CHECK(result.find("-1.6346030549") != std::string::npos);
  CHECK(fs::exists(fs::path(c.out_dir) / "sweeps.csv"));

  c.engine = app::Engine::Ed;
  c.compare = "snake";
  app::cmd_ed(c, log);
  CHECK(slurp(fs::path(c.out_dir) / "eigenvalues.csv").find("-1.6346030549") != std::string::npos);
  CHECK(fs::exists(fs::path(c.out_dir) / "spectrum_compare.csv"));
  fs::remove_all(c.out_dir);
}

TEST_CASE("bench writes one comparison row per point") {
  app::RunConfig c;
  c.lattice = {2, 2, Boundary::Open};
  c.schedule = SweepSchedule::parse("16,32");
  c.u_values = {6.0};
  c.out_dir = scratch("bench").string();
  std::ostringstream log;
  app::cmd_bench(c, log);
  const std::string csv = slurp(fs::path(c.out_dir) / "comparison.csv");
  CHECK(csv.rfind("lattice,bc,U,n_up,n_down,max_bond,e_snake,e_hilbert,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  fs::remove_all(c.out_dir);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(run("map --lattice 4x4 --out " + dir.string()) == 0);
  CHECK(run("map --lattice 6x6 --mapping hilbert --out " + dir.string()) == 2);
  CHECK(run("ground --no-such-flag") == 2);
  CHECK(run("ground --set bogus=1 --out " + dir.string()) == 2);
  CHECK(run("ed --lattice 2x2 --U 6 --out " + dir.string()) == 0);
  fs::remove_all(dir);
}
