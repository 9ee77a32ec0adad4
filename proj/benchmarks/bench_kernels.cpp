#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "curvemps/dmrg.hpp"
#include "curvemps/mpo.hpp"
#include "curvemps/symtensor.hpp"
#include "curvemps/ttn.hpp"

using namespace curvemps;

namespace {

// Bond leg with the charge sectors a half-filled 4x4 chain meets near its centre.
Leg bond(Direction d, int per_sector) {
  std::vector<Sector> s;
  for (int u = 6; u <= 10; ++u) {
    for (int n = 6; n <= 10; ++n) s.push_back({Charge{u, n}, per_sector});
  }
  return Leg(d, s);
}

BlockTensor site_tensor(int per_sector, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Leg left = bond(Direction::In, per_sector);
  std::vector<Sector> right;
  for (int u = 6; u <= 11; ++u) {
    for (int n = 6; n <= 11; ++n) right.push_back({Charge{u, n}, per_sector});
  }
  return BlockTensor::random({left, local::physical_leg(Direction::In), Leg(Direction::Out, right)}, {}, rng);
}

}  // namespace

static void BM_Contract(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const BlockTensor a = site_tensor(d, 1);
  const BlockTensor b = a.dual();
  for (auto _ : state) {
    BlockTensor r = contract(a, b, {{0, 0}, {1, 1}});
    benchmark::DoNotOptimize(r);
  }
  state.counters["blocks"] = static_cast<double>(a.n_blocks());
}
BENCHMARK(BM_Contract)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_SvdTruncate(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const BlockTensor a = site_tensor(d, 2);
  const TruncationSpec spec{d * 10, 1e-14};
  for (auto _ : state) {
    SVDResult r = svd_truncate(a, {0, 1}, spec);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_SvdTruncate)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_DmrgSweep(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const LatticeSpec l{4, 4, Boundary::Open};
  const PathMapping map = hilbert_map(l);
  const MPOperator h = compile_mpo(mapped_terms(build_edges(l), map, {1.0, 6.0}));
  const MPSState init = product_init(map, {8, 8});
  DMRGConfig c;
  c.schedule = SweepSchedule::parse(std::to_string(m));
  for (auto _ : state) {
    DMRGResult r = ground_state(init, h, c);
    benchmark::DoNotOptimize(r.final_energy);
  }
}
BENCHMARK(BM_DmrgSweep)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_TtnNodeUpdate(benchmark::State& state) {
  const int z = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  std::uint64_t flops = 0;
  for (auto _ : state) flops = ttn_node_update_flops(z, m);
  state.counters["flops"] = static_cast<double>(flops);
}
BENCHMARK(BM_TtnNodeUpdate)->ArgsProduct({{1, 2, 3}, {8, 16, 32}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
