// Parallel kernels vs their serial references: map rasterisation and
// consensus rounds. Prints median wall time and checks the outputs agree
// bit for bit.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "gpswarm/dgp_consensus.hpp"
#include "gpswarm/map_kernels.hpp"
#include "gpswarm/swarm_env.hpp"

using namespace gpswarm;
using bench_clock = std::chrono::steady_clock;

template <class F>
double median_ms(int repeats, F&& f) {
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = bench_clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::milli>(bench_clock::now() - t0).count());
  }
  std::nth_element(t.begin(), t.begin() + t.size() / 2, t.end());
  return t[t.size() / 2];
}

int main() {
  EnvConfig cfg;
  cfg.raster = 64;
  const auto basis = make_basis(cfg);
  const MapGrid grid = observation_grid(cfg);
  const GridFeatures f = GridFeatures::compute(*basis, grid);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n_agents = 64;
  std::vector<GpState> states;
  std::vector<Vec2> pos;
  for (int i = 0; i < n_agents; ++i) {
    GpState s = GpState::zero(basis->rank(), i);
    for (int k = 0; k < 20; ++k) fuse_measurement(s, basis->features(Vec2(u(rng), u(rng))), u(rng));
    states.push_back(std::move(s));
    pos.emplace_back(u(rng), u(rng));
  }
  const CommGraph g = build_graph(pos, 0.8);
  const GpMap map(states[0], *basis, n_agents);

  std::printf("threads: %d, E = %d, raster %dx%d, %d agents, %zu edges\n", omp_get_max_threads(),
              basis->rank(), grid.rows, grid.cols, n_agents, g.edges.size());

  std::vector<double> m1(grid.size()), s1(grid.size()), m2(grid.size()), s2(grid.size());
  const double map_par = median_ms(50, [&] { evaluate_map(map, f, m1, s1); });
  const double map_ser = median_ms(50, [&] { evaluate_map_serial(map, f, m2, s2); });
  const bool map_same = m1 == m2 && s1 == s2;
  std::printf("%-18s parallel %8.3f ms  serial %8.3f ms  speedup %5.2fx  identical=%s\n",
              "evaluate_map", map_par, map_ser, map_ser / map_par, map_same ? "yes" : "NO");

  std::vector<GpState> a, b;
  const double cons_par = median_ms(20, [&] { a = consensus_round(states, g); });
  const double cons_ser = median_ms(20, [&] { b = consensus_round_serial(states, g); });
  bool cons_same = true;
  for (int i = 0; i < n_agents; ++i)
    cons_same = cons_same && a[i].alpha == b[i].alpha && a[i].beta == b[i].beta;
  std::printf("%-18s parallel %8.3f ms  serial %8.3f ms  speedup %5.2fx  identical=%s\n",
              "consensus_round", cons_par, cons_ser, cons_ser / cons_par, cons_same ? "yes" : "NO");

  return map_same && cons_same ? 0 : 1;
}
