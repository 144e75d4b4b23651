// Acceptance suite: one PASS/FAIL line per primary criterion.
//
//   acceptance [--out DIR] [--only N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "gpswarm/assignment.hpp"
#include "gpswarm/consensus_demo.hpp"
#include "gpswarm/controllers.hpp"
#include "gpswarm/dgp_consensus.hpp"
#include "gpswarm/env_bridge.hpp"
#include "gpswarm/gp_oracle.hpp"
#include "gpswarm/swarm_env.hpp"
#include "test_support.hpp"
#include "wire_gen.hpp"

using namespace gpswarm;
namespace fs = std::filesystem;
using steady = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(steady::time_point t0) {
  return std::chrono::duration<double>(steady::now() - t0).count();
}

template <class F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = steady::now();
    f();
    t.push_back(seconds_since(t0));
  }
  std::sort(t.begin(), t.end());
  return repeats % 2 ? t[repeats / 2] : 0.5 * (t[repeats / 2 - 1] + t[repeats / 2]);
}

std::vector<GpState> fused_states(const BasisSet& b, const Dataset& d) {
  std::vector<GpState> s;
  for (int i = 0; i < d.agents; ++i) {
    GpState st = GpState::zero(b.rank(), i);
    for (int t = 0; t < d.per_agent; ++t) {
      const int k = i * d.per_agent + t;
      fuse_measurement(st, b.features(d.inputs[k]), d.outputs[k]);
    }
    s.push_back(std::move(st));
  }
  return s;
}

std::vector<Vec2> random_actions(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec2> a;
  for (int i = 0; i < n; ++i) a.emplace_back(u(rng), u(rng));
  return a;
}

void criterion_1(Verdict& v) {
  const auto t0 = steady::now();
  const BasisSet b = BasisSet::build(KernelParams{}, Rect{}, 41, 40);
  double trace = 0.0;
  for (const auto& g : b.grid_points()) trace += kernel_eval(b.kernel(), g, g);
  trace *= b.cell_area();
  const double spectrum = b.full_spectrum().sum();

  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::pair<Vec2, Vec2>> pairs;
  for (int i = 0; i < 1000; ++i) pairs.push_back({Vec2(u(rng), u(rng)), Vec2(u(rng), u(rng))});
  auto err = [&](const BasisSet& basis) {
    double s = 0.0;
    for (const auto& [a, c] : pairs) s += std::abs(basis.reconstruct(a, c) - kernel_eval(basis.kernel(), a, c));
    return s / pairs.size();
  };
  const BasisSet b10 = b.truncated(10);
  const double e10 = err(b10), e40 = err(b);
  const double secs = seconds_since(t0);

  v.detail << "eigenvalue sum " << spectrum << " (oracle " << trace << "), mean |err| E=10 " << e10
           << ", E=40 " << e40 << ", " << secs << " s";
  v.require(std::abs(spectrum - 4.0) <= 1e-6 && std::abs(trace - 4.0) <= 1e-12, "trace identity");
  v.require(e40 < e10, "E=40 error below E=10");
  v.require(e40 < 5e-2, "E=40 error < 5e-2");
  v.require(secs < 30.0, "runtime < 30 s");
}

void criterion_2(Verdict& v) {
  const auto t0 = steady::now();
  const BasisSet& b = testsupport::default_basis();
  const auto grid = testsupport::query_grid(33);
  double worst_central = 0.0, worst_pair = 0.0;
  bool all_connected = true;
  for (int ds = 0; ds < 5; ++ds) {
    const Dataset d = testsupport::random_dataset(25, 4, 500 + ds);
    std::mt19937_64 rng(900 + ds);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CommGraph g;
    do {
      std::vector<Vec2> pos;
      for (int i = 0; i < 4; ++i) pos.emplace_back(u(rng), u(rng));
      g = build_graph(pos, 1.2);
    } while (!g.connected());
    all_connected = all_connected && g.connected();

    std::vector<GpState> s = fused_states(b, d);
    for (int r = 0; r < 300; ++r) s = consensus_round(s, g);

    const CentralEstimator ce(b, d);
    std::vector<GpMap> maps;
    for (const auto& st : s) maps.emplace_back(st, b, 4);
    for (const Vec2& x : grid) {
      const double cm = ce.mean(x), cv = ce.variance(x);
      double lo_m = 1e300, hi_m = -1e300, lo_v = 1e300, hi_v = -1e300;
      for (const auto& m : maps) {
        const double am = m.mean(x), av = m.variance(x);
        worst_central = std::max({worst_central, std::abs(am - cm), std::abs(av - cv)});
        lo_m = std::min(lo_m, am), hi_m = std::max(hi_m, am);
        lo_v = std::min(lo_v, av), hi_v = std::max(hi_v, av);
      }
      worst_pair = std::max({worst_pair, hi_m - lo_m, hi_v - lo_v});
    }
  }
  const double secs = seconds_since(t0);
  v.detail << "5 datasets, N=4, w=25, 300 rounds: max |agent - central| " << worst_central
           << ", max pairwise " << worst_pair << ", " << secs << " s";
  v.require(all_connected, "connected graphs");
  v.require(worst_central <= 1e-6, "agent vs central <= 1e-6");
  v.require(worst_pair <= 1e-8, "pairwise <= 1e-8");
  v.require(secs < 60.0, "runtime < 1 min");
}

void criterion_3(Verdict& v, const fs::path& out) {
  const auto t0 = steady::now();
  ConsensusDemoOptions opt;
  opt.seed = 3;
  opt.pgm_every = 50;
  opt.out_dir = out / "consensus_demo";
  const ConsensusDemoResult res = run_consensus_demo(opt);
  const double secs = seconds_since(t0);

  bool state_monotone = true;
  int map_increases = 0;
  for (std::size_t r = 1; r < res.rounds.size(); ++r) {
    state_monotone = state_monotone && res.rounds[r].state_disagreement <= res.rounds[r - 1].state_disagreement;
    map_increases += res.rounds[r].mean_disagreement > res.rounds[r - 1].mean_disagreement;
  }
  const auto& last = res.rounds.back();
  int pgms = 0;
  for (const auto& a : res.artifacts) pgms += a.extension() == ".pgm" && fs::exists(a);

  v.detail << opt.rounds << " rounds, range " << opt.comm_range << ": map disagreement " << res.rounds.front().mean_disagreement
           << " -> " << last.mean_disagreement << " (var " << last.var_disagreement << "), state disagreement "
           << res.rounds.front().state_disagreement << " -> " << last.state_disagreement
           << (state_monotone ? " monotone" : " NOT monotone") << " (map-level rises: " << map_increases
           << "), vs central mean " << res.final_vs_central_mean << " var " << res.final_vs_central_var << ", "
           << pgms << " PGMs, " << secs << " s";
  v.require(res.graph_connected, "sensor graph connected");
  v.require(last.mean_disagreement < 1e-6 && last.var_disagreement < 1e-6, "final disagreement < 1e-6");
  v.require(state_monotone, "monotone nonincreasing disagreement");
  v.require(res.rounds.front().mean_disagreement > last.mean_disagreement, "round 0 above final");
  v.require(res.final_vs_central_mean <= 1e-6 && res.final_vs_central_var <= 1e-6, "equals central within 1e-6");
  v.require(pgms >= 5, "PGM artifacts");
  v.require(secs < 60.0, "runtime < 1 min");
}

void criterion_4(Verdict& v) {
  const BasisSet& b = testsupport::default_basis();
  const Dataset d = testsupport::random_dataset(50, 1, 44);
  GpState s = GpState::zero(b.rank());
  Eigen::MatrixXd g(50, b.rank());
  for (int t = 0; t < 50; ++t) {
    g.row(t) = b.features(d.inputs[t]).transpose();
    s = fuse_measurement(s, b, d.inputs[t], d.outputs[t]);
  }
  const Eigen::Map<const Eigen::VectorXd> y(d.outputs.data(), 50);
  const Eigen::MatrixXd alpha = g.transpose() * g / 50.0;
  const Eigen::VectorXd beta = g.transpose() * y / 50.0;
  const double ra = (s.alpha - alpha).norm() / alpha.norm();
  const double rb = (s.beta - beta).norm() / beta.norm();
  v.detail << "w=50 relative error alpha " << ra << ", beta " << rb;
  v.require(s.w == 50, "w = 50");
  v.require(ra <= 1e-10 && rb <= 1e-10, "relative error <= 1e-10");
}

void criterion_5(Verdict& v) {
  const BasisSet& b = testsupport::default_basis();
  const Vec2 x(0.1, -0.2);
  auto timings = [&](int agents, int per_agent) {
    const Dataset d = testsupport::random_dataset(per_agent, agents, 77 + agents);
    const auto states = fused_states(b, d);
    volatile double sink = 0.0;
    const double dm = median_seconds(20, [&] { sink = sink + dist_mean(states[0], b, agents, x); });
    const double fg = median_seconds(20, [&] { sink = sink + full_gp_posterior(b.kernel(), d, x).mean; });
    return std::pair{dm, fg};
  };
  const auto [dm_small, fg_small] = timings(2, 25);
  const auto [dm_large, fg_large] = timings(4, 250);
  const double dm_ratio = dm_large / dm_small, fg_ratio = fg_large / fg_small;
  v.detail << "dist_mean " << dm_small * 1e3 << " ms -> " << dm_large * 1e3 << " ms (x" << dm_ratio
           << "), full GP " << fg_small * 1e3 << " ms -> " << fg_large * 1e3 << " ms (x" << fg_ratio << ")";
  v.require(dm_ratio <= 2.0, "dist_mean ratio <= 2");
  v.require(fg_ratio >= 10.0, "full GP ratio >= 10");
}

double brute_force_min(const Eigen::MatrixXd& c) {
  // Enumerate injections of the smaller side; sum matched costs in row order
  // of the original matrix so the result is comparable bit for bit.
  const bool wide = c.rows() <= c.cols();
  const int small = wide ? c.rows() : c.cols(), large = wide ? c.cols() : c.rows();
  std::vector<int> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    std::vector<int> row_to_col(c.rows(), -1);
    for (int k = 0; k < small; ++k) {
      if (wide) row_to_col[k] = perm[k];
      else row_to_col[perm[k]] = k;
    }
    double s = 0.0;
    for (int r = 0; r < c.rows(); ++r)
      if (row_to_col[r] >= 0) s += c(r, row_to_col[r]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

WorldState hand_world(std::vector<Vec2> agents, std::vector<Vec2> targets) {
  WorldState w;
  w.agent_pos = std::move(agents);
  w.agent_vel.assign(w.agent_pos.size(), Vec2::Zero());
  w.target_pos = std::move(targets);
  w.amplitudes.assign(w.target_pos.size(), 1.0);
  return w;
}

void criterion_6(Verdict& v) {
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int instances = 0, mismatches = 0;
  for (int n = 1; n <= 5; ++n) {
    for (int m = 1; m <= 5; ++m) {
      for (int t = 0; t < 100; ++t, ++instances) {
        Eigen::MatrixXd c(n, m);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < m; ++j) c(i, j) = (Vec2(u(rng), u(rng)) - Vec2(u(rng), u(rng))).norm();
        if (solve_assignment(c).total_cost != brute_force_min(c)) ++mismatches;
      }
    }
  }
  EnvConfig cfg;
  const double r_all = compute_reward(hand_world({Vec2(0, 0), Vec2(0.5, 0.5)}, {Vec2(0.5, 0.5), Vec2(0, 0)}), cfg).reward;
  const double r_hit = compute_reward(hand_world({Vec2(0, 0), Vec2(0.05, 0)}, {Vec2(0, 0), Vec2(0.05, 0)}), cfg).reward;
  const double r_char = compute_reward(hand_world({Vec2(0, 0)}, {Vec2(cfg.d_char, 0)}), cfg).reward;
  v.detail << instances << " instances, " << mismatches << " cost mismatches; rewards " << r_all << " / "
           << r_hit << " / " << r_char;
  v.require(mismatches == 0, "Hungarian == brute force");
  v.require(std::abs(r_all - 1.0) <= 1e-6, "reward 1.0");
  v.require(std::abs(r_hit - 0.0) <= 1e-6, "reward 0.0");
  v.require(std::abs(r_char - 0.43109) <= 5e-6, "reward 0.43109 to 5 decimals");
  v.require(std::abs(r_char - (0.1 + 0.9 * std::exp(-1.0))) <= 1e-6, "reward 0.1 + 0.9/e");
}

void criterion_7(Verdict& v) {
  const EnvConfig cfg;
  const auto basis = make_basis(cfg);
  auto trace_of = [&](std::uint64_t seed) {
    SwarmEnv env(cfg, basis);
    env.reset(seed);
    std::mt19937_64 rng(seed + 1);
    std::vector<StepResult> out;
    while (!env.done()) out.push_back(env.step(random_actions(rng, cfg.num_agents, 0.8)));
    return std::pair{env.trace(), out};
  };
  const auto [ta, ra] = trace_of(12);
  const auto [tb, rb] = trace_of(12);
  bool identical = ta.steps.size() == 100 && tb.steps.size() == 100;
  for (std::size_t k = 0; identical && k < ta.steps.size(); ++k) {
    identical = ta.steps[k].reward == tb.steps[k].reward && ta.steps[k].info == tb.steps[k].info &&
                ta.steps[k].agent_pos == tb.steps[k].agent_pos && ta.steps[k].agent_vel == tb.steps[k].agent_vel &&
                ra[k].observations == rb[k].observations;
  }

  SwarmEnv env(cfg, basis);
  std::mt19937_64 rng(7);
  int steps = 0;
  double max_v = 0.0, max_a = 0.0, r_lo = 1.0, r_hi = 0.0;
  bool consistent = true;
  for (std::uint64_t ep = 0; steps < 10000; ++ep) {
    env.reset(1000 + ep);
    while (!env.done() && steps < 10000) {
      const auto acts = random_actions(rng, cfg.num_agents, 1.5);
      WorldState shadow = env.world();
      const auto applied = apply_dynamics(shadow, cfg, acts);
      const StepResult r = env.step(acts);
      ++steps;
      for (const auto& a : applied) max_a = std::max(max_a, a.norm());
      for (const auto& vel : env.world().agent_vel) max_v = std::max(max_v, vel.norm());
      consistent = consistent && shadow.agent_pos == env.world().agent_pos;
      r_lo = std::min(r_lo, r.reward);
      r_hi = std::max(r_hi, r.reward);
    }
  }
  v.detail << "100-step trace " << (identical ? "bit-identical" : "DIFFERS") << "; " << steps
           << " random steps: max |v| " << max_v << ", max |a| " << max_a << ", reward in [" << r_lo << ", "
           << r_hi << "]";
  v.require(identical, "determinism");
  v.require(max_v <= cfg.v_max + 1e-12, "|v| <= v_max");
  v.require(max_a <= cfg.a_max + 1e-12, "|a| <= a_max");
  v.require(consistent, "applied dynamics match the environment");
  v.require(r_lo >= 0.0 && r_hi <= 1.0, "reward in [0,1]");
}

void criterion_8(Verdict& v) {
  EnvConfig cfg;  // A3T3O2
  SwarmEnv env(cfg, make_basis(cfg));
  auto heuristic = make_policy("heuristic", cfg);
  auto random = make_policy("random", cfg);
  const Metrics h = evaluate_policy(env, *heuristic, 0, 50);
  const Metrics r = evaluate_policy(env, *random, 0, 50);
  v.detail << "50 paired A3T3O2 episodes: heuristic r_avg " << h.r_avg << " (d_final " << h.d_final
           << "), random r_avg " << r.r_avg << " (d_final " << r.d_final << ")";
  v.require(h.r_avg > r.r_avg, "heuristic > random");
}

void criterion_9(Verdict& v) {
  using namespace bridge;
  std::mt19937_64 rng(99);
  int round_trip_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const Request q = wiregen::gen_request(rng);
    const Response r = wiregen::gen_response(rng);
    if (!(parse_request(serialize(q)) == q) || !(parse_response(serialize(r)) == r)) ++round_trip_failures;
  }

  Server server(EnvConfig{}, make_basis(EnvConfig{}), 0);
  std::thread th([&] { server.run(2); });
  const std::string step3 = serialize(Request{"step", std::nullopt, std::vector<std::vector<double>>(3, {0.2, 0.1})});
  const std::string step2 = serialize(Request{"step", std::nullopt, std::vector<std::vector<double>>(2, {0.2, 0.1})});
  std::vector<std::string> payloads[2];
  bool errors_ok = true;
  for (int s = 0; s < 2; ++s) {
    LineClient c("127.0.0.1", server.port());
    errors_ok = errors_ok && parse_response(c.request(step3)).err == "order";
    payloads[s].push_back(c.request(R"({"cmd":"reset","seed":7})"));
    errors_ok = errors_ok && parse_response(c.request(step2)).err == "arity";
    for (int k = 0; k < 5; ++k) payloads[s].push_back(c.request(step3));
    errors_ok = errors_ok && parse_response(payloads[s].back()).ok;
    c.request(R"({"cmd":"close"})");
  }
  th.join();
  const bool identical = payloads[0] == payloads[1];
  v.detail << "1000 generated request/response pairs, " << round_trip_failures
           << " round-trip failures; order/arity errors " << (errors_ok ? "answered, session kept" : "MISHANDLED")
           << "; same-seed sessions " << (identical ? "byte-identical" : "DIFFER") << " ("
           << payloads[0].front().size() << " bytes per reset payload)";
  v.require(round_trip_failures == 0, "round trip");
  v.require(errors_ok, "errors without termination");
  v.require(identical, "byte-identical sessions");
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = fs::temp_directory_path() / "gpswarm_acceptance";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) out = argv[++i];
    else if (a == "--only" && i + 1 < argc) only = std::stoi(argv[++i]);
    else {
      std::fprintf(stderr, "usage: %s [--out DIR] [--only N]\n", argv[0]);
      return 2;
    }
  }
  fs::create_directories(out);

  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"basis fidelity", criterion_1},
      {"distributed equals centralized", criterion_2},
      {"64-sensor consensus demo", [&](Verdict& v) { criterion_3(v, out); }},
      {"online fusion", criterion_4},
      {"complexity", criterion_5},
      {"reward and assignment", criterion_6},
      {"environment contract", criterion_7},
      {"baseline ordering", criterion_8},
      {"protocol", criterion_9},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && only != static_cast<int>(i + 1)) continue;
    Verdict v;
    v.detail.precision(4);
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    failed += !v.pass;
    std::printf("[%s] %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
