// gpswarm: consensus map-building demo, policy evaluation and the
// environment server.
//
// Exit codes: 0 success, 2 bad usage, 3 runtime failure.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gpswarm/consensus_demo.hpp"
#include "gpswarm/controllers.hpp"
#include "gpswarm/env_bridge.hpp"
#include "gpswarm/export.hpp"
#include "gpswarm/swarm_env.hpp"

namespace fs = std::filesystem;
using namespace gpswarm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::string label;
  int agents, targets, obstacles;
};

// Row labels of the transfer table: the training layout, then one
// entity count varied at a time.
const std::vector<Scenario> kTransferTable = {
    {"A3T3O2", 3, 3, 2}, {"A1T1O2", 1, 1, 2}, {"A2T2O2", 2, 2, 2}, {"A4T4O2", 4, 4, 2},
    {"A5T5O2", 5, 5, 2}, {"A3T1O2", 3, 1, 2}, {"A3T2O2", 3, 2, 2}, {"A3T4O2", 3, 4, 2},
    {"A3T5O2", 3, 5, 2}, {"A3T3O1", 3, 3, 1}, {"A3T3O3", 3, 3, 3},
};

Scenario parse_scenario(const std::string& s) {
  static const std::regex re(R"(A(\d+)T(\d+)O(\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw UsageError("scenario must look like A3T3O2, got " + s);
  return {s, std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
}

KeyValues load_kv(const std::string& path) {
  return path.empty() ? KeyValues{} : read_key_values(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
  const auto probe = dir / ".write_probe";
  std::ofstream(probe) << "";
  if (!fs::exists(probe)) throw std::runtime_error("output directory not writable: " + dir.string());
  fs::remove(probe);
}

int cmd_consensus_demo(const std::string& config, std::uint64_t seed, const std::string& out,
                       int rounds, double comm_range, int sensor, int every) {
  ConsensusDemoOptions opt;
  opt.env = EnvConfig::from_key_values(load_kv(config));
  opt.seed = seed;
  opt.rounds = rounds;
  opt.comm_range = comm_range;
  opt.watch_sensor = sensor;
  opt.pgm_every = every;
  ensure_dir(out);
  opt.out_dir = fs::path(out);

  const ConsensusDemoResult res = run_consensus_demo(opt);
  const auto& first = res.rounds.front();
  const auto& last = res.rounds.back();
  std::cout << "sensors=64 rounds=" << rounds << " comm_range=" << comm_range
            << " connected=" << (res.graph_connected ? "yes" : "no") << "\n"
            << "round 0 mean disagreement " << first.mean_disagreement << "\n"
            << "round " << last.round << " mean disagreement " << last.mean_disagreement
            << ", var disagreement " << last.var_disagreement << "\n"
            << "max |sensor - central| mean " << res.final_vs_central_mean << ", var "
            << res.final_vs_central_var << "\n"
            << res.artifacts.size() << " artifacts in " << out << "\n";
  return 0;
}

int cmd_episode(const std::string& config, const std::string& policy_name, std::uint64_t seed,
                int episodes, const std::string& out, const std::vector<std::string>& scenarios,
                bool table) {
  const KeyValues kv = load_kv(config);
  const EnvConfig base = EnvConfig::from_key_values(kv);
  const HeuristicConfig hc = HeuristicConfig::from_key_values(kv);
  if (episodes < 1) throw UsageError("--episodes must be >= 1");
  if (policy_name != "random" && policy_name != "heuristic")
    throw UsageError("unknown policy '" + policy_name + "'");

  std::vector<Scenario> rows;
  if (table) rows = kTransferTable;
  for (const auto& s : scenarios) rows.push_back(parse_scenario(s));
  if (rows.empty())
    rows.push_back({"A" + std::to_string(base.num_agents) + "T" + std::to_string(base.num_targets) +
                        "O" + std::to_string(base.num_obstacles),
                    base.num_agents, base.num_targets, base.num_obstacles});

  ensure_dir(out);
  const auto basis = make_basis(base);
  std::ofstream metrics_csv(fs::path(out) / "metrics.csv");
  metrics_csv << kMetricsCsvHeader << "\n";
  std::cout << kMetricsCsvHeader << "\n";
  for (const auto& sc : rows) {
    EnvConfig cfg = base;
    cfg.num_agents = sc.agents;
    cfg.num_targets = sc.targets;
    cfg.num_obstacles = sc.obstacles;
    cfg.validate();
    SwarmEnv env(cfg, basis);
    auto policy = make_policy(policy_name, cfg, hc);
    Metrics sum;
    for (int e = 0; e < episodes; ++e) {
      const EpisodeTrace trace = run_episode(env, *policy, seed + e);
      std::ofstream tcsv(fs::path(out) / ("trace_" + sc.label + "_" + std::to_string(e) + ".csv"));
      write_trace_csv(tcsv, trace);
      const Metrics m = episode_metrics(trace);
      sum.r_avg += m.r_avg;
      sum.d_final += m.d_final;
      sum.cr_aa += m.cr_aa;
      sum.cr_ao += m.cr_ao;
    }
    const Metrics avg{sum.r_avg / episodes, sum.d_final / episodes, sum.cr_aa / episodes,
                      sum.cr_ao / episodes};
    const std::string row = metrics_csv_row(sc.label, policy_name, episodes, avg);
    metrics_csv << row << "\n";
    std::cout << row << "\n";
  }
  if (!metrics_csv) throw std::runtime_error("failed writing metrics.csv");
  return 0;
}

bridge::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& config, int port, int sessions) {
  const EnvConfig cfg = EnvConfig::from_key_values(load_kv(config));
  auto log = [](const std::string& line) { std::cerr << line << std::endl; };
  bridge::Server server(cfg, make_basis(cfg), port, log);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on 127.0.0.1:" << server.port() << std::endl;
  server.run(sessions);
  g_server = nullptr;
  return 0;
}

int cmd_build_basis(const std::string& config, const std::string& out) {
  const EnvConfig cfg = EnvConfig::from_key_values(load_kv(config));
  ensure_dir(out);
  const auto basis = make_basis(cfg);
  const auto path = fs::path(out) / "basis.bin";
  basis->save(path);
  std::cout << "rank " << basis->rank() << ", dropped " << basis->dropped_count()
            << " non-positive eigenpairs, truncation bound " << basis->truncation_bound() << "\n"
            << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed GP target search-and-tracking simulator"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";

  auto* demo = app.add_subcommand("consensus-demo", "64-sensor consensus map-building demo");
  int rounds = 300;
  double comm_range = 0.6;
  int sensor = 0;
  int every = 1;
  demo->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
  demo->add_option("--seed", seed, "master seed");
  demo->add_option("--out", out, "artifact directory");
  demo->add_option("--rounds", rounds, "consensus rounds")->check(CLI::NonNegativeNumber);
  demo->add_option("--comm-range", comm_range, "sensor communication range")->check(CLI::PositiveNumber);
  demo->add_option("--sensor", sensor, "sensor whose maps are exported (0 = lower-left)");
  demo->add_option("--every", every, "export sensor maps every n rounds")->check(CLI::PositiveNumber);

  auto* episode = app.add_subcommand("episode", "run seeded episodes and report metrics");
  std::string policy = "heuristic";
  int episodes = 10;
  std::vector<std::string> scenarios;
  bool table = false;
  episode->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
  episode->add_option("--seed", seed, "master seed; episode e uses seed + e");
  episode->add_option("--out", out, "artifact directory");
  episode->add_option("--policy", policy, "random | heuristic");
  episode->add_option("--episodes", episodes, "episodes per configuration");
  episode->add_option("--scenario", scenarios, "entity counts such as A3T3O2 (repeatable)");
  episode->add_flag("--table", table, "run every row of the transfer table");

  auto* serve = app.add_subcommand("serve", "serve the environment over TCP");
  int port = bridge::kDefaultPort;
  int sessions = -1;
  serve->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port (0 = ephemeral)")->check(CLI::Range(0, 65535));
  serve->add_option("--sessions", sessions, "exit after this many sessions (default: run forever)");
  serve->add_option("--seed", seed, "unused; sessions are seeded by reset requests");

  auto* basis_cmd = app.add_subcommand("build-basis", "build and save the kernel basis");
  basis_cmd->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
  basis_cmd->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*demo) return cmd_consensus_demo(config, seed, out, rounds, comm_range, sensor, every);
    if (*episode) return cmd_episode(config, policy, seed, episodes, out, scenarios, table);
    if (*serve) return cmd_serve(config, port, sessions);
    if (*basis_cmd) return cmd_build_basis(config, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
