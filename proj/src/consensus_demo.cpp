#include "gpswarm/consensus_demo.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "gpswarm/dgp_consensus.hpp"
#include "gpswarm/export.hpp"
#include "gpswarm/gp_oracle.hpp"
#include "gpswarm/map_kernels.hpp"
#include "gpswarm/swarm_env.hpp"

namespace gpswarm {

namespace {

struct SensorMaps {
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> var;
};

SensorMaps evaluate_all(const std::vector<GpState>& states, const BasisSet& basis,
                        const GridFeatures& f, int cells) {
  SensorMaps m;
  const int n = static_cast<int>(states.size());
  m.mean.assign(n, std::vector<double>(cells));
  m.var.assign(n, std::vector<double>(cells));
  for (int i = 0; i < n; ++i) {
    const GpMap map(states[i], basis, n);
    if (map.is_prior()) {
      std::fill(m.mean[i].begin(), m.mean[i].end(), 0.0);
      std::copy(f.prior.begin(), f.prior.end(), m.var[i].begin());
      continue;
    }
    // Whole-raster form of the per-cell estimator.
    const Eigen::VectorXd mean = f.phi * map.mean_weights();
    const Eigen::VectorXd quad =
        (f.phi * map.variance_operator().transpose()).cwiseProduct(f.phi).rowwise().sum();
    for (int c = 0; c < cells; ++c) {
      m.mean[i][c] = mean(c);
      m.var[i][c] = std::clamp(f.prior(c) - quad(c), 0.0, f.prior(c));
    }
  }
  return m;
}

double spread(const std::vector<std::vector<double>>& maps) {
  double worst = 0.0;
  for (std::size_t c = 0; c < maps.front().size(); ++c) {
    double lo = maps.front()[c], hi = lo;
    for (const auto& m : maps) {
      lo = std::min(lo, m[c]);
      hi = std::max(hi, m[c]);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

std::string round_tag(int r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", r);
  return buf;
}

}  // namespace

ConsensusDemoResult run_consensus_demo(const ConsensusDemoOptions& opt) {
  opt.env.validate();
  if (opt.sensors_per_side < 1 || opt.rounds < 0 || opt.num_targets < 1 || opt.pgm_every < 1)
    throw ConfigError("invalid consensus demo options");
  const int n_sensors = opt.sensors_per_side * opt.sensors_per_side;
  if (opt.watch_sensor < 0 || opt.watch_sensor >= n_sensors)
    throw ConfigError("watch sensor index out of range");

  const auto basis = make_basis(opt.env);
  const MapGrid grid = observation_grid(opt.env);
  const GridFeatures features = GridFeatures::compute(*basis, grid);
  const auto sensors = cell_centers(opt.env.workspace, opt.sensors_per_side, opt.sensors_per_side);

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> ux(opt.env.workspace.lo.x(), opt.env.workspace.hi.x());
  std::uniform_real_distribution<double> uy(opt.env.workspace.lo.y(), opt.env.workspace.hi.y());
  std::vector<Vec2> targets;
  std::vector<double> amps;
  for (int m = 0; m < opt.num_targets; ++m) {
    targets.emplace_back(ux(rng), uy(rng));
    amps.push_back(opt.env.amplitude_of(m));
  }

  std::normal_distribution<double> noise(0.0, opt.env.sigma_n > 0.0 ? opt.env.sigma_n : 1.0);
  Dataset pooled;
  pooled.per_agent = 1;
  pooled.agents = n_sensors;
  std::vector<GpState> states;
  for (int i = 0; i < n_sensors; ++i) {
    double y = signal_field(targets, amps, sensors[i], opt.env.intensity_scale);
    if (opt.env.sigma_n > 0.0) y += noise(rng);
    pooled.inputs.push_back(sensors[i]);
    pooled.outputs.push_back(y);
    states.push_back(fuse_measurement(GpState::zero(basis->rank(), i), *basis, sensors[i], y));
  }

  const CommGraph graph = build_graph(sensors, opt.comm_range);
  ConsensusDemoResult res;
  res.graph_connected = graph.connected();

  const CentralEstimator central(*basis, pooled);
  std::vector<double> central_mean(grid.size()), central_var(grid.size()), truth(grid.size());
  for (int c = 0; c < grid.size(); ++c) {
    const Vec2 x = grid.center(c);
    central_mean[c] = central.mean(x);
    central_var[c] = central.variance(x);
    truth[c] = signal_field(targets, amps, x, opt.env.intensity_scale);
  }

  std::ofstream csv;
  if (opt.out_dir) {
    std::filesystem::create_directories(*opt.out_dir);
    auto emit = [&](const std::string& name, const std::vector<double>& v) {
      const auto p = *opt.out_dir / name;
      write_pgm(p, v, grid.rows, grid.cols);
      res.artifacts.push_back(p);
    };
    emit("truth.pgm", truth);
    emit("central_mean.pgm", central_mean);
    emit("central_var.pgm", central_var);
    csv.open(*opt.out_dir / "consensus.csv");
    if (!csv) throw std::runtime_error("cannot write consensus.csv");
    csv << "round,state_disagreement,mean_disagreement,var_disagreement\n";
    csv.precision(17);
    res.artifacts.push_back(*opt.out_dir / "consensus.csv");
  }

  for (int r = 0;; ++r) {
    const SensorMaps maps = evaluate_all(states, *basis, features, grid.size());
    ConsensusRoundStats st{r, max_state_disagreement(states), spread(maps.mean), spread(maps.var)};
    res.rounds.push_back(st);
    if (csv.is_open())
      csv << r << "," << st.state_disagreement << "," << st.mean_disagreement << ","
          << st.var_disagreement << "\n";
    if (opt.out_dir && (r % opt.pgm_every == 0 || r == opt.rounds)) {
      const auto pm = *opt.out_dir / ("sensor_mean_r" + round_tag(r) + ".pgm");
      const auto pv = *opt.out_dir / ("sensor_var_r" + round_tag(r) + ".pgm");
      write_pgm(pm, maps.mean[opt.watch_sensor], grid.rows, grid.cols);
      write_pgm(pv, maps.var[opt.watch_sensor], grid.rows, grid.cols);
      res.artifacts.push_back(pm);
      res.artifacts.push_back(pv);
    }
    if (r == opt.rounds) {
      for (int i = 0; i < n_sensors; ++i) {
        for (int c = 0; c < grid.size(); ++c) {
          res.final_vs_central_mean =
              std::max(res.final_vs_central_mean, std::abs(maps.mean[i][c] - central_mean[c]));
          res.final_vs_central_var =
              std::max(res.final_vs_central_var, std::abs(maps.var[i][c] - central_var[c]));
        }
      }
      break;
    }
    states = consensus_round(states, graph);
  }
  if (csv.is_open() && !csv) throw std::runtime_error("write failed: consensus.csv");
  return res;
}

}  // namespace gpswarm
