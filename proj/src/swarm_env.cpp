#include "gpswarm/swarm_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include "gpswarm/assignment.hpp"

namespace gpswarm {

namespace {

constexpr int kMaxPlacementTries = 10000;

Vec2 clip_norm(const Vec2& v, double limit) {
  const double n = v.norm();
  return n > limit ? Vec2(v * (limit / n)) : v;
}

}  // namespace

double signal_field(std::span<const Vec2> targets, std::span<const double> amplitudes,
                    const Vec2& x, double scale) {
  double s = 0.0;
  for (std::size_t m = 0; m < targets.size(); ++m)
    s += amplitudes[m] * std::exp(-0.5 * (targets[m] - x).squaredNorm() / scale);
  return s;
}

double measure(const WorldState& w, const EnvConfig& cfg, int agent, std::mt19937_64& rng) {
  const double clean = signal_field(w.target_pos, w.amplitudes, w.agent_pos[agent], cfg.intensity_scale);
  if (cfg.sigma_n == 0.0) return clean;
  std::normal_distribution<double> noise(0.0, cfg.sigma_n);
  return clean + noise(rng);
}

std::vector<double> assign_targets(std::span<const Vec2> agents, std::span<const Vec2> targets) {
  const auto n = static_cast<Eigen::Index>(agents.size());
  const auto m = static_cast<Eigen::Index>(targets.size());
  Eigen::MatrixXd dist(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) dist(i, j) = (agents[i] - targets[j]).norm();
  const Assignment a = solve_assignment(dist);
  std::vector<double> d(m, 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int i = a.col_to_row[j];
    d[j] = i >= 0 ? dist(i, j) : (n > 0 ? dist.col(j).minCoeff() : std::numeric_limits<double>::infinity());
  }
  return d;
}

RewardBreakdown compute_reward(const WorldState& w, const EnvConfig& cfg) {
  RewardBreakdown r;
  r.info.target_distances = assign_targets(w.agent_pos, w.target_pos);
  const std::size_t n = w.agent_pos.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j)
      if (disks_overlap(w.agent_pos[i], cfg.agent_radius, w.agent_pos[j], cfg.agent_radius))
        r.info.collision_aa = true;
    for (const auto& o : w.obstacle_pos)
      if (disks_overlap(w.agent_pos[i], cfg.agent_radius, o, cfg.obstacle_radius))
        r.info.collision_ao = true;
  }
  // Geometric mean in log space.
  double log_sum = 0.0;
  for (double d : r.info.target_distances) log_sum += std::log(0.1 + 0.9 * std::exp(-d / cfg.d_char));
  const auto m = r.info.target_distances.size();
  r.r_target = m ? std::exp(log_sum / static_cast<double>(m)) : 1.0;
  r.r_collision = (r.info.collision_aa || r.info.collision_ao) ? 0.0 : 1.0;
  r.reward = r.r_target * r.r_collision;
  return r;
}

WorldState place_entities(const EnvConfig& cfg, std::uint64_t seed) {
  WorldState w;
  w.rng.seed(seed);
  struct Placed {
    Vec2 p;
    double r;
  };
  std::vector<Placed> placed;
  auto sample = [&](double radius) {
    const Rect& ws = cfg.workspace;
    std::uniform_real_distribution<double> ux(ws.lo.x() + radius, ws.hi.x() - radius);
    std::uniform_real_distribution<double> uy(ws.lo.y() + radius, ws.hi.y() - radius);
    for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
      const Vec2 p(ux(w.rng), uy(w.rng));
      const bool clear = std::none_of(placed.begin(), placed.end(), [&](const Placed& q) {
        return disks_overlap(p, radius, q.p, q.r);
      });
      if (clear) {
        placed.push_back({p, radius});
        return p;
      }
    }
    throw PlacementError("could not place entity without overlap after " +
                         std::to_string(kMaxPlacementTries) + " tries");
  };
  for (int i = 0; i < cfg.num_agents; ++i) w.agent_pos.push_back(sample(cfg.agent_radius));
  for (int m = 0; m < cfg.num_targets; ++m) {
    w.target_pos.push_back(sample(cfg.target_radius));
    w.amplitudes.push_back(cfg.amplitude_of(m));
  }
  for (int o = 0; o < cfg.num_obstacles; ++o) w.obstacle_pos.push_back(sample(cfg.obstacle_radius));
  w.agent_vel.assign(cfg.num_agents, Vec2::Zero());
  return w;
}

std::vector<Vec2> apply_dynamics(WorldState& w, const EnvConfig& cfg, std::span<const Vec2> actions) {
  std::vector<Vec2> applied;
  applied.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const Vec2 a = clip_norm(actions[i], cfg.a_max);
    Vec2 v = (1.0 - cfg.damping * cfg.dt) * w.agent_vel[i] + a * cfg.dt;
    v = clip_norm(v, cfg.v_max);
    w.agent_vel[i] = v;
    w.agent_pos[i] = cfg.workspace.clamp(w.agent_pos[i] + v * cfg.dt);
    applied.push_back(a);
  }
  return applied;
}

MapGrid observation_grid(const EnvConfig& cfg) {
  return MapGrid{cfg.workspace, cfg.raster, cfg.raster};
}

void render_entity_channel(const WorldState& w, const EnvConfig& cfg, const MapGrid& grid,
                           int ego, std::span<double> out) {
  std::fill(out.begin(), out.end(), entity_code::kBackground);
  auto disk = [&](const Vec2& p, double radius, double code) {
    // Only visit the bounding box of the disk.
    const int c0 = std::max(0, static_cast<int>(std::floor((p.x() - radius - grid.bounds.lo.x()) / grid.cell_width())));
    const int c1 = std::min(grid.cols - 1, static_cast<int>(std::floor((p.x() + radius - grid.bounds.lo.x()) / grid.cell_width())));
    const int r0 = std::max(0, static_cast<int>(std::floor((p.y() - radius - grid.bounds.lo.y()) / grid.cell_height())));
    const int r1 = std::min(grid.rows - 1, static_cast<int>(std::floor((p.y() + radius - grid.bounds.lo.y()) / grid.cell_height())));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        if ((grid.center(r, c) - p).norm() <= radius) out[static_cast<std::size_t>(r) * grid.cols + c] = code;
  };
  for (const auto& o : w.obstacle_pos) disk(o, cfg.obstacle_radius, entity_code::kObstacle);
  for (int i = 0; i < static_cast<int>(w.agent_pos.size()); ++i)
    if (i != ego) disk(w.agent_pos[i], cfg.agent_radius, entity_code::kOtherAgent);
  disk(w.agent_pos[ego], cfg.agent_radius, entity_code::kEgo);
}

Observation rasterize_observation(const WorldState& w, const EnvConfig& cfg, const MapGrid& grid,
                                  int agent, const FieldFn& gp_mean, const FieldFn& gp_std) {
  Observation obs(grid.rows, grid.cols);
  auto mean = obs.channel(0);
  auto sd = obs.channel(1);
  for (int i = 0; i < grid.size(); ++i) {
    const Vec2 x = grid.center(i);
    mean[i] = gp_mean(x);
    sd[i] = std::clamp(gp_std(x), 0.0, 1.0);
  }
  render_entity_channel(w, cfg, grid, agent, obs.channel(2));
  obs.velocity = w.agent_vel[agent];
  return obs;
}

Metrics episode_metrics(const EpisodeTrace& trace) {
  if (trace.steps.empty()) throw std::invalid_argument("episode trace is empty");
  Metrics m;
  for (const auto& s : trace.steps) {
    m.r_avg += s.reward;
    m.cr_aa += s.info.collision_aa ? 1.0 : 0.0;
    m.cr_ao += s.info.collision_ao ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(trace.steps.size());
  m.r_avg /= n;
  m.cr_aa /= n;
  m.cr_ao /= n;
  const auto& last = trace.steps.back().info.target_distances;
  for (double d : last) m.d_final += d;
  if (!last.empty()) m.d_final /= static_cast<double>(last.size());
  return m;
}

SwarmEnv::SwarmEnv(EnvConfig cfg, std::shared_ptr<const BasisSet> basis)
    : cfg_(std::move(cfg)), basis_(std::move(basis)), grid_(observation_grid(cfg_)) {
  cfg_.validate();
  if (!basis_) throw std::invalid_argument("SwarmEnv needs a basis");
  grid_features_ = GridFeatures::compute(*basis_, grid_);
}

std::vector<Observation> SwarmEnv::reset(std::uint64_t seed) {
  world_ = place_entities(cfg_, seed);
  states_.clear();
  for (int i = 0; i < cfg_.num_agents; ++i) states_.push_back(GpState::zero(basis_->rank(), i));
  trace_ = {};
  started_ = true;
  render_observations();
  return obs_;
}

void SwarmEnv::render_observations() {
  obs_.clear();
  for (int i = 0; i < cfg_.num_agents; ++i) {
    Observation o(grid_.rows, grid_.cols);
    const GpMap map(states_[i], *basis_, cfg_.num_agents);
    evaluate_map(map, grid_features_, o.channel(0), o.channel(1));
    render_entity_channel(world_, cfg_, grid_, i, o.channel(2));
    o.velocity = world_.agent_vel[i];
    obs_.push_back(std::move(o));
  }
}

StepResult SwarmEnv::step(std::span<const Vec2> actions) {
  if (!started_) throw std::logic_error("step before reset");
  if (done()) throw EpisodeDone("episode finished; reset required");
  if (static_cast<int>(actions.size()) != cfg_.num_agents)
    throw std::invalid_argument("expected " + std::to_string(cfg_.num_agents) + " actions, got " +
                                std::to_string(actions.size()));
  for (const auto& a : actions)
    if (!a.allFinite()) throw std::invalid_argument("non-finite action");

  apply_dynamics(world_, cfg_, actions);
  for (int i = 0; i < cfg_.num_agents; ++i) {
    const double y = measure(world_, cfg_, i, world_.rng);
    fuse_measurement(states_[i], basis_->features(world_.agent_pos[i]), y);
  }
  const CommGraph g = build_graph(world_.agent_pos, cfg_.d_comm);
  for (int r = 0; r < cfg_.consensus_rounds; ++r) states_ = consensus_round(states_, g);

  ++world_.step;
  render_observations();
  const RewardBreakdown rb = compute_reward(world_, cfg_);

  StepResult out;
  out.observations = obs_;
  out.reward = rb.reward;
  out.info = rb.info;
  out.done = done();
  trace_.steps.push_back({world_.step, rb.reward, rb.info, world_.agent_pos, world_.agent_vel});
  return out;
}

std::shared_ptr<const BasisSet> make_basis(const EnvConfig& cfg) {
  using Key = std::tuple<double, double, double, double, double, double, double, double, int, int>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const BasisSet>> cache;
  const KernelParams k = cfg.kernel_params();
  const Key key{k.signal_variance, k.length_scale.x(), k.length_scale.y(), k.noise_variance,
                cfg.workspace.lo.x(), cfg.workspace.lo.y(), cfg.workspace.hi.x(),
                cfg.workspace.hi.y(), cfg.basis_grid, cfg.basis_rank};
  std::lock_guard lock(mu);
  auto& slot = cache[key];
  if (!slot)
    slot = std::make_shared<const BasisSet>(
        BasisSet::build(k, cfg.workspace, cfg.basis_grid, cfg.basis_rank));
  return slot;
}

}  // namespace gpswarm
