#include "gpswarm/controllers.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "gpswarm/assignment.hpp"

namespace gpswarm {

namespace {

Vec2 clip_norm(const Vec2& v, double limit) {
  const double n = v.norm();
  return n > limit ? Vec2(v * (limit / n)) : v;
}

// Centroids of 8-connected blobs whose cells equal `code`.
std::vector<Vec2> blobs(std::span<const double> ch, const MapGrid& grid, double code) {
  std::vector<Vec2> out;
  std::vector<char> seen(ch.size(), 0);
  std::vector<int> stack;
  for (int start = 0; start < grid.size(); ++start) {
    if (seen[start] || ch[start] != code) continue;
    Vec2 sum = Vec2::Zero();
    int count = 0;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int cell = stack.back();
      stack.pop_back();
      sum += grid.center(cell);
      ++count;
      const int r = cell / grid.cols, c = cell % grid.cols;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= grid.rows || cc >= grid.cols) continue;
          const int n = rr * grid.cols + cc;
          if (!seen[n] && ch[n] == code) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
      }
    }
    out.push_back(sum / count);
  }
  return out;
}

}  // namespace

Vec2 random_act(std::mt19937_64& rng, double a_max) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = a_max * std::sqrt(u(rng));
  const double theta = 2.0 * std::numbers::pi * u(rng);
  return {r * std::cos(theta), r * std::sin(theta)};
}

void HeuristicConfig::validate() const {
  if (!(peak_threshold >= 0.0 && ucb_weight >= 0.0 && k_p >= 0.0 && k_d >= 0.0 &&
        repulsion_gain >= 0.0 && repulsion_radius >= 0.0))
    throw ConfigError("heuristic gains must be non-negative");
}

HeuristicConfig HeuristicConfig::from_key_values(const KeyValues& kv) {
  using detail::parse_double;
  HeuristicConfig h;
  h.peak_threshold = parse_double(kv, "heuristic_peak_threshold", h.peak_threshold);
  h.ucb_weight = parse_double(kv, "heuristic_ucb_weight", h.ucb_weight);
  h.k_p = parse_double(kv, "heuristic_k_p", h.k_p);
  h.k_d = parse_double(kv, "heuristic_k_d", h.k_d);
  h.repulsion_gain = parse_double(kv, "heuristic_repulsion_gain", h.repulsion_gain);
  h.repulsion_radius = parse_double(kv, "heuristic_repulsion_radius", h.repulsion_radius);
  h.validate();
  return h;
}

std::vector<Peak> detect_peaks(const Observation& obs, const MapGrid& grid, double threshold) {
  const auto mean = obs.channel(0);
  std::vector<Peak> peaks;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const int i = r * grid.cols + c;
      const double v = mean[i];
      if (!(v > threshold)) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= grid.rows || cc >= grid.cols) continue;
          const int n = rr * grid.cols + cc;
          // Equal neighbours with a lower index win the tie.
          if (mean[n] > v || (mean[n] == v && n < i)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({grid.center(i), v, i});
    }
  }
  return peaks;
}

EntityEstimate extract_entities(const Observation& obs, const MapGrid& grid) {
  const auto ch = obs.channel(2);
  EntityEstimate e;
  const auto ego = blobs(ch, grid, entity_code::kEgo);
  if (!ego.empty()) {
    e.ego_visible = true;
    e.ego = ego.front();
  }
  e.other_agents = blobs(ch, grid, entity_code::kOtherAgent);
  e.obstacles = blobs(ch, grid, entity_code::kObstacle);
  return e;
}

int exploration_cell(const Observation& obs, double ucb_weight) {
  const auto mean = obs.channel(0);
  const auto sd = obs.channel(1);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double s = mean[i] + ucb_weight * sd[i];
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Vec2 heuristic_act(const Observation& obs, std::span<const Peak> peaks, const MapGrid& grid,
                   const HeuristicConfig& hc, double a_max, int /*agent_id*/) {
  const EntityEstimate ent = extract_entities(obs, grid);
  if (!ent.ego_visible) return Vec2::Zero();

  Vec2 waypoint = grid.center(exploration_cell(obs, hc.ucb_weight));
  if (!peaks.empty()) {
    const auto n_agents = static_cast<Eigen::Index>(1 + ent.other_agents.size());
    Eigen::MatrixXd cost(n_agents, static_cast<Eigen::Index>(peaks.size()));
    for (Eigen::Index a = 0; a < n_agents; ++a) {
      const Vec2& p = a == 0 ? ent.ego : ent.other_agents[a - 1];
      for (std::size_t k = 0; k < peaks.size(); ++k) cost(a, k) = (p - peaks[k].position).norm();
    }
    const Assignment asg = solve_assignment(cost);
    if (asg.row_to_col[0] >= 0) waypoint = peaks[asg.row_to_col[0]].position;
  }

  Vec2 a = hc.k_p * (waypoint - ent.ego) - hc.k_d * obs.velocity;
  auto repel = [&](const Vec2& from) {
    const Vec2 d = ent.ego - from;
    const double dist = d.norm();
    if (dist > 0.0 && dist < hc.repulsion_radius)
      a += hc.repulsion_gain * (hc.repulsion_radius - dist) / hc.repulsion_radius * (d / dist);
  };
  for (const auto& o : ent.obstacles) repel(o);
  for (const auto& o : ent.other_agents) repel(o);
  return clip_norm(a, a_max);
}

Vec2 HeuristicPolicy::act(const Observation& obs, int agent_id) {
  const auto peaks = detect_peaks(obs, grid_, hc_.peak_threshold);
  return heuristic_act(obs, peaks, grid_, hc_, a_max_, agent_id);
}

EpisodeTrace run_episode(SwarmEnv& env, Policy& policy, std::uint64_t seed) {
  policy.reset(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Observation> obs = env.reset(seed);
  std::vector<Vec2> actions(obs.size());
  while (!env.done()) {
    for (std::size_t i = 0; i < obs.size(); ++i) actions[i] = policy.act(obs[i], static_cast<int>(i));
    obs = env.step(actions).observations;
  }
  return env.trace();
}

Metrics evaluate_policy(SwarmEnv& env, Policy& policy, std::uint64_t master_seed, int episodes) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  Metrics sum;
  for (int e = 0; e < episodes; ++e) {
    const Metrics m = episode_metrics(run_episode(env, policy, master_seed + e));
    sum.r_avg += m.r_avg;
    sum.d_final += m.d_final;
    sum.cr_aa += m.cr_aa;
    sum.cr_ao += m.cr_ao;
  }
  const double n = episodes;
  return {sum.r_avg / n, sum.d_final / n, sum.cr_aa / n, sum.cr_ao / n};
}

std::unique_ptr<Policy> make_policy(const std::string& name, const EnvConfig& cfg,
                                    const HeuristicConfig& hc) {
  if (name == "random") return std::make_unique<RandomPolicy>(cfg.a_max);
  if (name == "heuristic") return std::make_unique<HeuristicPolicy>(hc, observation_grid(cfg), cfg.a_max);
  throw ConfigError("unknown policy '" + name + "' (expected random or heuristic)");
}

}  // namespace gpswarm
