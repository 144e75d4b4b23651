#include "gpswarm/dgp_consensus.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gpswarm/binary_io.hpp"

namespace gpswarm {

namespace {

constexpr char kStateMagic[5] = "GPST";
constexpr std::uint32_t kStateVersion = 1;

void check_dims(const std::vector<GpState>& states, const CommGraph& g) {
  if (static_cast<int>(states.size()) != g.n)
    throw std::invalid_argument("state count does not match graph size");
  for (const auto& s : states) {
    if (s.rank() != states.front().rank() || s.alpha.rows() != s.rank() ||
        s.alpha.cols() != s.rank())
      throw std::invalid_argument("mismatched GP state dimensions");
  }
}

GpState mix_agent(const std::vector<GpState>& states, const CommGraph& g, int i) {
  GpState out = states[i];
  for (int j : g.neighbors[i]) {
    const double wij = g.metropolis_weight(i, j);
    out.alpha += wij * (states[j].alpha - states[i].alpha);
    out.beta += wij * (states[j].beta - states[i].beta);
  }
  return out;
}

}  // namespace

GpState GpState::zero(int rank, int agent_id) {
  return GpState{Eigen::MatrixXd::Zero(rank, rank), Eigen::VectorXd::Zero(rank), 0, agent_id};
}

void GpState::save(const std::filesystem::path& path) const {
  binio::Writer wr(path, kStateMagic, kStateVersion);
  wr.put(static_cast<std::uint32_t>(rank()));
  wr.put(static_cast<std::int32_t>(agent_id));
  wr.put(w);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = alpha;
  wr.put_doubles(rows.data(), rows.size());
  wr.put_doubles(beta.data(), beta.size());
  wr.finish();
}

GpState GpState::load(const std::filesystem::path& path) {
  binio::Reader rd(path, kStateMagic, kStateVersion);
  const auto rank = static_cast<int>(rd.get<std::uint32_t>());
  GpState s = zero(rank, rd.get<std::int32_t>());
  s.w = rd.get<std::uint64_t>();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(rank, rank);
  rd.get_doubles(rows.data(), rows.size());
  s.alpha = rows;
  rd.get_doubles(s.beta.data(), rank);
  return s;
}

void fuse_measurement(GpState& s, const Eigen::VectorXd& phi, double y) {
  const double w = static_cast<double>(s.w);
  const double keep = w / (w + 1.0);
  const double add = 1.0 / (w + 1.0);
  s.alpha = keep * s.alpha + add * (phi * phi.transpose());
  s.beta = keep * s.beta + (add * y) * phi;
  ++s.w;
}

GpState fuse_measurement(const GpState& s, const BasisSet& basis, const Vec2& x, double y) {
  GpState out = s;
  fuse_measurement(out, basis.features(x), y);
  return out;
}

bool CommGraph::connected() const {
  if (n <= 1) return true;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j : neighbors[i]) {
      if (!seen[j]) {
        seen[j] = 1;
        ++count;
        stack.push_back(j);
      }
    }
  }
  return count == n;
}

CommGraph graph_from_edges(int n, std::span<const std::pair<int, int>> edges) {
  CommGraph g;
  g.n = n;
  g.neighbors.assign(n, {});
  for (auto [a, b] : edges) {
    if (a == b || a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("bad edge");
    const auto e = std::minmax(a, b);
    if (std::find(g.edges.begin(), g.edges.end(), std::pair{e.first, e.second}) != g.edges.end())
      continue;
    g.edges.emplace_back(e.first, e.second);
    g.neighbors[a].push_back(b);
    g.neighbors[b].push_back(a);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  return g;
}

CommGraph build_graph(std::span<const Vec2> positions, double d_comm) {
  const int n = static_cast<int>(positions.size());
  if (n < 1) throw std::invalid_argument("graph needs at least one agent");
  CommGraph g;
  g.n = n;
  g.neighbors.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((positions[i] - positions[j]).norm() < d_comm) {
        g.edges.emplace_back(i, j);
        g.neighbors[i].push_back(j);
        g.neighbors[j].push_back(i);
      }
    }
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  return g;
}

std::vector<GpState> consensus_round(const std::vector<GpState>& states, const CommGraph& g) {
  check_dims(states, g);
  std::vector<GpState> next(states.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < g.n; ++i) next[i] = mix_agent(states, g, i);
  return next;
}

std::vector<GpState> consensus_round_serial(const std::vector<GpState>& states,
                                            const CommGraph& g) {
  check_dims(states, g);
  std::vector<GpState> next;
  next.reserve(states.size());
  for (int i = 0; i < g.n; ++i) next.push_back(mix_agent(states, g, i));
  return next;
}

double max_state_disagreement(std::span<const GpState> states) {
  if (states.size() < 2) return 0.0;
  const int e = states.front().rank();
  Eigen::MatrixXd amax = states.front().alpha, amin = amax;
  Eigen::VectorXd bmax = states.front().beta, bmin = bmax;
  for (const auto& s : states.subspan(1)) {
    if (s.rank() != e) throw std::invalid_argument("mismatched GP state dimensions");
    amax = amax.cwiseMax(s.alpha);
    amin = amin.cwiseMin(s.alpha);
    bmax = bmax.cwiseMax(s.beta);
    bmin = bmin.cwiseMin(s.beta);
  }
  return std::max((amax - amin).maxCoeff(), (bmax - bmin).maxCoeff());
}

GpMap::GpMap(const GpState& s, const BasisSet& basis, int total_agents) : basis_(&basis) {
  if (s.rank() != basis.rank()) throw std::invalid_argument("state rank does not match basis");
  if (total_agents < 1) throw std::invalid_argument("total agent count must be positive");
  if (s.w == 0) return;
  prior_ = false;
  const double wn = static_cast<double>(s.w) * total_agents;
  Eigen::MatrixXd inner = s.alpha;
  inner.diagonal() += (basis.kernel().noise_variance / wn) * basis.eigenvalues().cwiseInverse();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(inner);
  if (ldlt.info() != Eigen::Success) throw NumericalError("GP state inner matrix is singular");
  mean_weights_ = ldlt.solve(s.beta);
  var_operator_ = ldlt.solve(s.alpha * basis.eigenvalues().asDiagonal());
}

double GpMap::mean_from_features(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
  return prior_ ? 0.0 : phi.dot(mean_weights_);
}

double GpMap::variance_from_features(const Eigen::Ref<const Eigen::VectorXd>& phi,
                                     double prior) const {
  if (prior_) return prior;
  return std::clamp(prior - phi.dot(var_operator_ * phi), 0.0, prior);
}

double GpMap::mean(const Vec2& x) const {
  if (prior_) return 0.0;
  return mean_from_features(basis_->features(x));
}

double GpMap::variance(const Vec2& x) const {
  const double prior = kernel_eval(basis_->kernel(), x, x);
  if (prior_) return prior;
  return variance_from_features(basis_->features(x), prior);
}

double dist_mean(const GpState& s, const BasisSet& basis, int total_agents, const Vec2& x) {
  return GpMap(s, basis, total_agents).mean(x);
}

double dist_var(const GpState& s, const BasisSet& basis, int total_agents, const Vec2& x) {
  return GpMap(s, basis, total_agents).variance(x);
}

}  // namespace gpswarm
