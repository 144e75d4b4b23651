#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "gpswarm/kernel_basis.hpp"
#include "gpswarm/swarm_env.hpp"

using namespace gpswarm;

namespace {

const BasisSet& default_basis() { return *make_basis(EnvConfig{}); }

std::vector<std::pair<Vec2, Vec2>> random_pairs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::pair<Vec2, Vec2>> out;
  for (int i = 0; i < n; ++i) out.push_back({Vec2(u(rng), u(rng)), Vec2(u(rng), u(rng))});
  return out;
}

double mean_abs_reconstruction_error(const BasisSet& b, const std::vector<std::pair<Vec2, Vec2>>& pairs) {
  double s = 0.0;
  for (const auto& [a, c] : pairs) s += std::abs(b.reconstruct(a, c) - kernel_eval(b.kernel(), a, c));
  return s / static_cast<double>(pairs.size());
}

}  // namespace

TEST_CASE("kernel_eval hand values") {
  const KernelParams p;
  CHECK(kernel_eval(p, {0.3, 0.3}, {0.3, 0.3}) == 1.0);
  // exp(-0.5 * 0.01 / 0.05) and exp(-0.5 * 2 / 0.05)
  CHECK(kernel_eval(p, {0, 0}, {0.1, 0}) == doctest::Approx(std::exp(-0.1)).epsilon(1e-14));
  CHECK(kernel_eval(p, {0, 0}, {0.1, 0}) == doctest::Approx(0.904837).epsilon(1e-6));
  CHECK(kernel_eval(p, {0, 0}, {1, 1}) == doctest::Approx(std::exp(-20.0)).epsilon(1e-14));
  CHECK(kernel_eval(p, {0.2, -0.4}, {0.7, 0.1}) == kernel_eval(p, {0.7, 0.1}, {0.2, -0.4}));
}

TEST_CASE("kernel params validation") {
  KernelParams p;
  p.signal_variance = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.length_scale = {0.05, 0.0};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.noise_variance = -1e-3;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("default basis: ordering, trace identity, orthonormality") {
  const BasisSet& b = default_basis();
  REQUIRE(b.rank() == 40);
  REQUIRE(b.num_points() == 41 * 41);
  for (int e = 0; e < b.rank(); ++e) CHECK(b.eigenvalues()(e) > 0.0);
  for (int e = 1; e < b.rank(); ++e) CHECK(b.eigenvalues()(e) <= b.eigenvalues()(e - 1));

  // Oracle: trace(K_grid) * dA summed directly from kernel values.
  double trace = 0.0;
  for (const auto& g : b.grid_points()) trace += kernel_eval(b.kernel(), g, g);
  trace *= b.cell_area();
  CHECK(trace == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(std::abs(b.full_spectrum().sum() - trace) < 1e-6);

  const Eigen::MatrixXd phi = b.features(b.grid_points());
  const Eigen::MatrixXd gram = phi.transpose() * phi * b.cell_area();
  CHECK((gram - Eigen::MatrixXd::Identity(b.rank(), b.rank())).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("Nystrom extension is consistent at the grid nodes") {
  const BasisSet& b = default_basis();
  const Eigen::MatrixXd nodal = b.eigenvectors() / std::sqrt(b.cell_area());
  const double scale = nodal.cwiseAbs().maxCoeff();
  for (int j : {0, 17, 420, 840, 1680}) {
    const Eigen::VectorXd f = b.features(b.grid_points()[j]);
    CHECK(f.size() == b.rank());
    CHECK((f - nodal.row(j).transpose()).cwiseAbs().maxCoeff() <= 1e-6 * scale);
  }
}

TEST_CASE("diagonal and pairwise reconstruction stay within the recorded bound") {
  const BasisSet& b = default_basis();
  CHECK(b.truncation_bound() > 0.0);
  CHECK(b.truncation_bound() < 1.0);
  for (const auto& [x1, x2] : random_pairs(500, 3)) {
    const double diag = b.reconstruct(x1, x1);
    CHECK(std::abs(diag - 1.0) <= b.truncation_bound());
    CHECK(std::abs(b.reconstruct(x1, x2) - kernel_eval(b.kernel(), x1, x2)) <= b.truncation_bound());
  }
}

TEST_CASE("reconstruction symmetry is exact and features are deterministic") {
  const BasisSet& b = default_basis();
  for (const auto& [x1, x2] : random_pairs(50, 4)) {
    CHECK(b.reconstruct(x1, x2) == b.reconstruct(x2, x1));
    const Eigen::VectorXd f1 = b.features(x1);
    const Eigen::VectorXd f2 = b.features(x1);
    CHECK(f1 == f2);
  }
}

TEST_CASE("batched features agree with single-point features") {
  const BasisSet& b = default_basis();
  std::vector<Vec2> pts;
  for (const auto& [x1, x2] : random_pairs(20, 5)) pts.push_back(x1);
  const Eigen::MatrixXd batch = b.features(pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK((batch.row(i).transpose() - b.features(pts[i])).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reconstruction error decreases with rank") {
  const BasisSet full = BasisSet::build(KernelParams{}, Rect{}, 41, 80);
  const auto pairs = random_pairs(1000, 11);
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> errs;
  for (int e : {10, 20, 40, 80}) {
    const double err = mean_abs_reconstruction_error(full.truncated(e), pairs);
    errs.push_back(err);
    CHECK(err <= prev);
    prev = err;
  }
  CHECK(errs[2] < errs[0]);
  CHECK(errs[2] < 5e-2);
  MESSAGE("mean abs reconstruction error E=10/20/40/80: " << errs[0] << " " << errs[1] << " "
                                                          << errs[2] << " " << errs[3]);
}

TEST_CASE("all retained eigenpairs reproduce the kernel diagonal") {
  const BasisSet all = BasisSet::build(KernelParams{}, Rect{}, 41, 0);
  CHECK(all.rank() + all.dropped_count() == all.num_points());
  CHECK(all.rank() > 100);
  for (const auto& [x1, x2] : random_pairs(200, 6)) CHECK(std::abs(all.reconstruct(x1, x1) - 1.0) < 1e-4);
}

TEST_CASE("trace identity holds for other kernel parameters") {
  for (const KernelParams& p : {KernelParams{2.0, {0.1, 0.02}, 0.01}, KernelParams{0.5, {0.3, 0.3}, 0.0}}) {
    const Rect ws{{-1.0, -0.5}, {2.0, 1.5}};
    const BasisSet b = BasisSet::build(p, ws, 21, 5);
    CHECK(std::abs(b.full_spectrum().sum() - p.signal_variance * ws.area()) < 1e-6);
  }
}

TEST_CASE("Gram matrix is PSD up to the clamping tolerance") {
  const KernelParams p;
  const auto pts = cell_centers(Rect{}, 15, 15);
  Eigen::MatrixXd k(pts.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) k(i, j) = kernel_eval(p, pts[i], pts[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * eig.eigenvalues().maxCoeff());
}

TEST_CASE("build_basis error paths") {
  CHECK_THROWS_AS(BasisSet::build(KernelParams{}, Rect{}, 1, 1), ConfigError);
  CHECK_THROWS_AS(BasisSet::build(KernelParams{}, Rect{}, 5, 26), ConfigError);
  // A very long length scale leaves only a handful of numerically positive eigenpairs.
  const KernelParams smooth{1.0, {100.0, 100.0}, 0.01};
  CHECK_THROWS_AS(BasisSet::build(smooth, Rect{}, 5, 25), NumericalError);
  const BasisSet reduced = BasisSet::build(smooth, Rect{}, 5, 0);
  CHECK(reduced.rank() < 25);
  CHECK(reduced.dropped_count() == 25 - reduced.rank());
}

TEST_CASE("basis save/load round trip") {
  const BasisSet& b = default_basis();
  const auto path = std::filesystem::temp_directory_path() / "gpswarm_basis_test.bin";
  b.save(path);
  const BasisSet loaded = BasisSet::load(path);
  CHECK(loaded.rank() == b.rank());
  CHECK(loaded.grid_side() == b.grid_side());
  CHECK(loaded.eigenvalues() == b.eigenvalues());
  CHECK(loaded.features(Vec2(0.123, -0.456)) == b.features(Vec2(0.123, -0.456)));
  CHECK(loaded.kernel().noise_variance == b.kernel().noise_variance);

  // Corrupt magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS(BasisSet::load(path));
  std::filesystem::remove(path);
}
