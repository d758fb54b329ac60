#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oar/objective.hpp"
#include "oar/rng.hpp"
#include "support/oracles.hpp"

using namespace oar;

namespace {

Eigen::MatrixXd random_cloud_matrix(Rng& rng, int n, double extent = 1.0) {
  Eigen::MatrixXd m(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) m(i, c) = rng.uniform(-extent, extent);
  return m;
}

std::vector<Vec3> matrix_rows(const Eigen::MatrixXd& m) {
  std::vector<Vec3> pts;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    pts.push_back(m.row(i).transpose());
  return pts;
}

Correspondences brute_force_correspondences(const Eigen::MatrixXd& deformed,
                                            const Eigen::MatrixXd& target) {
  Correspondences corr;
  const auto def_pts = matrix_rows(deformed);
  const auto tgt_pts = matrix_rows(target);
  for (const Vec3& x : tgt_pts)
    corr.target_to_source.push_back(oracles::brute_force_nearest(def_pts, x).index);
  for (const Vec3& d : def_pts)
    corr.source_to_target.push_back(oracles::brute_force_nearest(tgt_pts, d).index);
  return corr;
}

}  // namespace

TEST_CASE("the metric vanishes exactly at coincident points") {
  const KernelConfig kcfg{0.7, KernelConfig::Mode::per_coordinate};
  REQUIRE(mcc_metric({0.3, -1, 2}, {0.3, -1, 2}, kcfg) == 0.0);
  const KernelConfig euc{0.7, KernelConfig::Mode::euclidean};
  REQUIRE(mcc_metric({0.3, -1, 2}, {0.3, -1, 2}, euc) == 0.0);
}

TEST_CASE("the metric matches a hand-computed value") {
  // sqrt(1 - (exp(-1) + 1 + 1) / 3) for a unit offset along x at sigma^2 = 0.5
  const KernelConfig kcfg{0.5, KernelConfig::Mode::per_coordinate};
  const double m = mcc_metric({1, 0, 0}, {0, 0, 0}, kcfg);
  REQUIRE(m == Catch::Approx(0.45902816573077837).epsilon(1e-12));
}

TEST_CASE("the metric saturates toward one at large separations") {
  const KernelConfig kcfg{1.0, KernelConfig::Mode::per_coordinate};
  const double far = mcc_metric({1e6, 0, 0}, {0, 0, 0}, kcfg);
  REQUIRE(far <= 1.0);
  REQUIRE(far > mcc_metric({10, 0, 0}, {0, 0, 0}, kcfg));
  REQUIRE(far > 0.999);
}

TEST_CASE("metric symmetry, nonnegativity, and boundedness on random pairs") {
  Rng rng(31);
  for (int mode = 0; mode < 2; ++mode) {
    const KernelConfig kcfg{rng.uniform(0.3, 2.0),
                            mode == 0 ? KernelConfig::Mode::per_coordinate
                                      : KernelConfig::Mode::euclidean};
    const double sigma = std::sqrt(kcfg.sigma2);
    for (int i = 0; i < 10000; ++i) {
      const Vec3 a(rng.uniform(-2 * sigma, 2 * sigma),
                   rng.uniform(-2 * sigma, 2 * sigma),
                   rng.uniform(-2 * sigma, 2 * sigma));
      const Vec3 b(rng.uniform(-2 * sigma, 2 * sigma),
                   rng.uniform(-2 * sigma, 2 * sigma),
                   rng.uniform(-2 * sigma, 2 * sigma));
      const double m_ab = mcc_metric(a, b, kcfg);
      REQUIRE(m_ab == mcc_metric(b, a, kcfg));
      REQUIRE(m_ab >= 0.0);
      REQUIRE(m_ab < 1.0);
    }
  }
}

TEST_CASE("small residuals reduce the metric to a scaled squared error") {
  // 2 sigma^2 * n * M^2 approaches the squared Euclidean residual.
  Rng rng(32);
  for (int i = 0; i < 10000; ++i) {
    const double sigma2 = rng.uniform(0.25, 4.0);
    const double sigma = std::sqrt(sigma2);
    const KernelConfig kcfg{sigma2, KernelConfig::Mode::per_coordinate};
    const double mag =
        sigma * std::pow(10.0, rng.uniform(-9.0, -3.0));  // up to 1e-3 sigma
    Vec3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    while (dir.norm() < 1e-3)
      dir = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    dir.normalize();
    const Vec3 center(rng.uniform(-1, 1), rng.uniform(-1, 1),
                      rng.uniform(-1, 1));
    const Vec3 a = center;
    const Vec3 b = center - mag * dir;
    const Vec3 d = a - b;  // the residual both sides actually see
    const double lhs = 6.0 * sigma2 * mcc_metric_sq(a, b, kcfg);
    REQUIRE(std::abs(lhs - d.squaredNorm()) <= 1e-6 * d.squaredNorm());
  }
}

TEST_CASE("the induced influence function behaves like a robust kernel") {
  const double sigma2 = 0.8;
  const double sigma = std::sqrt(sigma2);
  REQUIRE(influence_function(0.0, sigma2) == 0.0);
  double prev = 0.0;
  for (double e = 0.0; e <= 10.0 * sigma; e += 1e-3 * sigma) {
    const double rho = influence_function(e, sigma2);
    REQUIRE(rho >= 0.0);
    REQUIRE(rho == influence_function(-e, sigma2));
    REQUIRE(rho >= prev);
    prev = rho;
  }
}

TEST_CASE("correntropy loss vanishes when deformed and target coincide") {
  Rng rng(33);
  const Eigen::MatrixXd pts = random_cloud_matrix(rng, 25);
  REQUIRE(correntropy_loss(pts, pts, KernelConfig{}) == 0.0);
}

TEST_CASE("single-point clouds give twice the metric") {
  const KernelConfig kcfg{0.5, KernelConfig::Mode::per_coordinate};
  Eigen::MatrixXd a(1, 3), b(1, 3);
  a << 1, 0, 0;
  b << 0, 0, 0;
  const double loss = correntropy_loss(a, b, kcfg);
  REQUIRE(loss ==
          Catch::Approx(2.0 * mcc_metric({1, 0, 0}, {0, 0, 0}, kcfg))
              .epsilon(1e-15));
}

TEST_CASE("correntropy loss matches a brute-force correspondence scan") {
  Rng rng(34);
  for (int mode = 0; mode < 2; ++mode) {
    const KernelConfig kcfg{0.9, mode == 0
                                     ? KernelConfig::Mode::per_coordinate
                                     : KernelConfig::Mode::euclidean};
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd deformed = random_cloud_matrix(rng, 20);
      const Eigen::MatrixXd target = random_cloud_matrix(rng, 17);
      const auto corr = brute_force_correspondences(deformed, target);

      double expected = 0.0;
      for (Eigen::Index i = 0; i < target.rows(); ++i)
        expected += mcc_metric(target.row(i).transpose(),
                               deformed.row(corr.target_to_source[i]).transpose(),
                               kcfg) /
                    static_cast<double>(target.rows());
      for (Eigen::Index j = 0; j < deformed.rows(); ++j)
        expected += mcc_metric(deformed.row(j).transpose(),
                               target.row(corr.source_to_target[j]).transpose(),
                               kcfg) /
                    static_cast<double>(deformed.rows());

      REQUIRE(correntropy_loss(deformed, target, kcfg) ==
              Catch::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("chamfer loss fixtures and oracle") {
  Rng rng(35);
  const Eigen::MatrixXd pts = random_cloud_matrix(rng, 12);
  REQUIRE(chamfer_loss(pts, pts) == 0.0);

  Eigen::MatrixXd a(1, 3), b(1, 3);
  a << 0, 0, 0;
  b << 0, 3, 4;  // distance 5
  REQUIRE(chamfer_loss(a, b) == Catch::Approx(2.0 * 25.0).epsilon(1e-15));

  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd deformed = random_cloud_matrix(rng, 15);
    const Eigen::MatrixXd target = random_cloud_matrix(rng, 22);
    const auto corr = brute_force_correspondences(deformed, target);
    double expected = 0.0;
    for (Eigen::Index i = 0; i < target.rows(); ++i)
      expected += (deformed.row(corr.target_to_source[i]) - target.row(i))
                      .squaredNorm() /
                  static_cast<double>(target.rows());
    for (Eigen::Index j = 0; j < deformed.rows(); ++j)
      expected += (deformed.row(j) - target.row(corr.source_to_target[j]))
                      .squaredNorm() /
                  static_cast<double>(deformed.rows());
    REQUIRE(chamfer_loss(deformed, target) ==
            Catch::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("empty clouds are rejected by the data terms") {
  Eigen::MatrixXd pts(2, 3), empty(0, 3);
  pts.setZero();
  Correspondences corr;
  REQUIRE_THROWS_AS(correntropy_loss(pts, empty, corr, KernelConfig{}),
                    EmptyCloudError);
  REQUIRE_THROWS_AS(chamfer_loss(empty, pts, corr), EmptyCloudError);
}

TEST_CASE("a point at the centroid of an equilateral triangle gets uniform weights") {
  std::vector<Vec3> cloud = {{0, 0, 0},
                             {1, 0, 0},
                             {-0.5, std::sqrt(3.0) / 2.0, 0},
                             {-0.5, -std::sqrt(3.0) / 2.0, 0}};
  const LLRWeights w = compute_llr_weights(cloud, 3, 1e-6);
  for (int m = 0; m < 3; ++m)
    REQUIRE(w.weights(0, m) == Catch::Approx(1.0 / 3.0).margin(1e-8));
  REQUIRE(w.weights.row(0).sum() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("the midpoint of two collinear neighbors splits the weight evenly") {
  std::vector<Vec3> cloud = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}};
  const LLRWeights w = compute_llr_weights(cloud, 2, 1e-3);
  REQUIRE(w.weights(0, 0) == Catch::Approx(0.5).margin(1e-10));
  REQUIRE(w.weights(0, 1) == Catch::Approx(0.5).margin(1e-10));
}

TEST_CASE("closed-form weights match the KKT oracle on the same Gram matrix") {
  Rng rng(36);
  const double eps = 1e-6;
  for (const int k : {4, 6, 10}) {
    const Eigen::MatrixXd cloud_mat = random_cloud_matrix(rng, 60);
    const auto cloud = matrix_rows(cloud_mat);
    const LLRWeights w = compute_llr_weights(cloud, k, eps);
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      Eigen::MatrixXd diffs(3, k);
      for (int m = 0; m < k; ++m)
        diffs.col(m) =
            cloud[j] - cloud[static_cast<std::size_t>(w.neighbors(j, m))];
      Eigen::MatrixXd gram = diffs.transpose() * diffs;
      gram.diagonal().array() += eps * gram.trace() / k;
      const Eigen::VectorXd oracle = oracles::kkt_constrained_weights(gram);
      REQUIRE((w.weights.row(j).transpose() - oracle).cwiseAbs().maxCoeff() <=
              1e-8);
      REQUIRE(w.weights.row(j).sum() == Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("unregularized weights work when the Gram matrix is invertible") {
  // Three affinely independent neighbors span a full-rank difference matrix.
  std::vector<Vec3> cloud = {{0, 0, 0},
                             {1, 0.1, -0.2},
                             {-0.3, 1.1, 0.25},
                             {0.2, -0.15, 0.9},
                             {50, 50, 50},
                             {-60, 40, 10}};
  const LLRWeights w = compute_llr_weights(cloud, 3, 0.0);
  Eigen::MatrixXd diffs(3, 3);
  for (int m = 0; m < 3; ++m)
    diffs.col(m) = cloud[0] - cloud[static_cast<std::size_t>(w.neighbors(0, m))];
  const Eigen::VectorXd oracle =
      oracles::kkt_constrained_weights(diffs.transpose() * diffs);
  REQUIRE((w.weights.row(0).transpose() - oracle).cwiseAbs().maxCoeff() <=
          1e-10);
}

TEST_CASE("more than three neighbors without regularization is singular") {
  // Difference Gram matrices have rank at most 3, so k = 4 cannot be solved
  // with eps = 0.
  Rng rng(37);
  const auto cloud = matrix_rows(random_cloud_matrix(rng, 30));
  REQUIRE_THROWS_AS(compute_llr_weights(cloud, 4, 0.0), SingularGramError);
}

TEST_CASE("weights are invariant to translating the whole cloud") {
  Rng rng(38);
  const Eigen::MatrixXd base = random_cloud_matrix(rng, 40);
  const auto cloud = matrix_rows(base);
  auto shifted = cloud;
  for (Vec3& p : shifted) p += Vec3(1.25, -0.5, 3.0);
  const LLRWeights w0 = compute_llr_weights(cloud, 5, 1e-6);
  const LLRWeights w1 = compute_llr_weights(shifted, 5, 1e-6);
  REQUIRE(w0.neighbors == w1.neighbors);
  REQUIRE((w0.weights - w1.weights).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("k bounds are validated") {
  Rng rng(39);
  const auto cloud = matrix_rows(random_cloud_matrix(rng, 10));
  REQUIRE_THROWS_AS(compute_llr_weights(cloud, 10, 1e-6), KTooLargeError);
  REQUIRE_THROWS_AS(compute_llr_weights(cloud, 1, 1e-6), InvalidArgumentError);
}

namespace {

/// Weights that reconstruct a straight-line lattice exactly: interior points
/// average their two neighbors, endpoints extrapolate with weights (2, -1).
LLRWeights exact_line_weights(int n) {
  LLRWeights w;
  w.k = 2;
  w.neighbors.resize(n, 2);
  w.weights.resize(n, 2);
  for (int j = 0; j < n; ++j) {
    if (j == 0) {
      w.neighbors.row(j) << 1, 2;
      w.weights.row(j) << 2.0, -1.0;
    } else if (j == n - 1) {
      w.neighbors.row(j) << n - 2, n - 3;
      w.weights.row(j) << 2.0, -1.0;
    } else {
      w.neighbors.row(j) << j - 1, j + 1;
      w.weights.row(j) << 0.5, 0.5;
    }
  }
  return w;
}

Eigen::MatrixXd line_lattice(int n) {
  Eigen::MatrixXd m(n, 3);
  for (int j = 0; j < n; ++j) m.row(j) = Vec3(j * 0.5, j * 0.25, -j * 0.125);
  return m;
}

}  // namespace

TEST_CASE("exactly reconstructible clouds have zero regularizer") {
  const int n = 9;
  const Eigen::MatrixXd lattice = line_lattice(n);
  const LLRWeights w = exact_line_weights(n);
  REQUIRE(llr_regularizer(lattice, w) == 0.0);
  // A global translation cancels through the affine weights.
  const Eigen::MatrixXd shifted =
      lattice.rowwise() + Eigen::RowVector3d(3.5, -1.0, 0.75);
  REQUIRE(llr_regularizer(shifted, w) == 0.0);
}

TEST_CASE("the regularizer value is translation-invariant for computed weights") {
  Rng rng(40);
  const Eigen::MatrixXd cloud_mat = random_cloud_matrix(rng, 30);
  const LLRWeights w = compute_llr_weights(matrix_rows(cloud_mat), 4, 1e-6);
  const Eigen::MatrixXd deformed =
      cloud_mat + 0.1 * random_cloud_matrix(rng, 30);
  const double base = llr_regularizer(deformed, w);
  const Eigen::MatrixXd shifted =
      deformed.rowwise() + Eigen::RowVector3d(2.0, -4.0, 8.0);
  REQUIRE(llr_regularizer(shifted, w) == Catch::Approx(base).epsilon(1e-9));
}

TEST_CASE("the regularizer matches a direct summation oracle") {
  Rng rng(41);
  const Eigen::MatrixXd cloud_mat = random_cloud_matrix(rng, 10);
  const LLRWeights w = compute_llr_weights(matrix_rows(cloud_mat), 3, 1e-6);
  const Eigen::MatrixXd deformed =
      cloud_mat + 0.25 * random_cloud_matrix(rng, 10);

  double expected = 0.0;
  for (int j = 0; j < 10; ++j) {
    Vec3 recon = Vec3::Zero();
    for (int m = 0; m < 3; ++m)
      recon += w.weights(j, m) *
               deformed.row(w.neighbors(j, m)).transpose();
    expected += (deformed.row(j).transpose() - recon).norm();
  }
  REQUIRE(llr_regularizer(deformed, w) ==
          Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("regularizer rejects weights computed for a different cloud") {
  Rng rng(42);
  const Eigen::MatrixXd cloud_mat = random_cloud_matrix(rng, 12);
  const LLRWeights w = compute_llr_weights(matrix_rows(cloud_mat), 3, 1e-6);
  REQUIRE_THROWS_AS(llr_regularizer(random_cloud_matrix(rng, 11), w),
                    IndexMismatchError);
}

TEST_CASE("matching loss fixtures") {
  Rng rng(43);
  const Eigen::MatrixXd deformed = random_cloud_matrix(rng, 8);
  REQUIRE(matching_loss(deformed, {}) == 0.0);

  std::vector<MatchPair> perfect;
  for (int j = 0; j < 8; ++j)
    perfect.push_back({j, deformed.row(j).transpose()});
  REQUIRE(matching_loss(deformed, perfect) == 0.0);

  const std::vector<MatchPair> one = {
      {2, deformed.row(2).transpose() + Vec3(0, 0, 0.75)}};
  REQUIRE(matching_loss(deformed, one) ==
          Catch::Approx(0.75 * 0.75).epsilon(1e-15));

  const std::vector<MatchPair> bad = {{99, Vec3::Zero()}};
  REQUIRE_THROWS_AS(matching_loss(deformed, bad), IndexMismatchError);
}

TEST_CASE("total loss reduces to the weighted regularizer at the identity") {
  Rng rng(44);
  const Eigen::MatrixXd pts = random_cloud_matrix(rng, 20);
  const LLRWeights w = compute_llr_weights(matrix_rows(pts), 4, 1e-6);
  std::vector<MatchPair> pairs;
  for (int j = 0; j < 5; ++j) pairs.push_back({j, pts.row(j).transpose()});

  const auto corr = find_correspondences(pts, pts);
  const LossCoefficients coeff{1e4, 1e2, 1.0, DataTerm::mcc};
  const auto breakdown =
      total_loss(pts, pts, corr, &w, pairs, coeff, KernelConfig{});
  REQUIRE(breakdown.data == 0.0);
  REQUIRE(breakdown.match == 0.0);
  REQUIRE(breakdown.llr == Catch::Approx(llr_regularizer(pts, w)));
  REQUIRE(breakdown.total == Catch::Approx(1e2 * breakdown.llr));
}

TEST_CASE("beta = 0 drops the matching term from the total") {
  Rng rng(45);
  const Eigen::MatrixXd deformed = random_cloud_matrix(rng, 15);
  const Eigen::MatrixXd target = random_cloud_matrix(rng, 15);
  const auto corr = find_correspondences(deformed, target);
  const std::vector<MatchPair> pairs = {{0, Vec3(9, 9, 9)}};

  const LossCoefficients with_beta{2.0, 0.0, 1.0, DataTerm::mcc};
  const LossCoefficients without_beta{2.0, 0.0, 0.0, DataTerm::mcc};
  const auto a =
      total_loss(deformed, target, corr, nullptr, pairs, with_beta, {});
  const auto b =
      total_loss(deformed, target, corr, nullptr, pairs, without_beta, {});
  REQUIRE(a.total > b.total);
  REQUIRE(b.total == Catch::Approx(2.0 * b.data));
}

namespace {

// Central-difference check of d(loss)/d(deformed) for a generic loss closure.
template <typename LossFn>
void check_point_gradient(const Eigen::MatrixXd& deformed, LossFn&& loss_fn,
                          const Eigen::MatrixXd& analytic, double h = 1e-5) {
  Eigen::MatrixXd pts = deformed;
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (int c = 0; c < 3; ++c) {
      const double saved = pts(i, c);
      pts(i, c) = saved + h;
      const double up = loss_fn(pts);
      pts(i, c) = saved - h;
      const double down = loss_fn(pts);
      pts(i, c) = saved;
      const double numeric = (up - down) / (2.0 * h);
      CAPTURE(i, c, analytic(i, c), numeric);
      REQUIRE(oracles::grad_close(analytic(i, c), numeric, 1e-4, 1e-9));
    }
}

}  // namespace

TEST_CASE("loss gradients with respect to point positions match finite differences") {
  Rng rng(46);
  const Eigen::MatrixXd deformed = random_cloud_matrix(rng, 12);
  const Eigen::MatrixXd target = random_cloud_matrix(rng, 9);
  const auto corr = find_correspondences(deformed, target);
  const LLRWeights w = compute_llr_weights(matrix_rows(deformed), 3, 1e-6);
  const std::vector<MatchPair> pairs = {{1, Vec3(0.4, -0.2, 0.9)},
                                        {7, Vec3(-0.3, 0.6, 0.1)}};

  SECTION("correntropy, per-coordinate kernel") {
    const KernelConfig kcfg{0.6, KernelConfig::Mode::per_coordinate};
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(12, 3);
    correntropy_loss(deformed, target, corr, kcfg, &grad);
    check_point_gradient(deformed,
                         [&](const Eigen::MatrixXd& p) {
                           return correntropy_loss(p, target, corr, kcfg);
                         },
                         grad);
  }
  SECTION("correntropy, euclidean kernel") {
    const KernelConfig kcfg{0.6, KernelConfig::Mode::euclidean};
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(12, 3);
    correntropy_loss(deformed, target, corr, kcfg, &grad);
    check_point_gradient(deformed,
                         [&](const Eigen::MatrixXd& p) {
                           return correntropy_loss(p, target, corr, kcfg);
                         },
                         grad);
  }
  SECTION("chamfer") {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(12, 3);
    chamfer_loss(deformed, target, corr, &grad);
    check_point_gradient(deformed,
                         [&](const Eigen::MatrixXd& p) {
                           return chamfer_loss(p, target, corr);
                         },
                         grad);
  }
  SECTION("locally linear reconstruction") {
    const Eigen::MatrixXd moved = deformed + 0.2 * random_cloud_matrix(rng, 12);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(12, 3);
    llr_regularizer(moved, w, &grad);
    check_point_gradient(
        moved, [&](const Eigen::MatrixXd& p) { return llr_regularizer(p, w); },
        grad);
  }
  SECTION("matching") {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(12, 3);
    matching_loss(deformed, pairs, &grad);
    check_point_gradient(
        deformed,
        [&](const Eigen::MatrixXd& p) { return matching_loss(p, pairs); },
        grad);
  }
  SECTION("weighted total") {
    const KernelConfig kcfg{0.8, KernelConfig::Mode::per_coordinate};
    const LossCoefficients coeff{100.0, 5.0, 2.0, DataTerm::mcc};
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(12, 3);
    total_loss(deformed, target, corr, &w, pairs, coeff, kcfg, &grad);
    check_point_gradient(deformed,
                         [&](const Eigen::MatrixXd& p) {
                           return total_loss(p, target, corr, &w, pairs, coeff,
                                             kcfg)
                               .total;
                         },
                         grad, 1e-6);
  }
}
