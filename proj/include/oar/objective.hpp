// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Loss terms for the registration objective: the correntropy-induced metric,
// the bidirectional correntropy data term, a Chamfer baseline, closed-form
// locally-linear-reconstruction weights with the matching regularizer, and a
// pointwise matching loss for externally supplied correspondences.

#ifndef OAR_OBJECTIVE_HPP
#define OAR_OBJECTIVE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "oar/errors.hpp"
#include "oar/kdtree.hpp"
#include "oar/point_cloud.hpp"

namespace oar {

struct KernelConfig {
  enum class Mode { per_coordinate, euclidean };
  double sigma2 = 1.0;  // Gaussian kernel bandwidth sigma^2
  Mode mode = Mode::per_coordinate;
};

namespace detail {

// 1 - exp(-t) without cancellation for small t.
inline double one_minus_gauss(double t) { return -std::expm1(-t); }

}  // namespace detail

/// Squared correntropy-induced metric between two 3D points.
/// per_coordinate: M^2 = (1/3) sum_j (1 - exp(-(a_j-b_j)^2 / 2 sigma^2));
/// euclidean:      M^2 = 1 - exp(-|a-b|^2 / 2 sigma^2).
inline double mcc_metric_sq(const Vec3& a, const Vec3& b,
                            const KernelConfig& kcfg) {
  const double inv2s2 = 1.0 / (2.0 * kcfg.sigma2);
  if (kcfg.mode == KernelConfig::Mode::euclidean)
    return detail::one_minus_gauss(squared_distance(a, b) * inv2s2);
  double acc = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double d = a[j] - b[j];
    acc += detail::one_minus_gauss(d * d * inv2s2);
  }
  return acc / 3.0;
}

/// Correntropy-induced metric; zero iff a == b, bounded by 1.
inline double mcc_metric(const Vec3& a, const Vec3& b,
                         const KernelConfig& kcfg) {
  if (!(kcfg.sigma2 > 0.0))
    throw InvalidArgumentError("kernel bandwidth sigma2 must be positive");
  return std::sqrt(mcc_metric_sq(a, b, kcfg));
}

namespace detail {

// Metric value plus gradient with respect to the first argument; the
// gradient with respect to the second argument is its negation. The
// subgradient at a == b is zero.
inline double mcc_metric_with_grad(const Vec3& a, const Vec3& b,
                                   const KernelConfig& kcfg, Vec3& grad_a) {
  const double inv2s2 = 1.0 / (2.0 * kcfg.sigma2);
  const double m = std::sqrt(mcc_metric_sq(a, b, kcfg));
  if (m == 0.0) {
    grad_a.setZero();
    return m;
  }
  const double scale = 1.0 / (2.0 * m * kcfg.sigma2);
  if (kcfg.mode == KernelConfig::Mode::euclidean) {
    const double kernel = std::exp(-squared_distance(a, b) * inv2s2);
    grad_a = (kernel * scale) * (a - b);
  } else {
    for (int j = 0; j < 3; ++j) {
      const double d = a[j] - b[j];
      grad_a[j] = std::exp(-d * d * inv2s2) * d * scale / 3.0;
    }
  }
  return m;
}

}  // namespace detail

/// Robust influence function induced by the Gaussian kernel,
/// rho(e) = (1 - exp(-e^2 / 2 sigma^2)) / (sqrt(2 pi) sigma): non-negative,
/// even, zero at the origin, and non-decreasing in |e|.
inline double influence_function(double e, double sigma2) {
  const double sigma = std::sqrt(sigma2);
  return detail::one_minus_gauss(e * e / (2.0 * sigma2)) /
         (std::sqrt(2.0 * M_PI) * sigma);
}

/// Nearest-neighbor assignments between a deformed source and a target,
/// held fixed while gradients are taken.
struct Correspondences {
  std::vector<int> target_to_source;  // per target point: nearest deformed index
  std::vector<int> source_to_target;  // per deformed point: nearest target index
};

inline Correspondences find_correspondences(const Eigen::MatrixXd& deformed,
                                            const Eigen::MatrixXd& target,
                                            const KdTree& target_tree) {
  Correspondences corr;
  const KdTree deformed_tree(deformed);
  corr.target_to_source.resize(static_cast<std::size_t>(target.rows()));
  for (Eigen::Index i = 0; i < target.rows(); ++i)
    corr.target_to_source[static_cast<std::size_t>(i)] =
        deformed_tree.nearest(target.row(i).transpose()).index;
  corr.source_to_target.resize(static_cast<std::size_t>(deformed.rows()));
  for (Eigen::Index j = 0; j < deformed.rows(); ++j)
    corr.source_to_target[static_cast<std::size_t>(j)] =
        target_tree.nearest(deformed.row(j).transpose()).index;
  return corr;
}

inline Correspondences find_correspondences(const Eigen::MatrixXd& deformed,
                                            const Eigen::MatrixXd& target) {
  return find_correspondences(deformed, target, KdTree(target));
}

/// Bidirectional correntropy data term: the mean metric from each target
/// point to its nearest deformed point plus the mean metric from each
/// deformed point to its nearest target point. When `grad_deformed` is given,
/// the gradient with respect to the deformed points is accumulated into it
/// with the correspondence indices treated as constants.
inline double correntropy_loss(const Eigen::MatrixXd& deformed,
                               const Eigen::MatrixXd& target,
                               const Correspondences& corr,
                               const KernelConfig& kcfg,
                               Eigen::MatrixXd* grad_deformed = nullptr) {
  if (deformed.rows() == 0 || target.rows() == 0) throw EmptyCloudError();
  const double inv_m = 1.0 / static_cast<double>(target.rows());
  const double inv_n = 1.0 / static_cast<double>(deformed.rows());
  double loss = 0.0;
  Vec3 g;
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    const int j = corr.target_to_source[static_cast<std::size_t>(i)];
    const Vec3 x = target.row(i).transpose();
    const Vec3 d = deformed.row(j).transpose();
    loss += inv_m * detail::mcc_metric_with_grad(x, d, kcfg, g);
    if (grad_deformed) grad_deformed->row(j) -= inv_m * g.transpose();
  }
  for (Eigen::Index j = 0; j < deformed.rows(); ++j) {
    const int i = corr.source_to_target[static_cast<std::size_t>(j)];
    const Vec3 d = deformed.row(j).transpose();
    const Vec3 x = target.row(i).transpose();
    loss += inv_n * detail::mcc_metric_with_grad(d, x, kcfg, g);
    if (grad_deformed) grad_deformed->row(j) += inv_n * g.transpose();
  }
  return loss;
}

inline double correntropy_loss(const Eigen::MatrixXd& deformed,
                               const Eigen::MatrixXd& target,
                               const KernelConfig& kcfg,
                               Eigen::MatrixXd* grad_deformed = nullptr) {
  return correntropy_loss(deformed, target,
                          find_correspondences(deformed, target), kcfg,
                          grad_deformed);
}

/// Chamfer baseline: bidirectional mean of squared nearest-neighbor
/// distances, same correspondence convention as the correntropy term.
inline double chamfer_loss(const Eigen::MatrixXd& deformed,
                           const Eigen::MatrixXd& target,
                           const Correspondences& corr,
                           Eigen::MatrixXd* grad_deformed = nullptr) {
  if (deformed.rows() == 0 || target.rows() == 0) throw EmptyCloudError();
  const double inv_m = 1.0 / static_cast<double>(target.rows());
  const double inv_n = 1.0 / static_cast<double>(deformed.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    const int j = corr.target_to_source[static_cast<std::size_t>(i)];
    const Eigen::RowVector3d diff = deformed.row(j) - target.row(i);
    loss += inv_m * diff.squaredNorm();
    if (grad_deformed) grad_deformed->row(j) += 2.0 * inv_m * diff;
  }
  for (Eigen::Index j = 0; j < deformed.rows(); ++j) {
    const int i = corr.source_to_target[static_cast<std::size_t>(j)];
    const Eigen::RowVector3d diff = deformed.row(j) - target.row(i);
    loss += inv_n * diff.squaredNorm();
    if (grad_deformed) grad_deformed->row(j) += 2.0 * inv_n * diff;
  }
  return loss;
}

inline double chamfer_loss(const Eigen::MatrixXd& deformed,
                           const Eigen::MatrixXd& target,
                           Eigen::MatrixXd* grad_deformed = nullptr) {
  return chamfer_loss(deformed, target,
                      find_correspondences(deformed, target), grad_deformed);
}

/// Fixed neighborhood structure of the source: per point, k neighbor indices
/// and an affine-combination weight vector summing to one.
struct LLRWeights {
  int k = 0;
  double eps = 0.0;
  Eigen::MatrixXi neighbors;  // N x k
  Eigen::MatrixXd weights;    // N x k
};

/// Closed-form reconstruction weights: for each point, the k nearest
/// neighbors (self excluded) define a Gram matrix of difference vectors
/// G = D^T D; the weights solve G w proportional to 1 with sum(w) = 1.
/// G is regularized by eps * trace(G)/k on the diagonal (eps alone when the
/// trace vanishes); with eps = 0 a singular G raises SingularGramError.
inline LLRWeights compute_llr_weights(const std::vector<Vec3>& source, int k,
                                      double eps = 1e-6) {
  if (k < 2) throw InvalidArgumentError("LLR requires k >= 2 neighbors");
  if (eps < 0.0) throw InvalidArgumentError("eps must be non-negative");
  if (static_cast<std::size_t>(k) >= source.size())
    throw KTooLargeError(k, source.empty() ? 0 : source.size() - 1);

  const KdTree tree(source);
  LLRWeights out;
  out.k = k;
  out.eps = eps;
  const auto n = static_cast<Eigen::Index>(source.size());
  out.neighbors.resize(n, k);
  out.weights.resize(n, k);

  Eigen::MatrixXd diffs(3, k);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto neighbors =
        tree.knn(source[static_cast<std::size_t>(j)], k, static_cast<int>(j));
    for (int m = 0; m < k; ++m) {
      out.neighbors(j, m) = neighbors[static_cast<std::size_t>(m)].index;
      diffs.col(m) =
          source[static_cast<std::size_t>(j)] -
          source[static_cast<std::size_t>(neighbors[static_cast<std::size_t>(m)].index)];
    }
    Eigen::MatrixXd gram = diffs.transpose() * diffs;
    if (eps > 0.0) {
      const double trace = gram.trace();
      if (trace > 0.0)
        gram.diagonal().array() += eps * trace / static_cast<double>(k);
      else
        gram = eps * Eigen::MatrixXd::Identity(k, k);
    }
    Eigen::VectorXd w;
    if (eps == 0.0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (!lu.isInvertible())
        throw SingularGramError(static_cast<std::size_t>(j));
      w = lu.solve(ones);
    } else {
      w = gram.ldlt().solve(ones);
    }
    out.weights.row(j) = (w / w.sum()).transpose();
  }
  return out;
}

inline LLRWeights compute_llr_weights(const PointCloud& source, int k,
                                      double eps = 1e-6) {
  return compute_llr_weights(source.points, k, eps);
}

/// Sum over points of the Euclidean norm of the reconstruction residual
/// T(y_j) - sum_m w_jm T(z_jm) evaluated on the deformed positions. The
/// subgradient of a zero-norm residual is taken as zero.
inline double llr_regularizer(const Eigen::MatrixXd& deformed,
                              const LLRWeights& weights,
                              Eigen::MatrixXd* grad_deformed = nullptr) {
  if (weights.neighbors.rows() != deformed.rows())
    throw IndexMismatchError("LLR weights were computed for a different cloud");
  double total = 0.0;
  for (Eigen::Index j = 0; j < deformed.rows(); ++j) {
    Eigen::RowVector3d recon = Eigen::RowVector3d::Zero();
    for (int m = 0; m < weights.k; ++m) {
      const int idx = weights.neighbors(j, m);
      if (idx < 0 || idx >= deformed.rows())
        throw IndexMismatchError("neighbor index out of range");
      recon += weights.weights(j, m) * deformed.row(idx);
    }
    const Eigen::RowVector3d residual = deformed.row(j) - recon;
    const double norm = residual.norm();
    total += norm;
    if (grad_deformed && norm > 0.0) {
      const Eigen::RowVector3d unit = residual / norm;
      grad_deformed->row(j) += unit;
      for (int m = 0; m < weights.k; ++m)
        grad_deformed->row(weights.neighbors(j, m)) -=
            weights.weights(j, m) * unit;
    }
  }
  return total;
}

/// A resolved external correspondence: deformed[source_index] should land on
/// target_point.
struct MatchPair {
  int source_index = -1;
  Vec3 target_point = Vec3::Zero();
};

/// Mean squared distance between matched deformed points and their assigned
/// target positions; zero for an empty pair list.
inline double matching_loss(const Eigen::MatrixXd& deformed,
                            const std::vector<MatchPair>& pairs,
                            Eigen::MatrixXd* grad_deformed = nullptr) {
  if (pairs.empty()) return 0.0;
  const double inv_p = 1.0 / static_cast<double>(pairs.size());
  double loss = 0.0;
  for (const MatchPair& pair : pairs) {
    if (pair.source_index < 0 || pair.source_index >= deformed.rows())
      throw IndexMismatchError("matching pair source index out of range");
    const Eigen::RowVector3d diff =
        deformed.row(pair.source_index) - pair.target_point.transpose();
    loss += inv_p * diff.squaredNorm();
    if (grad_deformed)
      grad_deformed->row(pair.source_index) += 2.0 * inv_p * diff;
  }
  return loss;
}

enum class DataTerm { mcc, cd };

struct LossBreakdown {
  double total = 0.0;
  double data = 0.0;   // correntropy or Chamfer term, unweighted
  double llr = 0.0;    // reconstruction regularizer, unweighted
  double match = 0.0;  // matching term, unweighted
};

struct LossCoefficients {
  double alpha1 = 1e4;
  double alpha2 = 1e2;
  double beta = 0.0;
  DataTerm data_term = DataTerm::mcc;
};

/// Weighted objective alpha1 * data + alpha2 * llr + beta * match. Breakdown
/// components are reported unweighted; the gradient (accumulated into
/// `grad_deformed` when given) carries the weights.
inline LossBreakdown total_loss(const Eigen::MatrixXd& deformed,
                                const Eigen::MatrixXd& target,
                                const Correspondences& corr,
                                const LLRWeights* weights,
                                const std::vector<MatchPair>& pairs,
                                const LossCoefficients& coeff,
                                const KernelConfig& kcfg,
                                Eigen::MatrixXd* grad_deformed = nullptr) {
  if (coeff.alpha1 < 0.0 || coeff.alpha2 < 0.0 || coeff.beta < 0.0)
    throw InvalidArgumentError("loss coefficients must be non-negative");
  LossBreakdown out;
  Eigen::MatrixXd term_grad;
  auto with_grad = [&](double weight) -> Eigen::MatrixXd* {
    if (!grad_deformed || weight == 0.0) return nullptr;
    term_grad = Eigen::MatrixXd::Zero(deformed.rows(), 3);
    return &term_grad;
  };

  Eigen::MatrixXd* g = with_grad(coeff.alpha1);
  out.data = coeff.data_term == DataTerm::mcc
                 ? correntropy_loss(deformed, target, corr, kcfg, g)
                 : chamfer_loss(deformed, target, corr, g);
  if (g) *grad_deformed += coeff.alpha1 * term_grad;

  if (weights) {
    g = with_grad(coeff.alpha2);
    out.llr = llr_regularizer(deformed, *weights, g);
    if (g) *grad_deformed += coeff.alpha2 * term_grad;
  }

  if (!pairs.empty()) {
    g = with_grad(coeff.beta);
    out.match = matching_loss(deformed, pairs, g);
    if (g) *grad_deformed += coeff.beta * term_grad;
  }

  out.total =
      coeff.alpha1 * out.data + coeff.alpha2 * out.llr + coeff.beta * out.match;
  return out;
}

}  // namespace oar

#endif  // OAR_OBJECTIVE_HPP
