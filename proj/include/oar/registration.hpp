// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end test-time optimization: normalize both clouds, fix the
// locally-linear reconstruction weights of the source, then train the
// displacement network against the weighted objective, one full-cloud
// optimizer step per epoch with correspondences refreshed every epoch.

#ifndef OAR_REGISTRATION_HPP
#define OAR_REGISTRATION_HPP

#include <chrono>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "oar/errors.hpp"
#include "oar/evaluation.hpp"
#include "oar/kdtree.hpp"
#include "oar/network.hpp"
#include "oar/objective.hpp"
#include "oar/optim.hpp"
#include "oar/point_cloud.hpp"

namespace oar {

struct RegistrationConfig {
  int epochs = 200;
  double lr = 1e-4;
  double sigma2 = 1.0;
  int k = 30;
  double alpha1 = 1e4;
  double alpha2 = 1e2;
  // Matching-term weight; unset means 1 when correspondences are supplied
  // and 0 otherwise.
  std::optional<double> beta;
  std::uint64_t seed = 0;
  double omega0 = 30.0;
  KernelConfig::Mode kernel_mode = KernelConfig::Mode::per_coordinate;
  DataTerm data_term = DataTerm::mcc;
  double gram_eps = 1e-6;
  double scheduler_factor = 0.1;
  int scheduler_patience = 1;
  double scheduler_rel_threshold = 1e-4;
  double scheduler_min_lr = 1e-7;

  double resolved_beta(bool has_pairs) const {
    return beta.value_or(has_pairs ? 1.0 : 0.0);
  }
};

struct EpochRecord {
  int epoch = 0;       // 1-based
  double total = 0.0;  // weighted objective
  double data = 0.0;   // unweighted data term
  double llr = 0.0;    // unweighted regularizer
  double match = 0.0;  // unweighted matching term
  double lr = 0.0;     // rate used for this epoch's step
};

struct RegistrationResult {
  NetworkParams params;
  PointCloud deformed;                // target original frame, source order
  Eigen::MatrixXd displacement;       // N x 3, normalized frame
  Eigen::MatrixXd source_normalized;  // N x 3 network inputs
  NormalizationTransform source_transform;
  NormalizationTransform target_transform;
  std::vector<EpochRecord> history;
  RegistrationConfig config;  // echo with beta resolved
  double seconds = 0.0;
};

/// Raised when the loss, a gradient, or a parameter turns NaN/Inf. Carries
/// the epoch that failed and a result holding the last finite parameters.
struct NonFiniteLossError : Error {
  NonFiniteLossError(int epoch, RegistrationResult partial)
      : Error("non-finite loss at epoch " + std::to_string(epoch)),
        epoch(epoch),
        partial(std::move(partial)) {}
  int epoch;
  RegistrationResult partial;
};

namespace detail {

inline PointCloud deformed_in_target_frame(const Eigen::MatrixXd& points,
                                           const NormalizationTransform& tf) {
  return to_target_frame(matrix_to_cloud(points, Frame::normalized), tf);
}

}  // namespace detail

inline RegistrationResult register_clouds(const PointCloud& source,
                                          const PointCloud& target,
                                          const std::vector<MatchPair>& pairs,
                                          const RegistrationConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (source.empty() || target.empty()) throw EmptyCloudError();
  const auto min_points = static_cast<std::size_t>(cfg.k) + 1;
  if (source.size() < min_points || target.size() < min_points)
    throw KTooLargeError(cfg.k, std::min(source.size(), target.size()) - 1);
  if (cfg.epochs < 0 || cfg.lr <= 0.0 || cfg.sigma2 <= 0.0)
    throw InvalidArgumentError("epochs, lr, and sigma2 must be positive");
  for (const MatchPair& p : pairs)
    if (p.source_index < 0 ||
        p.source_index >= static_cast<int>(source.size()))
      throw IndexMismatchError("correspondence source index out of range");

  RegistrationResult result;
  result.config = cfg;
  result.config.beta = cfg.resolved_beta(!pairs.empty());

  auto [source_norm, source_tf] = normalize(source);
  auto [target_norm, target_tf] = normalize(target);
  result.source_transform = source_tf;
  result.target_transform = target_tf;
  result.source_normalized = cloud_to_matrix(source_norm);
  const Eigen::MatrixXd target_mat = cloud_to_matrix(target_norm);
  const KdTree target_tree(target_mat);

  std::optional<LLRWeights> weights;
  if (cfg.alpha2 > 0.0)
    weights = compute_llr_weights(source_norm, cfg.k, cfg.gram_eps);

  result.params = init_network(cfg.seed, cfg.omega0);
  AdamState adam;
  PlateauScheduler scheduler;
  scheduler.lr = cfg.lr;
  scheduler.factor = cfg.scheduler_factor;
  scheduler.patience = cfg.scheduler_patience;
  scheduler.rel_threshold = cfg.scheduler_rel_threshold;
  scheduler.min_lr = cfg.scheduler_min_lr;

  const KernelConfig kcfg{cfg.sigma2, cfg.kernel_mode};
  const LossCoefficients coeff{cfg.alpha1, cfg.alpha2,
                               *result.config.beta, cfg.data_term};

  NetworkParams last_good = result.params;
  auto finish = [&](NetworkParams params) {
    result.params = std::move(params);
    const auto fwd = forward(result.params, result.source_normalized);
    result.displacement = fwd.displacement;
    result.deformed = detail::deformed_in_target_frame(
        result.source_normalized + result.displacement, target_tf);
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
  };
  auto abort_non_finite = [&](int epoch) {
    finish(last_good);
    throw NonFiniteLossError(epoch, std::move(result));
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto fwd = forward(result.params, result.source_normalized);
    const Eigen::MatrixXd deformed =
        result.source_normalized + fwd.displacement;
    if (!deformed.allFinite()) abort_non_finite(epoch);

    const Correspondences corr =
        find_correspondences(deformed, target_mat, target_tree);
    Eigen::MatrixXd point_grad = Eigen::MatrixXd::Zero(deformed.rows(), 3);
    const LossBreakdown loss =
        total_loss(deformed, target_mat, corr,
                   weights ? &*weights : nullptr, pairs, coeff, kcfg,
                   &point_grad);
    if (!std::isfinite(loss.total) || !point_grad.allFinite())
      abort_non_finite(epoch);
    last_good = result.params;

    const NetworkGrads grads = backward(result.params, fwd.record, point_grad);
    if (!grads.all_finite()) abort_non_finite(epoch);

    const double lr_used = scheduler.lr;
    adam_step(adam, result.params, grads, lr_used);
    if (!result.params.all_finite()) abort_non_finite(epoch);
    scheduler.step(loss.total);

    result.history.push_back(
        {epoch, loss.total, loss.data, loss.llr, loss.match, lr_used});
  }

  finish(std::move(result.params));
  return result;
}

inline RegistrationResult register_clouds(const PointCloud& source,
                                          const PointCloud& target,
                                          const RegistrationConfig& cfg = {}) {
  return register_clouds(source, target, {}, cfg);
}

/// Blend of the source toward its registered deformation: per point
/// p + t * displacement in the normalized frame, mapped to the target frame.
/// t = 0 gives the frame-mapped source; t = 1 reproduces result.deformed.
inline PointCloud interpolate(const PointCloud& source,
                              const RegistrationResult& result, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw TOutOfRangeError(t);
  if (static_cast<Eigen::Index>(source.size()) !=
      result.source_normalized.rows())
    throw SizeMismatchError(source.size(),
                            static_cast<std::size_t>(
                                result.source_normalized.rows()));
  const Eigen::MatrixXd blended =
      result.source_normalized + t * result.displacement;
  return detail::deformed_in_target_frame(blended, result.target_transform);
}

/// Displacement table for export: normalized source positions, their
/// displacement vectors, and the transforms needed to re-scale either side.
struct DisplacementField {
  Eigen::MatrixXd source_normalized;  // N x 3
  Eigen::MatrixXd displacement;       // N x 3
  NormalizationTransform source_transform;
  NormalizationTransform target_transform;
};

inline DisplacementField export_displacement_field(
    const RegistrationResult& result) {
  return {result.source_normalized, result.displacement,
          result.source_transform, result.target_transform};
}

}  // namespace oar

#endif  // OAR_REGISTRATION_HPP
