// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Registration quality metrics between a predicted cloud and an index-aligned
// ground truth: scaled end-point error, strict/relaxed accuracy percentages,
// and the outlier ratio.

#ifndef OAR_EVALUATION_HPP
#define OAR_EVALUATION_HPP

#include <cmath>
#include <vector>

#include "oar/errors.hpp"
#include "oar/point_cloud.hpp"

namespace oar {

struct EvalThresholds {
  double acc_strict = 0.025;
  double acc_relaxed = 0.05;
  double outlier = 0.3;
};

enum class EvalFrame {
  normalized_by_gt,  // map both clouds by the ground truth's transform first
  raw                // compare as-is
};

struct Metrics {
  double epe = 0.0;            // Frobenius norm of the error matrix over N
  double epe_mean_norm = 0.0;  // mean per-point error norm, for reference
  double acc_strict = 0.0;     // percent with error below the strict threshold
  double acc_relaxed = 0.0;    // percent with error below the relaxed threshold
  double outlier = 0.0;        // percent with error above the outlier threshold
  EvalThresholds thresholds;
  std::vector<double> per_point_errors;
};

inline Metrics evaluate(const PointCloud& pred, const PointCloud& gt,
                        EvalFrame frame = EvalFrame::normalized_by_gt,
                        const EvalThresholds& thresholds = {}) {
  if (pred.size() != gt.size()) throw SizeMismatchError(pred.size(), gt.size());
  if (pred.empty()) throw EmptyCloudError();
  if (!(thresholds.acc_strict <= thresholds.acc_relaxed))
    throw InvalidArgumentError("strict threshold must not exceed relaxed");

  NormalizationTransform tf;  // identity in raw mode
  if (frame == EvalFrame::normalized_by_gt) {
    PointCloud gt_original = gt;
    gt_original.frame = Frame::original;
    tf = normalize(gt_original).second;
  }

  Metrics m;
  m.thresholds = thresholds;
  m.per_point_errors.reserve(pred.size());
  const auto n = static_cast<double>(pred.size());
  double sum_sq = 0.0;
  double sum = 0.0;
  std::size_t n_strict = 0, n_relaxed = 0, n_outlier = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec3 e = tf.apply(pred.points[i]) - tf.apply(gt.points[i]);
    const double err = e.norm();
    m.per_point_errors.push_back(err);
    sum_sq += e.squaredNorm();
    sum += err;
    if (err < thresholds.acc_strict) ++n_strict;
    if (err < thresholds.acc_relaxed) ++n_relaxed;
    if (err > thresholds.outlier) ++n_outlier;
  }
  m.epe = std::sqrt(sum_sq) / n;
  m.epe_mean_norm = sum / n;
  m.acc_strict = 100.0 * static_cast<double>(n_strict) / n;
  m.acc_relaxed = 100.0 * static_cast<double>(n_relaxed) / n;
  m.outlier = 100.0 * static_cast<double>(n_outlier) / n;
  return m;
}

}  // namespace oar

#endif  // OAR_EVALUATION_HPP
