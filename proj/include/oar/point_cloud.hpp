// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Point cloud container, coordinate-frame bookkeeping, and the
// center-and-scale normalization used throughout the pipeline.

#ifndef OAR_POINT_CLOUD_HPP
#define OAR_POINT_CLOUD_HPP

#include <Eigen/Core>
#include <cmath>
#include <utility>
#include <vector>

#include "oar/errors.hpp"

namespace oar {

using Vec3 = Eigen::Vector3d;

/// Coordinate frame a cloud lives in.
enum class Frame { original, normalized };

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::original;

  PointCloud() = default;
  PointCloud(std::vector<Vec3> pts, Frame f) : points(std::move(pts)), frame(f) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Vec3& operator[](std::size_t i) const { return points[i]; }
  Vec3& operator[](std::size_t i) { return points[i]; }
};

/// Centering translation and isotropic scale between the original frame and
/// the normalized frame (unit max radius around the mean).
struct NormalizationTransform {
  Vec3 mu = Vec3::Zero();
  double sigma = 1.0;

  /// original -> normalized
  Vec3 apply(const Vec3& p) const { return (p - mu) / sigma; }
  /// normalized -> original
  Vec3 unapply(const Vec3& p) const { return sigma * p + mu; }
};

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Center the cloud on its mean and scale so the farthest point sits at unit
/// distance from the origin. Throws DegenerateCloudError when every point
/// coincides (the scale would be zero).
inline std::pair<PointCloud, NormalizationTransform> normalize(
    const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloudError();
  if (cloud.frame != Frame::original)
    throw InvalidArgumentError("normalize expects a cloud in the original frame");

  Vec3 mu = Vec3::Zero();
  for (const Vec3& p : cloud.points) mu += p;
  mu /= static_cast<double>(cloud.size());

  double sigma2 = 0.0;
  for (const Vec3& p : cloud.points)
    sigma2 = std::max(sigma2, squared_distance(p, mu));
  const double sigma = std::sqrt(sigma2);
  if (sigma == 0.0) throw DegenerateCloudError();

  NormalizationTransform tf{mu, sigma};
  PointCloud out;
  out.frame = Frame::normalized;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(tf.apply(p));
  return {std::move(out), tf};
}

/// Map a normalized-frame cloud into the original frame of `tf` (per point
/// sigma * p + mu). Used to express a deformed source in the target's frame.
inline PointCloud to_target_frame(const PointCloud& cloud,
                                  const NormalizationTransform& tf) {
  if (cloud.frame != Frame::normalized)
    throw InvalidArgumentError(
        "to_target_frame expects a cloud in the normalized frame");
  PointCloud out;
  out.frame = Frame::original;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(tf.unapply(p));
  return out;
}

/// Axis-aligned bounding box; returns {min, max}.
inline std::pair<Vec3, Vec3> bounding_box(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloudError();
  Vec3 lo = cloud.points.front();
  Vec3 hi = cloud.points.front();
  for (const Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

inline Eigen::MatrixXd cloud_to_matrix(const PointCloud& cloud) {
  Eigen::MatrixXd m(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) m.row(i) = cloud.points[i];
  return m;
}

inline PointCloud matrix_to_cloud(const Eigen::MatrixXd& m, Frame frame) {
  PointCloud out;
  out.frame = frame;
  out.points.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out.points.emplace_back(m(i, 0), m(i, 1), m(i, 2));
  return out;
}

}  // namespace oar

#endif  // OAR_POINT_CLOUD_HPP
