// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded disturbance synthesis: contiguous spherical occlusion crops,
// Gaussian coordinate noise scaled by the bounding-box diagonal, and uniform
// outliers inside the bounding box.

#ifndef OAR_PERTURBATION_HPP
#define OAR_PERTURBATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "oar/errors.hpp"
#include "oar/point_cloud.hpp"
#include "oar/rng.hpp"

namespace oar {

struct OcclusionResult {
  PointCloud cloud;          // survivors, original order
  std::vector<int> removed;  // removed indices, ascending
  int seed_point = -1;       // center of the crop
};

/// Remove the ceil(fraction * N) points nearest to a crop center (the center
/// itself included). The center is drawn uniformly unless `seed_point`
/// names an index. Survivors keep their input order.
inline OcclusionResult occlude(const PointCloud& cloud, double fraction,
                               std::uint64_t seed, int seed_point = -1) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw FractionOutOfRangeError(fraction);
  if (cloud.empty()) throw EmptyCloudError();
  const auto n = cloud.size();

  OcclusionResult out;
  Rng rng(seed);
  out.seed_point = seed_point >= 0 ? seed_point : static_cast<int>(rng.index(n));
  if (out.seed_point >= static_cast<int>(n))
    throw InvalidArgumentError("crop seed point index out of range");

  const auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  if (count == 0) {
    out.cloud = cloud;
    return out;
  }

  const Vec3& center = cloud.points[static_cast<std::size_t>(out.seed_point)];
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double da = squared_distance(cloud.points[static_cast<std::size_t>(a)], center);
    const double db = squared_distance(cloud.points[static_cast<std::size_t>(b)], center);
    if (da != db) return da < db;
    return a < b;
  });
  out.removed.assign(order.begin(), order.begin() + static_cast<long>(count));
  std::sort(out.removed.begin(), out.removed.end());

  std::vector<bool> drop(n, false);
  for (int idx : out.removed) drop[static_cast<std::size_t>(idx)] = true;
  out.cloud.frame = cloud.frame;
  out.cloud.points.reserve(n - count);
  for (std::size_t i = 0; i < n; ++i)
    if (!drop[i]) out.cloud.points.push_back(cloud.points[i]);
  return out;
}

/// Add i.i.d. zero-mean Gaussian noise per coordinate with standard deviation
/// intensity_pct/100 of the bounding-box diagonal.
inline PointCloud add_noise(const PointCloud& cloud, double intensity_pct,
                            std::uint64_t seed) {
  if (intensity_pct < 0.0)
    throw InvalidArgumentError("noise intensity must be non-negative");
  if (cloud.empty()) throw EmptyCloudError();
  if (intensity_pct == 0.0) return cloud;

  const auto [lo, hi] = bounding_box(cloud);
  const double stddev = intensity_pct / 100.0 * (hi - lo).norm();
  Rng rng(seed);
  PointCloud out = cloud;
  for (Vec3& p : out.points)
    for (int c = 0; c < 3; ++c) p[c] += stddev * rng.gaussian();
  return out;
}

struct OutlierResult {
  PointCloud cloud;
  std::vector<int> outlier_indices;  // indices of the appended points
};

/// Append `count` points drawn uniformly inside the axis-aligned bounding box.
inline OutlierResult add_outliers(const PointCloud& cloud, std::size_t count,
                                  std::uint64_t seed) {
  if (cloud.empty()) throw EmptyCloudError();
  OutlierResult out;
  out.cloud = cloud;
  if (count == 0) return out;

  const auto [lo, hi] = bounding_box(cloud);
  Rng rng(seed);
  out.cloud.points.reserve(cloud.size() + count);
  out.outlier_indices.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    for (int c = 0; c < 3; ++c) p[c] = rng.uniform(lo[c], hi[c]);
    out.outlier_indices.push_back(static_cast<int>(out.cloud.points.size()));
    out.cloud.points.push_back(p);
  }
  return out;
}

}  // namespace oar

#endif  // OAR_PERTURBATION_HPP
