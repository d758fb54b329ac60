// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Exact nearest-neighbor queries over an immutable snapshot of a point set.
// Ties are broken toward the smallest stored index so results are
// deterministic regardless of tree layout.

#ifndef OAR_KDTREE_HPP
#define OAR_KDTREE_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "oar/errors.hpp"
#include "oar/point_cloud.hpp"

namespace oar {

struct Neighbor {
  int index = -1;
  double squared_distance = 0.0;
};

class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) throw EmptyCloudError();
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i)
      order_[i] = static_cast<int>(i);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(order_.size()));
  }

  explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points) {}

  explicit KdTree(const Eigen::MatrixXd& rows)
      : KdTree(matrix_to_cloud(rows, Frame::normalized).points) {}

  std::size_t size() const { return points_.size(); }
  const Vec3& point(int i) const { return points_[static_cast<std::size_t>(i)]; }

  /// Closest stored point to `query`; equal distances resolve to the
  /// smallest index.
  Neighbor nearest(const Vec3& query) const {
    Neighbor best;
    best.squared_distance = std::numeric_limits<double>::infinity();
    search_nearest(root_, query, best);
    return best;
  }

  /// The k closest stored points, ascending by (distance, index).
  /// `exclude_index` removes one stored index from consideration, for
  /// querying a cloud against itself.
  std::vector<Neighbor> knn(const Vec3& query, int k,
                            int exclude_index = -1) const {
    const std::size_t available =
        points_.size() - (exclude_index >= 0 ? 1u : 0u);
    if (k <= 0) throw InvalidArgumentError("knn requires k >= 1");
    if (static_cast<std::size_t>(k) > available)
      throw KTooLargeError(k, available);

    std::vector<Neighbor> heap;  // max-heap on (distance, index)
    heap.reserve(static_cast<std::size_t>(k));
    search_knn(root_, query, static_cast<std::size_t>(k), exclude_index, heap);
    std::sort(heap.begin(), heap.end(), [](const Neighbor& a, const Neighbor& b) {
      return less(a, b);
    });
    return heap;
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    double split = 0.0;
    int axis = -1;  // -1 marks a leaf
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;
  };

  static bool less(const Neighbor& a, const Neighbor& b) {
    if (a.squared_distance != b.squared_distance)
      return a.squared_distance < b.squared_distance;
    return a.index < b.index;
  }

  int build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    Vec3 lo = points_[static_cast<std::size_t>(order_[begin])];
    Vec3 hi = lo;
    for (int i = begin; i < end; ++i) {
      const Vec3& p = points_[static_cast<std::size_t>(order_[i])];
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int a, int b) {
                       return points_[static_cast<std::size_t>(a)][axis] <
                              points_[static_cast<std::size_t>(b)][axis];
                     });
    node.axis = axis;
    node.split = points_[static_cast<std::size_t>(order_[mid])][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  void search_nearest(int node_id, const Vec3& query, Neighbor& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[static_cast<std::size_t>(i)];
        Neighbor cand{idx,
                      squared_distance(points_[static_cast<std::size_t>(idx)],
                                       query)};
        if (less(cand, best)) best = cand;
      }
      return;
    }
    const double delta = query[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search_nearest(near, query, best);
    // Non-strict bound: an equally distant point may win the index tie-break.
    if (delta * delta <= best.squared_distance)
      search_nearest(far, query, best);
  }

  void search_knn(int node_id, const Vec3& query, std::size_t k,
                  int exclude_index, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    const auto worse = [](const Neighbor& a, const Neighbor& b) {
      return less(a, b);  // std heap comparator: max-heap on (dist, index)
    };
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[static_cast<std::size_t>(i)];
        if (idx == exclude_index) continue;
        Neighbor cand{idx,
                      squared_distance(points_[static_cast<std::size_t>(idx)],
                                       query)};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), worse);
        } else if (less(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), worse);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), worse);
        }
      }
      return;
    }
    const double delta = query[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search_knn(near, query, k, exclude_index, heap);
    if (heap.size() < k || delta * delta <= heap.front().squared_distance)
      search_knn(far, query, k, exclude_index, heap);
  }

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace oar

#endif  // OAR_KDTREE_HPP
