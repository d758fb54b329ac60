#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "oar/evaluation.hpp"
#include "oar/rng.hpp"

using namespace oar;

namespace {

PointCloud cloud_from(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

}  // namespace

TEST_CASE("a perfect prediction scores perfectly") {
  Rng rng(1);
  PointCloud gt;
  for (int i = 0; i < 50; ++i)
    gt.points.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3),
                           rng.uniform(-3, 3));
  const Metrics m = evaluate(gt, gt);
  REQUIRE(m.epe == 0.0);
  REQUIRE(m.epe_mean_norm == 0.0);
  REQUIRE(m.acc_strict == 100.0);
  REQUIRE(m.acc_relaxed == 100.0);
  REQUIRE(m.outlier == 0.0);
}

TEST_CASE("a single (3,4,0) error gives EPE 5 in raw mode") {
  const PointCloud gt = cloud_from({{1, 1, 1}});
  const PointCloud pred = cloud_from({{4, 5, 1}});
  const Metrics m = evaluate(pred, gt, EvalFrame::raw);
  REQUIRE(m.epe == Catch::Approx(5.0).epsilon(1e-15));
  REQUIRE(m.epe_mean_norm == Catch::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("threshold counting on hand-picked per-point errors") {
  // Errors 0.01 and 0.03 in the frame normalized by the ground truth, which
  // is already centered with unit max radius so the transform is identity.
  const PointCloud gt = cloud_from({{1, 0, 0}, {-1, 0, 0}});
  const PointCloud pred = cloud_from({{1, 0.01, 0}, {-1, 0.03, 0}});
  const Metrics m = evaluate(pred, gt, EvalFrame::normalized_by_gt);
  REQUIRE(m.acc_strict == 50.0);
  REQUIRE(m.acc_relaxed == 100.0);
  REQUIRE(m.outlier == 0.0);
  REQUIRE(m.per_point_errors[0] == Catch::Approx(0.01).epsilon(1e-12));
  REQUIRE(m.per_point_errors[1] == Catch::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("normalized mode divides errors by the ground-truth scale") {
  // Same shape as above, scaled by 100: raw errors 1.0 and 3.0 shrink back
  // to 0.01 and 0.03 in the gt-normalized frame.
  const PointCloud gt = cloud_from({{100, 0, 0}, {-100, 0, 0}});
  const PointCloud pred = cloud_from({{100, 1.0, 0}, {-100, 3.0, 0}});
  const Metrics m = evaluate(pred, gt, EvalFrame::normalized_by_gt);
  REQUIRE(m.acc_strict == 50.0);
  REQUIRE(m.acc_relaxed == 100.0);
  const Metrics raw = evaluate(pred, gt, EvalFrame::raw);
  REQUIRE(raw.acc_relaxed == 0.0);  // raw errors are way over 0.05
}

TEST_CASE("custom thresholds change the counts") {
  const PointCloud gt = cloud_from({{1, 0, 0}, {-1, 0, 0}});
  const PointCloud pred = cloud_from({{1, 0.01, 0}, {-1, 0.03, 0}});
  const Metrics m =
      evaluate(pred, gt, EvalFrame::normalized_by_gt, {0.035, 0.04, 0.3});
  REQUIRE(m.acc_strict == 100.0);
  const Metrics tight =
      evaluate(pred, gt, EvalFrame::normalized_by_gt, {0.005, 0.02, 0.025});
  REQUIRE(tight.acc_strict == 0.0);
  REQUIRE(tight.acc_relaxed == 50.0);
  REQUIRE(tight.outlier == 50.0);
}

TEST_CASE("strict accuracy never exceeds relaxed accuracy") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    PointCloud gt, pred;
    const int n = 2 + static_cast<int>(rng.index(30));
    for (int i = 0; i < n; ++i) {
      gt.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(-1, 1));
      pred.points.push_back(gt.points.back() +
                            0.1 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                       rng.uniform(-1, 1)));
    }
    const Metrics m = evaluate(pred, gt);
    REQUIRE(m.acc_strict <= m.acc_relaxed);
    REQUIRE(m.acc_relaxed <= 100.0);
    REQUIRE(m.outlier >= 0.0);
    const double max_err = *std::max_element(m.per_point_errors.begin(),
                                             m.per_point_errors.end());
    if (max_err <= 0.3) REQUIRE(m.outlier == 0.0);
  }
}

TEST_CASE("EPE is invariant to a simultaneous permutation of both clouds") {
  Rng rng(3);
  PointCloud gt, pred;
  for (int i = 0; i < 20; ++i) {
    gt.points.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2),
                           rng.uniform(-2, 2));
    pred.points.push_back(gt.points.back() +
                          0.05 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                      rng.uniform(-1, 1)));
  }
  const Metrics base = evaluate(pred, gt, EvalFrame::raw);

  PointCloud gt_perm = gt, pred_perm = pred;
  std::reverse(gt_perm.points.begin(), gt_perm.points.end());
  std::reverse(pred_perm.points.begin(), pred_perm.points.end());
  const Metrics perm = evaluate(pred_perm, gt_perm, EvalFrame::raw);
  REQUIRE(perm.epe == Catch::Approx(base.epe).epsilon(1e-13));
  REQUIRE(perm.acc_strict == base.acc_strict);
}

TEST_CASE("size mismatches are rejected") {
  const PointCloud gt = cloud_from({{0, 0, 0}, {1, 0, 0}});
  const PointCloud pred = cloud_from({{0, 0, 0}});
  REQUIRE_THROWS_AS(evaluate(pred, gt), SizeMismatchError);
}

TEST_CASE("inverted threshold ordering is rejected") {
  const PointCloud gt = cloud_from({{0, 0, 0}, {1, 0, 0}});
  REQUIRE_THROWS_AS(evaluate(gt, gt, EvalFrame::raw, {0.05, 0.025, 0.3}),
                    InvalidArgumentError);
}
