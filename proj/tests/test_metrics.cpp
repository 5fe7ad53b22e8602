#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "starpoly/metrics.hpp"

using namespace starpoly;

TEST(Metrics, ThresholdGrid) {
  const auto t = ap_thresholds();
  ASSERT_EQ(t.size(), 9u);
  EXPECT_DOUBLE_EQ(t.front(), 0.5);
  EXPECT_DOUBLE_EQ(t.back(), 0.9);
  EXPECT_EQ(ap_csv_header(), "name,AP_0.5,AP_0.55,AP_0.6,AP_0.65,AP_0.7,AP_0.75,AP_0.8,AP_0.85,AP_0.9,Mean");
}

TEST(Metrics, ApAndPqMatchDenseBruteForce) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 rng(seed);
    const LabelMask gt = oracle::random_mask(rng, 24, 26, 7, 3);
    const LabelMask pred = oracle::perturb(rng, gt, 3);
    const ImageMetrics m = evaluate_image("x", gt, pred);
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      const double tau = m.ap.thresholds[i];
      const auto ref = oracle::match(gt, pred, tau);
      ASSERT_EQ(m.rows[i].tp, ref.tp) << "seed " << seed << " tau " << tau;
      ASSERT_EQ(m.rows[i].fp, ref.fp);
      ASSERT_EQ(m.rows[i].fn, ref.fn);
      ASSERT_EQ(m.ap.ap[i], oracle::ap(ref));
    }
    ASSERT_NEAR(m.pq.bpq, oracle::pq(oracle::match(gt, pred, 0.5)), 1e-12) << "seed " << seed;
    const double ref_mpq = oracle::mpq(gt, pred);
    if (ref_mpq < 0) {
      EXPECT_FALSE(m.pq.mpq.has_value());
    } else {
      ASSERT_TRUE(m.pq.mpq.has_value());
      ASSERT_NEAR(*m.pq.mpq, ref_mpq, 1e-12) << "seed " << seed;
    }
  }
}

TEST(Metrics, GreedyMatchingBelowHalfMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed + 500);
    const LabelMask gt = oracle::random_mask(rng, 20, 20, 6);
    const LabelMask pred = oracle::perturb(rng, gt);
    for (double tau : {0.05, 0.1, 0.3}) {
      const auto row = match_instances(gt, pred, tau);
      const auto ref = oracle::match(gt, pred, tau);
      ASSERT_EQ(row.tp, ref.tp) << "seed " << seed;
      ASSERT_NEAR(row.sum_matched_iou, ref.iou_sum, 1e-12);
      std::set<std::uint32_t> g, p;
      for (auto [a, b] : row.matches) {
        EXPECT_TRUE(g.insert(a).second);
        EXPECT_TRUE(p.insert(b).second);
      }
    }
  }
}

TEST(Metrics, PerfectPredictionScoresOne) {
  std::mt19937_64 rng(1);
  LabelMask gt = oracle::random_mask(rng, 20, 20, 6, 2);
  while (oracle::ids_of(gt).empty()) gt = oracle::random_mask(rng, 20, 20, 6, 2);
  const auto m = evaluate_image("p", gt, gt);
  for (double v : m.ap.ap) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_DOUBLE_EQ(m.pq.bpq, 1.0);
  EXPECT_DOUBLE_EQ(*m.pq.mpq, 1.0);
}

TEST(Metrics, EmptyCases) {
  const LabelMask empty(8, 8);
  LabelMask one(8, 8);
  one.id(2, 2) = 1;
  EXPECT_DOUBLE_EQ(ap_curve(empty, empty).mean, 1.0);
  EXPECT_DOUBLE_EQ(ap_curve(one, empty).mean, 0.0);
  EXPECT_DOUBLE_EQ(ap_curve(empty, one).mean, 0.0);
  EXPECT_DOUBLE_EQ(panoptic_quality(empty, empty).bpq, 1.0);
  EXPECT_FALSE(panoptic_quality(empty, empty).mpq.has_value());
}

TEST(Metrics, HandComputedExample) {
  // gt: two 2x4 bars; pred: first bar exact, second shifted by one column, one extra.
  LabelMask gt(6, 8), pred(6, 8);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 2; ++y) gt.id(x, y) = 1, pred.id(x, y) = 1;
  for (int x = 4; x < 8; ++x)
    for (int y = 3; y < 5; ++y) gt.id(x, y) = 2;
  for (int x = 5; x < 8; ++x)
    for (int y = 3; y < 5; ++y) pred.id(x, y) = 2;
  pred.id(0, 5) = 3;
  const auto m = evaluate_image("h", gt, pred);
  // IoU of the second pair is 6/8 = 0.75.
  EXPECT_EQ(m.rows[0].tp, 2);  // tau 0.5
  EXPECT_EQ(m.rows[0].fp, 1);
  EXPECT_DOUBLE_EQ(m.ap.ap[0], 2.0 / 3.0);
  EXPECT_EQ(m.rows[5].tp, 1);  // tau 0.75 requires IoU > 0.75
  EXPECT_DOUBLE_EQ(m.ap.ap[5], 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(m.pq.bpq, (1.0 + 0.75) / (2 + 0.5));
}

TEST(Metrics, AggregateAveragesPerImage) {
  LabelMask a(4, 4), b(4, 4);
  a.id(1, 1) = 1;
  std::vector<ImageMetrics> v{evaluate_image("a", a, a), evaluate_image("b", a, b)};
  const auto d = aggregate(v);
  EXPECT_DOUBLE_EQ(d.ap.mean, 0.5);
  EXPECT_DOUBLE_EQ(d.bpq, 0.5);
  EXPECT_EQ(d.images.size(), 2u);
  EXPECT_EQ(ap_csv_row("mean", d.ap),
            "mean,0.5000,0.5000,0.5000,0.5000,0.5000,0.5000,0.5000,0.5000,0.5000,0.5000");
  EXPECT_NE(metrics_to_json(d).find("\"bPQ\""), std::string::npos);
}

TEST(Metrics, SizeMismatchIsRejected) {
  EXPECT_THROW(overlap_table(LabelMask(4, 4), LabelMask(4, 5)), ContractViolation);
}
