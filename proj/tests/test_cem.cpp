#include <gtest/gtest.h>

#include <random>

#include "starpoly/cem.hpp"
#include "starpoly/ops.hpp"

using namespace starpoly;

namespace {

Tensor<double> rnd(std::mt19937_64& rng, Shape s, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(s));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

CemWeights<double> weights(std::mt19937_64& rng, Weighting mode, int n) {
  const auto n1 = static_cast<std::size_t>(n + 1);
  CemWeights<double> w;
  w.mode = mode;
  w.naive_logits = rnd(rng, {n1}, -1, 1);
  w.cwm_kernel = rnd(rng, {n1, n1}, -1, 1);
  w.cwm_bias = rnd(rng, {n1}, -1, 1);
  return w;
}

// Refinement assembled from generic ops: per-channel bilinear reads at the
// sampled coordinates, then the weighted sum. Independent of the fused kernel.
Tensor<double> composed_refine(const Tensor<double>& d, const Tensor<double>& c, int n,
                               const CemWeights<double>& w) {
  Tape<double> tape(false);
  const std::size_t h = d.dim(0), wd = d.dim(1), k = d.dim(2);
  const RaySet rays(static_cast<int>(k));
  Tensor<double> out(d.shape());
  for (std::size_t r = 0; r < k; ++r) {
    Tensor<double> dplane(Shape{h, wd}), cplane(Shape{h, wd});
    for (std::size_t p = 0; p < h * wd; ++p) dplane[p] = d[p * k + r], cplane[p] = c[p * k + r];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < wd; ++x) {
        const double dist = dplane[y * wd + x];
        const auto pts = sample_coords(static_cast<int>(x), static_cast<int>(y), dist, static_cast<int>(r), rays, n);
        Tensor<double> coords(Shape{pts.size(), 2});
        for (std::size_t i = 0; i < pts.size(); ++i) coords[2 * i] = pts[i].x, coords[2 * i + 1] = pts[i].y;
        const auto sampled = ops::bilinear_sample(tape, dplane, coords);
        std::vector<double> wts(pts.size());
        if (w.mode == Weighting::Equal) {
          std::fill(wts.begin(), wts.end(), 1.0 / static_cast<double>(pts.size()));
        } else {
          std::vector<double> logits(pts.size());
          if (w.mode == Weighting::Naive) {
            for (std::size_t m = 0; m < pts.size(); ++m) logits[m] = w.naive_logits[m];
          } else {
            const auto conf = ops::bilinear_sample(tape, cplane, coords);
            for (std::size_t m = 0; m < pts.size(); ++m) {
              logits[m] = w.cwm_bias[m];
              for (std::size_t j = 0; j < pts.size(); ++j) logits[m] += conf[j] * w.cwm_kernel[j * pts.size() + m];
            }
          }
          Tensor<double> lt(Shape{1, 1, pts.size()}, logits);
          const auto sm = ops::channel_softmax(tape, lt);
          for (std::size_t m = 0; m < pts.size(); ++m) wts[m] = sm[m];
        }
        double acc = 0;
        for (std::size_t m = 0; m < pts.size(); ++m)
          acc += wts[m] * (sampled[m] + static_cast<double>(m) / n * dist);
        out[(y * wd + x) * k + r] = acc;
      }
  }
  return out;
}

}  // namespace

TEST(SampleCoords, EvenlySpacedAlongRay) {
  RaySet rays(4);
  const auto pts = sample_coords(3, 5, 6.0, 1, rays, 3);
  ASSERT_EQ(pts.size(), 4u);
  for (int n = 0; n <= 3; ++n) {
    EXPECT_NEAR(pts[n].x, 3, 1e-12);
    EXPECT_NEAR(pts[n].y, 5 + 2.0 * n, 1e-12);
  }
  EXPECT_EQ(sample_coords(1, 2, 4.0, 0, rays, 0).size(), 1u);
  EXPECT_THROW(sample_coords(1, 2, -1.0, 0, rays, 3), ContractViolation);
}

TEST(CemRefine, ZeroSamplesReturnsInput) {
  std::mt19937_64 rng(1);
  const auto d = rnd(rng, {4, 4, 8}, 0, 3), c = rnd(rng, {4, 4, 8}, -1, 1);
  Tape<double> tape;
  const auto r = cem_refine(tape, d, c, 0, CemWeights<double>{});
  EXPECT_TRUE(r.same_storage(d));
}

TEST(CemRefine, MatchesComposedReferenceInEveryMode) {
  std::mt19937_64 rng(7);
  for (Weighting mode : {Weighting::Equal, Weighting::Naive, Weighting::Cwm})
    for (int n : {1, 3, 6}) {
      const auto d = rnd(rng, {7, 6, 8}, 0, 5), c = rnd(rng, {7, 6, 8}, -2, 2);
      const auto w = weights(rng, mode, n);
      Tape<double> tape(false);
      const auto got = cem_refine(tape, d, c, n, w);
      const auto ref = composed_refine(d, c, n, w);
      for (std::size_t i = 0; i < got.numel(); ++i)
        ASSERT_NEAR(got[i], ref[i], 1e-12) << to_string(mode) << " N=" << n << " i=" << i;
    }
}

TEST(CemRefine, ConstantFieldWithEqualWeights) {
  // Every sample reads c, so D_r = c (1 + mean of n/N) = 1.5 c.
  const Tensor<double> d = Tensor<double>::filled({5, 5, 8}, 2.0);
  const Tensor<double> c = Tensor<double>::filled({5, 5, 8}, 0.0);
  Tape<double> tape(false);
  CemWeights<double> w;
  const auto r = cem_refine(tape, d, c, 4, w);
  for (double v : r.values()) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(CemFusionWeights, AreDistributions) {
  std::mt19937_64 rng(3);
  const auto d = rnd(rng, {4, 5, 8}, 0, 4), c = rnd(rng, {4, 5, 8}, -2, 2);
  for (Weighting mode : {Weighting::Equal, Weighting::Naive, Weighting::Cwm}) {
    const auto w = weights(rng, mode, 5);
    const auto f = cem_fusion_weights(d, c, 5, w);
    ASSERT_EQ(f.shape(), (Shape{4, 5, 8, 6}));
    for (std::size_t i = 0; i < 4 * 5 * 8; ++i) {
      double s = 0;
      for (int n = 0; n < 6; ++n) {
        EXPECT_GE(f[i * 6 + n], 0);
        s += f[i * 6 + n];
        if (mode == Weighting::Equal) EXPECT_NEAR(f[i * 6 + n], 1.0 / 6, 1e-15);
      }
      EXPECT_NEAR(s, 1, 1e-12);
    }
  }
}

TEST(CemRefine, NaiveWeightsAreSharedAcrossPixels) {
  std::mt19937_64 rng(4);
  const auto d = rnd(rng, {3, 3, 8}, 0, 4), c = rnd(rng, {3, 3, 8}, -2, 2);
  const auto w = weights(rng, Weighting::Naive, 3);
  const auto f = cem_fusion_weights(d, c, 3, w);
  for (std::size_t i = 1; i < 9 * 8; ++i)
    for (int n = 0; n < 4; ++n) EXPECT_DOUBLE_EQ(f[i * 4 + n], f[n]);
}

TEST(CemRefine, RejectsMismatchedInputs) {
  Tape<double> tape;
  CemWeights<double> w;
  w.mode = Weighting::Cwm;
  EXPECT_THROW(cem_refine(tape, Tensor<double>(Shape{4, 4, 8}), Tensor<double>(Shape{4, 4, 7}), 2, w),
               ContractViolation);
  EXPECT_THROW(cem_refine(tape, Tensor<double>(Shape{4, 4, 8}), Tensor<double>(Shape{4, 4, 8}), 2, w),
               ContractViolation);
}

TEST(Weighting, NamesRoundTrip) {
  for (Weighting w : {Weighting::Equal, Weighting::Naive, Weighting::Cwm})
    EXPECT_EQ(weighting_from_string(to_string(w)), w);
  EXPECT_THROW(weighting_from_string("max"), ConfigError);
}
