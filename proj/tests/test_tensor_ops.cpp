#include <gtest/gtest.h>

#include <random>

#include "starpoly/label_mask.hpp"
#include "starpoly/ops.hpp"

using namespace starpoly;

namespace {

Tensor<double> rnd(std::mt19937_64& rng, Shape s, bool grad = false) {
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<double> t(std::move(s), grad);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST(Tensor, CopiesShareStorageCloneDoesNot) {
  Tensor<float> a(Shape{2, 3});
  Tensor<float> b = a;
  b[4] = 7;
  EXPECT_EQ(a[4], 7);
  Tensor<float> c = a.clone();
  c[4] = 1;
  EXPECT_EQ(a[4], 7);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, GradBufferExistsOnlyWhenRequested) {
  Tensor<double> a(Shape{3});
  EXPECT_TRUE(a.grad().empty());
  a.set_requires_grad(true);
  EXPECT_EQ(a.grad().size(), 3u);
}

TEST(Tape, LeafGradientsAccumulateAcrossBackwardCalls) {
  Tensor<double> x(Shape{2}, {1.5, -2.0}, true);
  for (int i = 0; i < 2; ++i) {
    Tape<double> tape;
    tape.backward(ops::sum(tape, ops::mul(tape, x, x)));
  }
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 2 * 1.5);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2 * 2 * -2.0);
}

TEST(Tape, NonRecordingTapeKeepsNothing) {
  Tensor<double> x(Shape{4}, {1, 2, 3, 4}, true);
  Tape<double> tape(false);
  auto y = ops::sum(tape, x);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_DOUBLE_EQ(y.item(), 10);
}

TEST(Tape, ConstantsAreNotRecorded) {
  Tensor<double> x(Shape{4}, {1, 2, 3, 4});
  Tape<double> tape;
  ops::sum(tape, x);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Conv2d, MatchesDirectLoop) {
  std::mt19937_64 rng(3);
  for (int stride : {1, 2})
    for (auto pad : {ops::Padding::Same, ops::Padding::Valid}) {
      const auto x = rnd(rng, {7, 6, 3}), k = rnd(rng, {3, 3, 3, 4}), b = rnd(rng, {4});
      Tape<double> tape(false);
      const auto y = ops::conv2d(tape, x, k, b, stride, pad);
      const int off = pad == ops::Padding::Same ? 1 : 0;
      const int oh = pad == ops::Padding::Same ? (7 + stride - 1) / stride : (7 - 3) / stride + 1;
      const int ow = pad == ops::Padding::Same ? (6 + stride - 1) / stride : (6 - 3) / stride + 1;
      ASSERT_EQ(y.dim(0), static_cast<std::size_t>(oh));
      ASSERT_EQ(y.dim(1), static_cast<std::size_t>(ow));
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          for (int co = 0; co < 4; ++co) {
            double s = b[co];
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * stride + ky - off, ix = ox * stride + kx - off;
                if (iy < 0 || ix < 0 || iy >= 7 || ix >= 6) continue;
                for (int ci = 0; ci < 3; ++ci)
                  s += x[(iy * 6 + ix) * 3 + ci] * k[((ky * 3 + kx) * 3 + ci) * 4 + co];
              }
            EXPECT_NEAR(y[(oy * ow + ox) * 4 + co], s, 1e-12);
          }
    }
}

TEST(Ops, MaxpoolAndUpsampleValues) {
  Tensor<double> x(Shape{2, 4, 1}, {1, 5, 2, 0, 3, 4, 9, 8});
  Tape<double> tape(false);
  const auto p = ops::maxpool2(tape, x);
  ASSERT_EQ(p.shape(), (Shape{1, 2, 1}));
  EXPECT_EQ(p[0], 5);
  EXPECT_EQ(p[1], 9);
  const auto u = ops::upsample2(tape, p);
  ASSERT_EQ(u.shape(), (Shape{2, 4, 1}));
  EXPECT_EQ(u[0], 5);
  EXPECT_EQ(u[1], 5);
  EXPECT_EQ(u[4], 5);
  EXPECT_EQ(u[7], 9);
}

TEST(Ops, GroupNormNormalizesEachGroup) {
  std::mt19937_64 rng(5);
  const auto x = rnd(rng, {5, 4, 6});
  const Tensor<double> gain = Tensor<double>::filled({6}, 1.0), shift = Tensor<double>::filled({6}, 0.0);
  Tape<double> tape(false);
  const auto y = ops::group_norm(tape, x, 2, gain, shift);
  for (int g = 0; g < 2; ++g) {
    double m = 0, v = 0;
    int n = 0;
    for (std::size_t p = 0; p < 20; ++p)
      for (int c = 3 * g; c < 3 * g + 3; ++c) m += y[p * 6 + c], ++n;
    m /= n;
    for (std::size_t p = 0; p < 20; ++p)
      for (int c = 3 * g; c < 3 * g + 3; ++c) v += (y[p * 6 + c] - m) * (y[p * 6 + c] - m);
    EXPECT_NEAR(m, 0, 1e-12);
    EXPECT_NEAR(v / n, 1, 1e-3);
  }
}

TEST(Ops, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(2);
  const auto x = rnd(rng, {3, 3, 4});
  Tape<double> tape(false);
  const auto y = ops::channel_softmax(tape, x);
  for (std::size_t p = 0; p < 9; ++p) {
    double s = 0;
    for (int c = 0; c < 4; ++c) s += y[p * 4 + c];
    EXPECT_NEAR(s, 1, 1e-14);
  }
}

TEST(Ops, BilinearSampleInterpolatesAndClamps) {
  Tensor<double> map(Shape{2, 2}, {0, 1, 2, 3});
  Tensor<double> coords(Shape{3, 2}, {0.5, 0.5, -4, 0, 0.25, 1});
  Tape<double> tape(false);
  const auto v = ops::bilinear_sample(tape, map, coords);
  EXPECT_DOUBLE_EQ(v[0], 1.5);
  EXPECT_DOUBLE_EQ(v[1], 0);
  EXPECT_DOUBLE_EQ(v[2], 2.25);
}

TEST(Ops, Rot90FourTimesIsIdentityAndMatchesMaskRotation) {
  std::mt19937_64 rng(9);
  const auto x = rnd(rng, {3, 5, 2});
  Tensor<double> r = x;
  for (int i = 0; i < 4; ++i) r = ops::rot90(r, 1);
  EXPECT_EQ(std::vector<double>(r.values().begin(), r.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));

  LabelMask m(3, 5);
  for (std::size_t i = 0; i < m.size(); ++i) m.ids[i] = static_cast<std::uint32_t>(i);
  Tensor<float> t(Shape{3, 5, 1});
  for (std::size_t i = 0; i < m.size(); ++i) t[i] = static_cast<float>(i);
  for (int turns = 0; turns < 4; ++turns) {
    const auto rt = ops::rot90(t, turns);
    const auto rm = m.rotated(turns);
    ASSERT_EQ(rt.dim(0), static_cast<std::size_t>(rm.height));
    for (std::size_t i = 0; i < rm.size(); ++i) EXPECT_EQ(rt[i], static_cast<float>(rm.ids[i]));
  }
  const auto ft = ops::hflip(t);
  const auto fm = m.flipped();
  for (std::size_t i = 0; i < fm.size(); ++i) EXPECT_EQ(ft[i], static_cast<float>(fm.ids[i]));
}

TEST(Ops, ShapeErrorsAreContractViolations) {
  Tape<double> tape;
  Tensor<double> a(Shape{2, 3}), b(Shape{3, 2});
  EXPECT_THROW(ops::add(tape, a, b), ContractViolation);
  EXPECT_THROW(ops::maxpool2(tape, Tensor<double>(Shape{3, 4, 1})), ContractViolation);
  EXPECT_THROW(ops::reshape(tape, a, Shape{5}), ContractViolation);
  EXPECT_THROW(ops::conv2d(tape, Tensor<double>(Shape{4, 4, 2}), Tensor<double>(Shape{3, 3, 3, 1}),
                           Tensor<double>(Shape{1})),
               ContractViolation);
}
