#pragma once

// Finite-difference gradient cases shared by the unit tests and the
// acceptance run. Every case builds fresh seeded inputs, so one case run with
// ten seeds is ten independent instances.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "starpoly/cem.hpp"
#include "starpoly/encode.hpp"
#include "starpoly/grad_check.hpp"
#include "starpoly/losses.hpp"
#include "starpoly/model.hpp"
#include "starpoly/ops.hpp"
#include "starpoly/transform_model.hpp"

namespace gradcases {

using namespace starpoly;
using T = Tensor<double>;

struct Case {
  std::string name;
  std::string group;  // ops, cem, losses, network
  double tolerance;
  std::function<GradCheckReport(std::uint64_t seed)> run;
};

inline T uniform(std::mt19937_64& rng, Shape s, double lo, double hi, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  T t(std::move(s), grad);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Values bounded away from zero with random sign (keeps relu/abs off their kinks).
inline T signed_away(std::mt19937_64& rng, Shape s, double lo, double hi) {
  T t = uniform(rng, std::move(s), lo, hi);
  std::bernoulli_distribution coin(0.5);
  for (auto& v : t.values())
    if (coin(rng)) v = -v;
  return t;
}

inline GradCheckReport check(const DifferentiableFn& f, std::vector<T> in, std::uint64_t seed,
                             double tol = 1e-4, double step = 1e-5, std::size_t probes = 0) {
  GradCheckOptions o;
  o.tolerance = tol;
  o.step = step;
  o.seed = seed;
  o.max_probes_per_input = probes;
  return grad_check(f, std::move(in), o);
}

// Label mask with two touching blobs for network-level targets.
inline LabelMask toy_mask(int h, int w, std::mt19937_64& rng) {
  LabelMask m(h, w);
  std::uniform_int_distribution<int> off(0, 1);
  const int ox = off(rng), oy = off(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double a = (x - 2.5 - ox) * (x - 2.5 - ox) + (y - 2.5 - oy) * (y - 2.5 - oy);
      const double b = (x - 5.5) * (x - 5.5) + (y - 5.0) * (y - 5.0);
      if (a <= 5.0) m.id(x, y) = 1;
      else if (b <= 4.0) m.id(x, y) = 2;
    }
  m.classes.assign(m.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) m.classes[i] = static_cast<std::uint8_t>(m.ids[i]);
  return m;
}

inline std::vector<T> trainable(const nn::ParamStore<double>& store) {
  std::vector<T> out;
  for (const auto& [_, t] : store.entries()) out.push_back(t);
  return out;
}

inline CemWeights<double> cem_weights(std::mt19937_64& rng, Weighting mode, int samples) {
  const std::size_t n1 = static_cast<std::size_t>(samples) + 1;
  CemWeights<double> w;
  w.mode = mode;
  w.naive_logits = uniform(rng, {n1}, -1, 1);
  w.cwm_kernel = uniform(rng, {n1, n1}, -1, 1);
  w.cwm_bias = uniform(rng, {n1}, -0.5, 0.5);
  return w;
}

inline std::unique_ptr<TransformModel<double>> toy_encoder(int rays, std::uint64_t seed) {
  TransformConfig tc;
  tc.rays = rays;
  tc.mode = SapTargetMode::Both;
  tc.levels = 1;
  tc.base_channels = 2;
  auto m = std::make_unique<TransformModel<double>>(tc, seed);
  m->freeze();
  return m;
}

inline std::vector<Case> all_cases() {
  std::vector<Case> c;
  auto op = [&](std::string name, std::function<GradCheckReport(std::uint64_t)> f) {
    c.push_back({std::move(name), "ops", 1e-4, std::move(f)});
  };

  op("conv2d_same", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::conv2d(t, v[0], v[1], v[2]); },
                 {uniform(rng, {5, 6, 3}, -1, 1), uniform(rng, {3, 3, 3, 4}, -1, 1), uniform(rng, {4}, -1, 1)}, s);
  });
  op("conv2d_valid_stride2", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check(
        [](Tape<double>& t, const std::vector<T>& v) {
          return ops::conv2d(t, v[0], v[1], v[2], 2, ops::Padding::Valid);
        },
        {uniform(rng, {7, 8, 2}, -1, 1), uniform(rng, {3, 3, 2, 3}, -1, 1), uniform(rng, {3}, -1, 1)}, s);
  });
  op("conv2d_1x1", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::conv2d(t, v[0], v[1], v[2]); },
                 {uniform(rng, {4, 4, 5}, -1, 1), uniform(rng, {1, 1, 5, 2}, -1, 1), uniform(rng, {2}, -1, 1)}, s);
  });
  op("relu", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::activation(t, v[0], ops::Activation::Relu); },
                 {signed_away(rng, {4, 5, 3}, 0.05, 2)}, s);
  });
  op("sigmoid", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::activation(t, v[0], ops::Activation::Sigmoid); },
                 {uniform(rng, {4, 5, 3}, -4, 4)}, s);
  });
  op("softplus", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::activation(t, v[0], ops::Activation::Softplus); },
                 {uniform(rng, {4, 5, 3}, -4, 4)}, s);
  });
  op("channel_softmax", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::channel_softmax(t, v[0]); },
                 {uniform(rng, {3, 4, 5}, -3, 3)}, s);
  });
  op("bilinear_sample_map", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    const T coords = uniform(rng, {12, 2}, -1, 8, false);
    return check([coords](Tape<double>& t, const std::vector<T>& v) { return ops::bilinear_sample(t, v[0], coords); },
                 {uniform(rng, {6, 7}, -1, 1)}, s);
  });
  op("bilinear_sample_coords", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    // Keep coordinates inside the image and off integer grid lines.
    T coords(Shape{12, 2}, true);
    std::uniform_int_distribution<int> cell(0, 4);
    std::uniform_real_distribution<double> frac(0.1, 0.9);
    for (auto& v : coords.values()) v = cell(rng) + frac(rng);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::bilinear_sample(t, v[0], v[1], true); },
                 {uniform(rng, {6, 6}, -1, 1), coords}, s);
  });
  op("maxpool2", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    // A shuffled ramp: all values distinct and well separated.
    T x(Shape{4, 6, 2}, true);
    std::vector<double> v(x.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i);
    std::shuffle(v.begin(), v.end(), rng);
    std::copy(v.begin(), v.end(), x.data());
    return check([](Tape<double>& t, const std::vector<T>& in) { return ops::maxpool2(t, in[0]); }, {x}, s);
  });
  op("upsample2", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::upsample2(t, v[0]); },
                 {uniform(rng, {3, 2, 2}, -1, 1)}, s);
  });
  op("group_norm", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::group_norm(t, v[0], 3, v[1], v[2]); },
                 {uniform(rng, {4, 3, 6}, -2, 2), uniform(rng, {6}, 0.5, 1.5), uniform(rng, {6}, -1, 1)}, s);
  });
  op("concat_channels", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::concat_channels(t, v[0], v[1]); },
                 {uniform(rng, {3, 4, 2}, -1, 1), uniform(rng, {3, 4, 3}, -1, 1)}, s);
  });
  op("slice_channels", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::slice_channels(t, v[0], 1, 4); },
                 {uniform(rng, {3, 4, 5}, -1, 1)}, s);
  });
  op("reshape", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check([](Tape<double>& t, const std::vector<T>& v) { return ops::reshape(t, v[0], Shape{6, 4}); },
                 {uniform(rng, {2, 3, 4}, -1, 1)}, s);
  });
  op("add_sub_mul", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check(
        [](Tape<double>& t, const std::vector<T>& v) {
          return ops::mul(t, ops::add(t, v[0], v[1]), ops::sub(t, v[1], v[2]));
        },
        {uniform(rng, {3, 4}, -1, 1), uniform(rng, {3, 4}, -1, 1), uniform(rng, {3, 4}, -1, 1)}, s);
  });
  op("scale_sum_mean", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    return check(
        [](Tape<double>& t, const std::vector<T>& v) {
          return ops::add(t, ops::scale(t, ops::sum(t, v[0]), 0.3), ops::mean(t, v[1]));
        },
        {uniform(rng, {3, 4}, -1, 1), uniform(rng, {2, 5}, -1, 1)}, s);
  });
  op("dot_const", [](std::uint64_t s) {
    std::mt19937_64 rng(s);
    std::vector<double> w(12);
    std::uniform_real_distribution<double> u(-2, 2);
    for (auto& x : w) x = u(rng);
    return check([w](Tape<double>& t, const std::vector<T>& v) { return ops::dot_const(t, v[0], w); },
                 {uniform(rng, {3, 4}, -1, 1)}, s);
  });

  // Refinement: with coordinate gradients on, the full derivative is checked;
  // with them off, only inputs that do not move the sampling points are.
  for (Weighting mode : {Weighting::Equal, Weighting::Naive, Weighting::Cwm}) {
    c.push_back({"cem_refine_" + to_string(mode), "cem", 1e-4, [mode](std::uint64_t s) {
                   std::mt19937_64 rng(s);
                   const int n = 3;
                   auto w = cem_weights(rng, mode, n);
                   std::vector<T> in{uniform(rng, {6, 7, 8}, 0.5, 3.5), uniform(rng, {6, 7, 8}, -1, 1)};
                   if (mode == Weighting::Naive) in.push_back(w.naive_logits);
                   if (mode == Weighting::Cwm) in.insert(in.end(), {w.cwm_kernel, w.cwm_bias});
                   return check(
                       [w, n](Tape<double>& t, const std::vector<T>& v) {
                         return cem_refine(t, v[0], v[1], n, w, true);
                       },
                       in, s);
                 }});
    c.push_back({"cem_refine_fixed_coords_" + to_string(mode), "cem", 1e-4, [mode](std::uint64_t s) {
                   std::mt19937_64 rng(s);
                   const int n = 4;
                   auto w = cem_weights(rng, mode, n);
                   const T d = uniform(rng, {5, 6, 8}, 0.5, 3.5, false);
                   std::vector<T> in{uniform(rng, {5, 6, 8}, -1, 1)};
                   if (mode == Weighting::Naive) in.push_back(w.naive_logits);
                   if (mode == Weighting::Cwm) in.insert(in.end(), {w.cwm_kernel, w.cwm_bias});
                   return check(
                       [w, n, d](Tape<double>& t, const std::vector<T>& v) {
                         Tensor<double> y = cem_refine(t, d, v[0], n, w, false);
                         // Equal weighting ignores confidences; add them so the case is not empty.
                         return ops::add(t, y, ops::scale(t, v[0], 0.5));
                       },
                       in, s);
                 }});
  }

  // The five loss terms.
  c.push_back({"loss_prob", "losses", 1e-4, [](std::uint64_t s) {
                 std::mt19937_64 rng(s);
                 const T target = uniform(rng, {6, 5}, 0, 1, false);
                 return check([target](Tape<double>& t, const std::vector<T>& v) { return loss_prob(t, v[0], target); },
                              {uniform(rng, {6, 5}, 0.05, 0.95)}, s);
               }});
  c.push_back({"loss_dist", "losses", 1e-4, [](std::uint64_t s) {
                 std::mt19937_64 rng(s);
                 const T target = uniform(rng, {5, 5, 8}, 1, 6, false);
                 const T weight = uniform(rng, {5, 5}, 0, 1, false);
                 T d = signed_away(rng, {5, 5, 8}, 0.05, 1);
                 for (std::size_t i = 0; i < d.numel(); ++i) d[i] += target[i];
                 return check([target, weight](Tape<double>& t, const std::vector<T>& v) {
                   return loss_dist(t, v[0], target, weight);
                 }, {d}, s);
               }});
  c.push_back({"loss_dist_refined", "losses", 1e-4, [](std::uint64_t s) {
                 std::mt19937_64 rng(s);
                 const T target = uniform(rng, {5, 5, 8}, 1, 6, false);
                 const T weight = uniform(rng, {5, 5}, 0, 1, false);
                 T d = signed_away(rng, {5, 5, 8}, 0.05, 1), r = signed_away(rng, {5, 5, 8}, 0.05, 1);
                 for (std::size_t i = 0; i < d.numel(); ++i) d[i] += target[i], r[i] += target[i];
                 return check([target, weight](Tape<double>& t, const std::vector<T>& v) {
                   return loss_dist_refined(t, v[0], v[1], target, weight);
                 }, {d, r}, s);
               }});
  c.push_back({"loss_sap", "losses", 1e-4, [](std::uint64_t s) {
                 std::mt19937_64 rng(s);
                 auto enc = std::shared_ptr<TransformModel<double>>(toy_encoder(8, s));
                 const T dgt = uniform(rng, {6, 6, 8}, 0, 4, false);
                 const T pgt = uniform(rng, {6, 6}, 0, 1, false);
                 return check(
                     [enc, dgt, pgt](Tape<double>& t, const std::vector<T>& v) {
                       return loss_sap(t, v[0], v[1], v[2], dgt, pgt, *enc);
                     },
                     {uniform(rng, {6, 6, 8}, 0, 4), uniform(rng, {6, 6, 8}, 0, 4), uniform(rng, {6, 6}, 0, 1)}, s);
               }});
  c.push_back({"loss_class", "losses", 1e-4, [](std::uint64_t s) {
                 std::mt19937_64 rng(s);
                 std::vector<std::uint8_t> mask(30);
                 std::uniform_int_distribution<int> cls(0, 3);
                 for (auto& m : mask) m = static_cast<std::uint8_t>(cls(rng));
                 return check([mask](Tape<double>& t, const std::vector<T>& v) { return loss_class(t, v[0], mask); },
                              {uniform(rng, {5, 6, 4}, -2, 2)}, s);
               }});

  // Full toy networks, every parameter tensor probed.
  struct NetVariant {
    std::string name;
    int samples;
    Weighting weighting;
    bool sap;
    int classes;
  };
  for (const NetVariant& nv : {NetVariant{"network_baseline", 0, Weighting::Cwm, false, 0},
                               NetVariant{"network_cem_equal", 2, Weighting::Equal, false, 0},
                               NetVariant{"network_cem_naive", 2, Weighting::Naive, false, 0},
                               NetVariant{"network_cem_cwm", 2, Weighting::Cwm, false, 0},
                               NetVariant{"network_cwm_sap_class", 2, Weighting::Cwm, true, 2}}) {
    c.push_back({nv.name, "network", 1e-3, [nv](std::uint64_t s) {
                   std::mt19937_64 rng(s);
                   BackboneConfig bc;
                   bc.levels = 1;
                   bc.base_channels = 4;
                   bc.rays = 8;
                   bc.samples = nv.samples;
                   bc.weighting = nv.weighting;
                   bc.coord_grad = true;
                   bc.class_count = nv.classes;
                   auto net = std::make_shared<StarNet<double>>(bc, s);
                   const T image = uniform(rng, {8, 8, 1}, 0, 1, false);
                   const LabelMask mask = toy_mask(8, 8, rng);
                   const GroundTruthBundle gt = encode_ground_truth(mask, RaySet(bc.rays));
                   std::shared_ptr<TransformModel<double>> enc;
                   if (nv.sap) enc = toy_encoder(bc.rays, s + 100);
                   const auto classes = mask.classes;
                   return check(
                       [net, image, gt, enc, classes, nv](Tape<double>& t, const std::vector<T>&) {
                         const auto out = net->forward(t, image);
                         return compute_losses(t, out, gt, nv.samples, enc.get(),
                                               nv.classes ? &classes : nullptr)
                             .total;
                       },
                       trainable(net->params()), s, 1e-3, 1e-6, 4);
                 }});
  }
  return c;
}

}  // namespace gradcases
