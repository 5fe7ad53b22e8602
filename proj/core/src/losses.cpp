#include "starpoly/losses.hpp"

#include <algorithm>
#include <cmath>

namespace starpoly {

namespace {

template <typename T>
T sign(T v) {
  return static_cast<T>((v > T(0)) - (v < T(0)));
}

template <typename T>
Tensor<T> as(const Tensor<float>& t) {
  if constexpr (std::is_same_v<T, float>) {
    return t;
  } else {
    return tensor_cast<T>(t);
  }
}

// Shared shape check for the weighted L1 terms.
template <typename T>
std::size_t check_weighted(const Tensor<T>& d, const Tensor<T>& target, const Tensor<T>& weight,
                           const char* name) {
  require(d.rank() == 3 && d.shape() == target.shape(),
          std::string(name) + ": prediction and target must be equal [H,W,K], got " +
              shape_to_string(d.shape()) + " vs " + shape_to_string(target.shape()));
  require(weight.rank() == 2 && weight.dim(0) == d.dim(0) && weight.dim(1) == d.dim(1),
          std::string(name) + ": weight must be [H,W]");
  return d.dim(2);
}

}  // namespace

template <typename T>
Tensor<T> loss_prob(Tape<T>& tape, const Tensor<T>& probability, const Tensor<T>& target) {
  require(probability.shape() == target.shape(), "loss_prob: shape mismatch " +
                                                     shape_to_string(probability.shape()) + " vs " +
                                                     shape_to_string(target.shape()));
  require(probability.numel() > 0, "loss_prob: empty input");
  const auto lo = static_cast<T>(kProbabilityClamp);
  const T hi = T(1) - lo;
  const std::size_t n = probability.numel();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(probability[i], lo, hi);
    const double t = target[i];
    acc -= t * std::log(p) + (1 - t) * std::log(1 - p);
  }
  const bool track = tape.tracks(probability);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)), track);
  if (track) {
    tape.record(out, [probability, target, out, lo, hi]() mutable {
      const std::size_t n = probability.numel();
      const T g = out.grad()[0] / static_cast<T>(n);
      T* dp = probability.grad_data();
      for (std::size_t i = 0; i < n; ++i) {
        const T p = probability[i];
        if (p < lo || p > hi) continue;
        const T t = target[i];
        dp[i] -= g * (t / p - (T(1) - t) / (T(1) - p));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> loss_dist(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& target,
                    const Tensor<T>& weight) {
  const std::size_t k = check_weighted(distances, target, weight, "loss_dist");
  const std::size_t pixels = weight.numel();
  double acc = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (weight[p] == T(0)) continue;
    double row = 0;
    for (std::size_t j = 0; j < k; ++j) row += std::abs(target[p * k + j] - distances[p * k + j]);
    acc += weight[p] * row;
  }
  const double norm = static_cast<double>(k * pixels);
  const bool track = tape.tracks(distances);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / norm), track);
  if (track) {
    tape.record(out, [distances, target, weight, out, k, norm]() mutable {
      const T g = static_cast<T>(out.grad()[0] / norm);
      T* dd = distances.grad_data();
      for (std::size_t p = 0; p < weight.numel(); ++p) {
        const T wg = weight[p] * g;
        if (wg == T(0)) continue;
        for (std::size_t j = 0; j < k; ++j)
          dd[p * k + j] += wg * sign(distances[p * k + j] - target[p * k + j]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> loss_dist_refined(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& refined,
                            const Tensor<T>& target, const Tensor<T>& weight) {
  const std::size_t k = check_weighted(distances, target, weight, "loss_dist_refined");
  require(refined.shape() == distances.shape(), "loss_dist_refined: refined shape mismatch");
  const std::size_t pixels = weight.numel();
  double acc = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (weight[p] == T(0)) continue;
    double row = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t i = p * k + j;
      row += std::abs(target[i] - distances[i]) + std::abs(target[i] - refined[i]);
    }
    acc += weight[p] * row;
  }
  const double norm = static_cast<double>(k * pixels);
  const bool track = tape.tracks(distances, refined);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / norm), track);
  if (track) {
    tape.record(out, [distances, refined, target, weight, out, k, norm]() mutable {
      const T g = static_cast<T>(out.grad()[0] / norm);
      for (Tensor<T> pred : {distances, refined}) {
        if (!pred.requires_grad()) continue;
        T* dd = pred.grad_data();
        for (std::size_t p = 0; p < weight.numel(); ++p) {
          const T wg = weight[p] * g;
          if (wg == T(0)) continue;
          for (std::size_t j = 0; j < k; ++j)
            dd[p * k + j] += wg * sign(pred[p * k + j] - target[p * k + j]);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> feature_l1(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 3 && a.shape() == b.shape(),
          "feature_l1: expected equal [H,W,C] maps, got " + shape_to_string(a.shape()) + " vs " +
              shape_to_string(b.shape()));
  const std::size_t cells = a.dim(0) * a.dim(1);
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
  const bool track = tape.tracks(a, b);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(cells)), track);
  if (track) {
    tape.record(out, [a, b, out, cells]() mutable {
      const T g = out.grad()[0] / static_cast<T>(cells);
      for (std::size_t i = 0; i < a.numel(); ++i) {
        const T s = g * sign(a[i] - b[i]);
        if (a.requires_grad()) a.grad()[i] += s;
        if (b.requires_grad()) b.grad()[i] -= s;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> loss_sap(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& refined,
                   const Tensor<T>& probability, const Tensor<T>& target_distances,
                   const Tensor<T>& target_probability, const TransformModel<T>& encoder) {
  require(encoder.frozen(), "loss_sap: the transformation model must be frozen");
  using TM = TransformModel<T>;
  Tape<T> constants(false);
  const Tensor<T> f_gt =
      encoder.encode(constants, TM::make_input(constants, target_distances, target_probability));
  const Tensor<T> f_d = encoder.encode(tape, TM::make_input(tape, distances, probability));
  const Tensor<T> first = feature_l1(tape, f_gt, f_d);
  if (refined.same_storage(distances)) return ops::scale(tape, first, T(2));
  const Tensor<T> f_r = encoder.encode(tape, TM::make_input(tape, refined, probability));
  return ops::add(tape, first, feature_l1(tape, f_gt, f_r));
}

template <typename T>
Tensor<T> loss_class(Tape<T>& tape, const Tensor<T>& logits,
                     const std::vector<std::uint8_t>& class_mask) {
  require(logits.rank() == 3 && logits.dim(2) >= 2, "loss_class: logits must be [H,W,C+1]");
  const std::size_t pixels = logits.dim(0) * logits.dim(1);
  const std::size_t c = logits.dim(2);
  require(class_mask.size() == pixels, "loss_class: class mask size mismatch");
  for (auto v : class_mask) require(v < c, "loss_class: class label out of range");

  std::vector<T> prob(logits.numel());
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* z = logits.data() + p * c;
    const T m = *std::max_element(z, z + c);
    T s = 0;
    for (std::size_t j = 0; j < c; ++j) s += (prob[p * c + j] = std::exp(z[j] - m));
    for (std::size_t j = 0; j < c; ++j) prob[p * c + j] /= s;
  }
  double ce = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* z = logits.data() + p * c;
    const T m = *std::max_element(z, z + c);
    double s = 0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(static_cast<double>(z[j] - m));
    ce += std::log(s) + m - z[class_mask[p]];
  }
  ce /= static_cast<double>(pixels);

  // Soft Dice per foreground class present in the target.
  std::vector<std::size_t> present;
  std::vector<double> inter(c, 0), denom(c, 0);
  for (std::size_t j = 1; j < c; ++j) {
    double t = 0, i = 0, ps = 0;
    for (std::size_t p = 0; p < pixels; ++p) {
      const bool hit = class_mask[p] == j;
      t += hit;
      ps += prob[p * c + j];
      if (hit) i += prob[p * c + j];
    }
    if (t == 0) continue;
    present.push_back(j);
    inter[j] = i;
    denom[j] = ps + t;
  }
  double dice_loss = 0;
  if (!present.empty()) {
    double mean_dice = 0;
    for (auto j : present) mean_dice += 2 * inter[j] / denom[j];
    dice_loss = 1 - mean_dice / static_cast<double>(present.size());
  }

  const bool track = tape.tracks(logits);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(ce + dice_loss), track);
  if (track) {
    tape.record(out, [logits, class_mask, out, prob = std::move(prob), present, inter, denom,
                      pixels, c]() mutable {
      const T g = out.grad()[0];
      const T ce_g = g / static_cast<T>(pixels);
      const T dice_scale = present.empty() ? T(0) : g / static_cast<T>(present.size());
      T* dz = logits.grad_data();
      std::vector<T> dp(c);
      for (std::size_t p = 0; p < pixels; ++p) {
        const T* pr = prob.data() + p * c;
        // d(dice loss)/d(prob), then back through the softmax.
        std::fill(dp.begin(), dp.end(), T(0));
        for (auto j : present) {
          const double t = class_mask[p] == j ? 1.0 : 0.0;
          const double dd = 2 * t / denom[j] - 2 * inter[j] / (denom[j] * denom[j]);
          dp[j] = static_cast<T>(-dd) * dice_scale;
        }
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += dp[j] * pr[j];
        for (std::size_t j = 0; j < c; ++j) {
          const T onehot = class_mask[p] == j ? T(1) : T(0);
          dz[p * c + j] += ce_g * (pr[j] - onehot) + pr[j] * (dp[j] - dot);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> loss_total(Tape<T>& tape, const LossTerms<T>& terms) {
  Tensor<T> total = ops::add(tape, terms.prob, terms.dist);
  if (terms.sap.defined()) total = ops::add(tape, total, terms.sap);
  if (terms.cls.defined()) total = ops::add(tape, total, terms.cls);
  return total;
}

template <typename T>
LossTerms<T> compute_losses(Tape<T>& tape, const HeadOutputs<T>& out, const GroundTruthBundle& gt,
                            int samples, const TransformModel<T>* sap_encoder,
                            const std::vector<std::uint8_t>* class_mask) {
  const Tensor<T> d_gt = as<T>(gt.distances);
  const Tensor<T> p_gt = as<T>(gt.probability);
  LossTerms<T> terms;
  terms.prob = loss_prob(tape, out.probability, p_gt);
  const bool refine = samples > 0 && out.refined.defined();
  terms.dist = refine ? loss_dist_refined(tape, out.distances, out.refined, d_gt, p_gt)
                      : loss_dist(tape, out.distances, d_gt, p_gt);
  if (sap_encoder) {
    const Tensor<T>& refined = refine ? out.refined : out.distances;
    terms.sap = loss_sap(tape, out.distances, refined, out.probability, d_gt, p_gt, *sap_encoder);
  }
  if (class_mask) {
    require(out.class_logits.defined(), "compute_losses: class mask given but no class head");
    terms.cls = loss_class(tape, out.class_logits, *class_mask);
  }
  terms.total = loss_total(tape, terms);
  return terms;
}

#define STARPOLY_INSTANTIATE_LOSSES(T)                                                            \
  template Tensor<T> loss_prob(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> loss_dist(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> loss_dist_refined(Tape<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                       const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> feature_l1(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> loss_sap(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                              const Tensor<T>&, const Tensor<T>&, const TransformModel<T>&);      \
  template Tensor<T> loss_class(Tape<T>&, const Tensor<T>&, const std::vector<std::uint8_t>&);    \
  template Tensor<T> loss_total(Tape<T>&, const LossTerms<T>&);                                   \
  template LossTerms<T> compute_losses(Tape<T>&, const HeadOutputs<T>&, const GroundTruthBundle&, \
                                       int, const TransformModel<T>*,                             \
                                       const std::vector<std::uint8_t>*);

STARPOLY_INSTANTIATE_LOSSES(float)
STARPOLY_INSTANTIATE_LOSSES(double)

}  // namespace starpoly
