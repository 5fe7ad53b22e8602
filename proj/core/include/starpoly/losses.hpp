#pragma once

#include <cstdint>
#include <optional>

#include "starpoly/model.hpp"
#include "starpoly/transform_model.hpp"

namespace starpoly {

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy over all pixels; predictions are clamped to
/// [1e-7, 1 - 1e-7].
template <typename T>
Tensor<T> loss_prob(Tape<T>& tape, const Tensor<T>& probability, const Tensor<T>& target);

/// (1 / (K |Omega|)) sum_{x,y,k} P_gt |D_gt - D|.
template <typename T>
Tensor<T> loss_dist(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& target,
                    const Tensor<T>& weight);

/// Supervises both the initial and refined maps:
/// (1 / (K |Omega|)) sum P_gt (|D_gt - D| + |D_gt - D_r|).
template <typename T>
Tensor<T> loss_dist_refined(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& refined,
                            const Tensor<T>& target, const Tensor<T>& weight);

/// Mean over the feature grid of the channel-wise L1 norm of a - b.
template <typename T>
Tensor<T> feature_l1(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Shape-aware perceptual loss through a frozen transformation encoder:
/// feature_l1(f(D_gt,P_gt), f(D,P)) + feature_l1(f(D_gt,P_gt), f(D_r,P)).
template <typename T>
Tensor<T> loss_sap(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& refined,
                   const Tensor<T>& probability, const Tensor<T>& target_distances,
                   const Tensor<T>& target_probability, const TransformModel<T>& encoder);

/// Pixel-mean softmax cross-entropy plus soft Dice loss (1 - mean Dice over the
/// foreground classes present in the target). class_mask holds 0..C per pixel.
template <typename T>
Tensor<T> loss_class(Tape<T>& tape, const Tensor<T>& logits, const std::vector<std::uint8_t>& class_mask);

template <typename T>
struct LossTerms {
  Tensor<T> prob;
  Tensor<T> dist;  // loss_dist when N = 0, otherwise loss_dist_refined
  Tensor<T> sap;   // undefined without a transformation model
  Tensor<T> cls;   // undefined without a class head
  Tensor<T> total;
};

/// Sum of the defined terms with equal weights.
template <typename T>
Tensor<T> loss_total(Tape<T>& tape, const LossTerms<T>& terms);

/// Every term for one image plus their sum. With N = 0 the distance term is the
/// single-map loss, so the objective reduces to L_prob + L_dist.
template <typename T>
LossTerms<T> compute_losses(Tape<T>& tape, const HeadOutputs<T>& out, const GroundTruthBundle& gt,
                            int samples, const TransformModel<T>* sap_encoder,
                            const std::vector<std::uint8_t>* class_mask);

}  // namespace starpoly
