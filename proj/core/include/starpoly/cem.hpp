#pragma once

#include <string>
#include <vector>

#include "starpoly/geometry.hpp"
#include "starpoly/tensor.hpp"

namespace starpoly {

/// How the N+1 sampled distance predictions along a ray are fused.
enum class Weighting {
  Equal,  // w_n = 1/(N+1)
  Naive,  // softmax of one trainable (N+1)-vector shared by all pixels and rays
  Cwm,    // softmax of a shared 1x1 conv over the N+1 sampled confidences
};

std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& name);

/// Points n = 0..N along ray k from (x, y) toward the predicted boundary at
/// distance d: (x + (n/N) d cos theta_k, y + (n/N) d sin theta_k). For N = 0
/// only the origin.
std::vector<Point> sample_coords(int x, int y, double d, int k, const RaySet& rays, int samples);

/// Fusion parameters. Only the tensors of the active strategy are used.
template <typename T>
struct CemWeights {
  Weighting mode = Weighting::Equal;
  Tensor<T> cwm_kernel;    // [N+1 (sampled point), N+1 (output logit)]
  Tensor<T> cwm_bias;      // [N+1]
  Tensor<T> naive_logits;  // [N+1]
};

/// Refined distances D_r from initial distances D [H,W,K] and confidences
/// C [H,W,K]:
///
///   D_r_k(x,y) = sum_n w_n * (D_k(x_k^n, y_k^n) + (n/N) D_k(x,y))
///
/// with samples read by border-clamped bilinear interpolation of channel k.
/// N = 0 returns D itself. Sampling coordinates depend on D; gradients flow
/// through them only when coord_grad is set.
template <typename T>
Tensor<T> cem_refine(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& confidence,
                     int samples, const CemWeights<T>& weights, bool coord_grad = false);

/// Fusion weights [H,W,K,N+1] the refinement would use (no gradient).
template <typename T>
Tensor<T> cem_fusion_weights(const Tensor<T>& distances, const Tensor<T>& confidence, int samples,
                             const CemWeights<T>& weights);

}  // namespace starpoly
