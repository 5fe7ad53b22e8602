#pragma once

#include <cstdint>
#include <vector>

#include "starpoly/cem.hpp"
#include "starpoly/nn.hpp"

namespace starpoly {

struct BackboneConfig {
  int levels = 3;          // down/up blocks of the U-Net
  int base_channels = 16;  // width of the first level; doubles per level
  int rays = 32;           // K
  int samples = 6;         // N sampled points per ray in the refinement
  Weighting weighting = Weighting::Cwm;
  bool coord_grad = false;
  int class_count = 0;  // nucleus categories; 0 disables the class head
  int in_channels = 1;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  int divisor() const { return 1 << levels; }

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

template <typename T>
struct HeadOutputs {
  Tensor<T> distances;     // D   [H,W,K], softplus >= 0
  Tensor<T> confidence;    // C   [H,W,K], unbounded
  Tensor<T> probability;   // P_c [H,W], sigmoid
  Tensor<T> refined;       // D_r [H,W,K]
  Tensor<T> class_logits;  // [H,W,class_count+1] when the class head is enabled
};

/// U-Net backbone with three 1x1 prediction heads (distances, confidences,
/// centroid probability), the distance refinement, and an optional per-pixel
/// class branch.
template <typename T>
class StarNet {
 public:
  StarNet(const BackboneConfig& config, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

  /// Decoder output [H,W,base_channels]. H and W must be divisible by 2^levels.
  Tensor<T> features(Tape<T>& tape, const Tensor<T>& image) const;

  /// D, C, P_c (and class logits when enabled); refined is left empty.
  HeadOutputs<T> backbone_forward(Tape<T>& tape, const Tensor<T>& image) const;

  Tensor<T> class_head_forward(Tape<T>& tape, const Tensor<T>& features) const;

  /// Backbone plus refinement.
  HeadOutputs<T> forward(Tape<T>& tape, const Tensor<T>& image) const;

  const CemWeights<T>& cem_weights() const { return cem_; }

 private:
  HeadOutputs<T> heads(Tape<T>& tape, const Tensor<T>& features) const;

  struct Level {
    nn::ConvNormRelu<T> first, second;
  };
  struct UpLevel {
    nn::Conv<T> up;  // conv applied after nearest-neighbour upsampling
    nn::ConvNormRelu<T> first, second;
  };

  BackboneConfig config_;
  nn::ParamStore<T> params_;
  std::vector<Level> down_;
  Level bottom_;
  std::vector<UpLevel> up_;
  nn::Conv<T> head_distance_, head_confidence_, head_probability_;
  nn::ConvNormRelu<T> class_block_;
  nn::Conv<T> class_head_;
  CemWeights<T> cem_;
};

extern template class StarNet<float>;
extern template class StarNet<double>;

}  // namespace starpoly
