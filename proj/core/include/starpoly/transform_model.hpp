#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starpoly/encode.hpp"
#include "starpoly/nn.hpp"

namespace starpoly {

/// What the transformation model learns to produce from (D_gt, P_gt).
enum class SapTargetMode {
  SegBnd,  // semantic segmentation + boundary maps, 2 channels, BCE
  BBox,    // centroid offset + bbox edge distances, 6 channels, L1 on foreground
  Both,    // SegBnd and BBox, 8 channels
  Recons,  // reconstruct the K+1 input channels, L1
};

std::string to_string(SapTargetMode mode);
SapTargetMode sap_mode_from_string(const std::string& name);
int sap_output_channels(SapTargetMode mode, int rays);

struct TransformConfig {
  int rays = 32;
  SapTargetMode mode = SapTargetMode::Both;
  int levels = 4;
  int base_channels = 8;

  int divisor() const { return 1 << levels; }
};

/// Encoder-decoder without skip connections mapping [H,W,K+1] = (D, P) to
/// the target representation of its mode. After training it is frozen and
/// only its encoder is used as a fixed feature extractor.
template <typename T>
class TransformModel {
 public:
  TransformModel(const TransformConfig& config, std::uint64_t seed);

  const TransformConfig& config() const { return config_; }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

  /// Concatenates distances [H,W,K] and probability [H,W] into the model input.
  static Tensor<T> make_input(Tape<T>& tape, const Tensor<T>& distances,
                              const Tensor<T>& probability);

  /// Deepest feature map, [H/2^levels, W/2^levels, base*2^levels].
  Tensor<T> encode(Tape<T>& tape, const Tensor<T>& input) const;
  /// Raw decoder output (logits for segmentation channels).
  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& input) const;

  /// Training objective of the configured mode.
  Tensor<T> target_loss(Tape<T>& tape, const Tensor<T>& output, const Tensor<T>& input,
                        const GroundTruthBundle& gt) const;

  void freeze() { params_.freeze(); }
  bool frozen() const { return params_.frozen(); }

 private:
  struct Block {
    nn::ConvNormRelu<T> first, second;
  };

  TransformConfig config_;
  nn::ParamStore<T> params_;
  std::vector<Block> down_;
  Block bottom_;
  std::vector<Block> up_;
  nn::Conv<T> head_;
};

extern template class TransformModel<float>;
extern template class TransformModel<double>;

}  // namespace starpoly
