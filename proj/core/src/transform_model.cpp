#include "starpoly/transform_model.hpp"

#include "starpoly/losses.hpp"

namespace starpoly {

std::string to_string(SapTargetMode mode) {
  switch (mode) {
    case SapTargetMode::SegBnd: return "seg_bnd";
    case SapTargetMode::BBox: return "bbox";
    case SapTargetMode::Both: return "both";
    case SapTargetMode::Recons: return "recons";
  }
  return "?";
}

SapTargetMode sap_mode_from_string(const std::string& name) {
  if (name == "seg_bnd") return SapTargetMode::SegBnd;
  if (name == "bbox") return SapTargetMode::BBox;
  if (name == "both") return SapTargetMode::Both;
  if (name == "recons") return SapTargetMode::Recons;
  throw ConfigError("unknown SAP target mode '" + name + "' (expected seg_bnd|bbox|both|recons)");
}

int sap_output_channels(SapTargetMode mode, int rays) {
  switch (mode) {
    case SapTargetMode::SegBnd: return 2;
    case SapTargetMode::BBox: return 6;
    case SapTargetMode::Both: return 8;
    case SapTargetMode::Recons: return rays + 1;
  }
  return 0;
}

template <typename T>
TransformModel<T>::TransformModel(const TransformConfig& config, std::uint64_t seed)
    : config_(config) {
  if (config_.levels < 1 || config_.base_channels < 1 || config_.rays < 3)
    throw ConfigError("transform model: levels, base_channels >= 1 and rays >= 3 required");
  nn::Initializer<T> init(params_, seed);
  int cin = config_.rays + 1;
  for (int l = 0; l < config_.levels; ++l) {
    const int c = config_.base_channels << l;
    const std::string name = "enc" + std::to_string(l);
    down_.push_back({init.block(name + ".a", cin, c), init.block(name + ".b", c, c)});
    cin = c;
  }
  const int bottom_c = config_.base_channels << config_.levels;
  bottom_ = {init.block("bottom.a", cin, bottom_c), init.block("bottom.b", bottom_c, bottom_c)};
  cin = bottom_c;
  for (int l = config_.levels - 1; l >= 0; --l) {
    const int c = config_.base_channels << l;
    const std::string name = "dec" + std::to_string(l);
    up_.push_back({init.block(name + ".a", cin, c), init.block(name + ".b", c, c)});
    cin = c;
  }
  head_ = init.conv("head", 1, cin, sap_output_channels(config_.mode, config_.rays), 1.0);
}

template <typename T>
Tensor<T> TransformModel<T>::make_input(Tape<T>& tape, const Tensor<T>& distances,
                                        const Tensor<T>& probability) {
  require(distances.rank() == 3 && probability.rank() == 2 &&
              probability.dim(0) == distances.dim(0) && probability.dim(1) == distances.dim(1),
          "transform input: distances [H,W,K] and probability [H,W] must align");
  Tensor<T> p = ops::reshape(tape, probability, Shape{probability.dim(0), probability.dim(1), 1});
  return ops::concat_channels(tape, distances, p);
}

template <typename T>
Tensor<T> TransformModel<T>::encode(Tape<T>& tape, const Tensor<T>& input) const {
  require(input.rank() == 3 && input.dim(2) == static_cast<std::size_t>(config_.rays + 1),
          "transform encoder: input must be [H,W,K+1], got " + shape_to_string(input.shape()));
  const auto div = static_cast<std::size_t>(config_.divisor());
  require(input.dim(0) % div == 0 && input.dim(1) % div == 0,
          "transform encoder: dims not divisible by " + std::to_string(div));
  Tensor<T> x = input;
  for (const auto& b : down_) x = ops::maxpool2(tape, b.second(tape, b.first(tape, x)));
  return bottom_.second(tape, bottom_.first(tape, x));
}

template <typename T>
Tensor<T> TransformModel<T>::forward(Tape<T>& tape, const Tensor<T>& input) const {
  Tensor<T> x = encode(tape, input);
  for (const auto& b : up_) x = b.second(tape, b.first(tape, ops::upsample2(tape, x)));
  return head_(tape, x);
}

namespace {

template <typename T>
Tensor<T> as(const Tensor<float>& t) {
  if constexpr (std::is_same_v<T, float>) {
    return t;
  } else {
    return tensor_cast<T>(t);
  }
}

template <typename T>
Tensor<T> seg_bnd_loss(Tape<T>& tape, const Tensor<T>& logits, const GroundTruthBundle& gt) {
  Tensor<T> probs = ops::activation(tape, logits, ops::Activation::Sigmoid);
  Tape<T> constants(false);
  const Shape plane{gt.seg.dim(0), gt.seg.dim(1), 1};
  Tensor<T> target = ops::concat_channels(constants, ops::reshape(constants, as<T>(gt.seg), plane),
                                          ops::reshape(constants, as<T>(gt.bnd), plane));
  return loss_prob(tape, probs, target);
}

template <typename T>
Tensor<T> bbox_loss(Tape<T>& tape, const Tensor<T>& pred, const GroundTruthBundle& gt) {
  double fg = 0;
  for (float v : gt.seg.values()) fg += v;
  const T norm = static_cast<T>(static_cast<double>(gt.seg.numel()) / std::max(fg, 1.0));
  return ops::scale(tape, loss_dist(tape, pred, as<T>(gt.bbox), as<T>(gt.seg)), norm);
}

}  // namespace

template <typename T>
Tensor<T> TransformModel<T>::target_loss(Tape<T>& tape, const Tensor<T>& output,
                                         const Tensor<T>& input, const GroundTruthBundle& gt) const {
  switch (config_.mode) {
    case SapTargetMode::SegBnd:
      return seg_bnd_loss(tape, output, gt);
    case SapTargetMode::BBox:
      return bbox_loss(tape, output, gt);
    case SapTargetMode::Both:
      return ops::add(tape, seg_bnd_loss(tape, ops::slice_channels(tape, output, 0, 2), gt),
                      bbox_loss(tape, ops::slice_channels(tape, output, 2, 8), gt));
    case SapTargetMode::Recons: {
      Tensor<T> ones = Tensor<T>::filled(Shape{input.dim(0), input.dim(1)}, T(1));
      return loss_dist(tape, output, input.detach(), ones);
    }
  }
  throw ContractViolation("transform model: unknown mode");
}

template class TransformModel<float>;
template class TransformModel<double>;

}  // namespace starpoly
