#include "starpoly/model.hpp"

#include <cmath>

namespace starpoly {

void BackboneConfig::validate() const {
  if (levels < 1) throw ConfigError("backbone: levels must be >= 1");
  if (base_channels < 1) throw ConfigError("backbone: base_channels must be >= 1");
  if (rays < 3) throw ConfigError("backbone: rays must be >= 3");
  if (samples < 0) throw ConfigError("backbone: samples must be >= 0");
  if (class_count < 0) throw ConfigError("backbone: class_count must be >= 0");
  if (in_channels < 1) throw ConfigError("backbone: in_channels must be >= 1");
}

namespace {
// Initial softplus output of the distance head, in pixels.
constexpr double kInitialDistance = 4.0;
}  // namespace

template <typename T>
StarNet<T>::StarNet(const BackboneConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Initializer<T> init(params_, seed);
  int cin = config_.in_channels;
  for (int l = 0; l < config_.levels; ++l) {
    const int c = config_.base_channels << l;
    const std::string name = "down" + std::to_string(l);
    down_.push_back({init.block(name + ".a", cin, c), init.block(name + ".b", c, c)});
    cin = c;
  }
  const int bottom_c = config_.base_channels << config_.levels;
  bottom_ = {init.block("bottom.a", cin, bottom_c), init.block("bottom.b", bottom_c, bottom_c)};
  cin = bottom_c;
  for (int l = config_.levels - 1; l >= 0; --l) {
    const int c = config_.base_channels << l;
    const std::string name = "up" + std::to_string(l);
    UpLevel u;
    u.up = init.conv(name + ".up", 3, cin, c);
    u.first = init.block(name + ".a", 2 * c, c);
    u.second = init.block(name + ".b", c, c);
    up_.push_back(u);
    cin = c;
  }
  const int feat = config_.base_channels;
  head_distance_ = init.conv("head.distance", 1, feat, config_.rays, 1.0);
  for (auto& b : head_distance_.bias.values())
    b = static_cast<T>(std::log(std::expm1(kInitialDistance)));
  head_confidence_ = init.conv("head.confidence", 1, feat, config_.rays, 1.0);
  head_probability_ = init.conv("head.probability", 1, feat, 1, 1.0);
  if (config_.class_count > 0) {
    class_block_ = init.block("class.a", feat, feat);
    class_head_ = init.conv("class.head", 1, feat, config_.class_count + 1, 1.0);
  }

  cem_.mode = config_.weighting;
  if (config_.samples > 0) {
    const auto n1 = static_cast<std::size_t>(config_.samples + 1);
    if (config_.weighting == Weighting::Naive) {
      cem_.naive_logits = init.tensor("cem.naive", Shape{n1}, 0.0);
    } else if (config_.weighting == Weighting::Cwm) {
      cem_.cwm_kernel = init.tensor("cem.cwm.kernel", Shape{n1, n1}, 0.0);
      cem_.cwm_bias = init.tensor("cem.cwm.bias", Shape{n1}, 0.0);
    }
  }
}

template <typename T>
Tensor<T> StarNet<T>::features(Tape<T>& tape, const Tensor<T>& image) const {
  require(image.rank() == 3 && image.dim(2) == static_cast<std::size_t>(config_.in_channels),
          "StarNet: image must be [H,W," + std::to_string(config_.in_channels) + "], got " +
              shape_to_string(image.shape()));
  const auto div = static_cast<std::size_t>(config_.divisor());
  require(image.dim(0) % div == 0 && image.dim(1) % div == 0,
          "StarNet: image dims " + shape_to_string(image.shape()) + " not divisible by " +
              std::to_string(div));
  std::vector<Tensor<T>> skips;
  Tensor<T> x = image;
  for (const auto& level : down_) {
    x = level.second(tape, level.first(tape, x));
    skips.push_back(x);
    x = ops::maxpool2(tape, x);
  }
  x = bottom_.second(tape, bottom_.first(tape, x));
  for (std::size_t i = 0; i < up_.size(); ++i) {
    const auto& level = up_[i];
    x = level.up(tape, ops::upsample2(tape, x));
    x = ops::concat_channels(tape, x, skips[skips.size() - 1 - i]);
    x = level.second(tape, level.first(tape, x));
  }
  return x;
}

template <typename T>
HeadOutputs<T> StarNet<T>::heads(Tape<T>& tape, const Tensor<T>& feat) const {
  HeadOutputs<T> out;
  out.distances = ops::activation(tape, head_distance_(tape, feat), ops::Activation::Softplus);
  out.confidence = head_confidence_(tape, feat);
  Tensor<T> prob = ops::activation(tape, head_probability_(tape, feat), ops::Activation::Sigmoid);
  out.probability = ops::reshape(tape, prob, Shape{feat.dim(0), feat.dim(1)});
  if (config_.class_count > 0) out.class_logits = class_head_forward(tape, feat);
  return out;
}

template <typename T>
HeadOutputs<T> StarNet<T>::backbone_forward(Tape<T>& tape, const Tensor<T>& image) const {
  return heads(tape, features(tape, image));
}

template <typename T>
Tensor<T> StarNet<T>::class_head_forward(Tape<T>& tape, const Tensor<T>& feat) const {
  require(config_.class_count > 0, "StarNet: class head is not configured");
  return class_head_(tape, class_block_(tape, feat));
}

template <typename T>
HeadOutputs<T> StarNet<T>::forward(Tape<T>& tape, const Tensor<T>& image) const {
  HeadOutputs<T> out = backbone_forward(tape, image);
  out.refined = cem_refine(tape, out.distances, out.confidence, config_.samples, cem_,
                           config_.coord_grad);
  return out;
}

template class StarNet<float>;
template class StarNet<double>;

}  // namespace starpoly
