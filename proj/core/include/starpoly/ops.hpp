#pragma once

#include <vector>

#include "starpoly/tensor.hpp"

/// Differentiable operations over HWC feature maps.
///
/// Every op computes its forward value eagerly and, when the tape is recording
/// and some input requires grad, records the adjoint. Shape errors throw
/// ContractViolation.
namespace starpoly::ops {

enum class Padding { Same, Valid };
enum class Activation { Relu, Sigmoid, Softplus };

/// Cross-correlation of input [H,W,Cin] with kernel [kh,kw,Cin,Cout] plus bias [Cout].
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride = 1, Padding padding = Padding::Same);

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& input, Activation kind);

/// Softmax over the last axis.
template <typename T>
Tensor<T> channel_softmax(Tape<T>& tape, const Tensor<T>& input);

/// Bilinear read of map [H,W] at coords [n,2] holding (x = column, y = row)
/// pairs. Coordinates are clamped to the image before interpolation. The
/// gradient reaches coords only when coord_grad is set.
template <typename T>
Tensor<T> bilinear_sample(Tape<T>& tape, const Tensor<T>& map, const Tensor<T>& coords,
                          bool coord_grad = false);

/// 2x2 max pooling with stride 2; H and W must be even.
template <typename T>
Tensor<T> maxpool2(Tape<T>& tape, const Tensor<T>& input);

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> upsample2(Tape<T>& tape, const Tensor<T>& input);

inline constexpr double kNormEpsilon = 1e-5;

/// Group normalization of [H,W,C] over (H, W, C/groups) followed by a
/// per-channel affine map.
template <typename T>
Tensor<T> group_norm(Tape<T>& tape, const Tensor<T>& input, int groups, const Tensor<T>& gain,
                     const Tensor<T>& shift);

/// Concatenation along the last axis of two tensors with equal leading dims.
template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Channels [begin, end) of the last axis.
template <typename T>
Tensor<T> slice_channels(Tape<T>& tape, const Tensor<T>& input, std::size_t begin,
                         std::size_t end);

/// Same values under a new shape with equal element count.
template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& input, Shape shape);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a);

/// Scalar sum_i weights[i] * a[i] with constant weights.
template <typename T>
Tensor<T> dot_const(Tape<T>& tape, const Tensor<T>& a, const std::vector<T>& weights);

/// Rotates an [H,W,...] tensor by quarter turns: output(x', y') = input(x, y)
/// with (x', y') = (H-1-y, x) per turn. Not differentiable (data augmentation).
template <typename T>
Tensor<T> rot90(const Tensor<T>& input, int quarter_turns);

/// Mirrors an [H,W,...] tensor left-right. Not differentiable.
template <typename T>
Tensor<T> hflip(const Tensor<T>& input);

}  // namespace starpoly::ops
