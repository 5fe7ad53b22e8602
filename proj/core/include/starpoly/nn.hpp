#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "starpoly/ops.hpp"
#include "starpoly/tensor.hpp"

namespace starpoly::nn {

/// Ordered collection of named trainable tensors. Order is creation order and
/// is what checkpoints and optimizer state follow.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(std::string name, Tensor<T> value);

  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
  Tensor<T> get(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Drops gradient tracking from every parameter. Irreversible by design of
  /// the callers: frozen models stay frozen.
  void freeze();
  bool frozen() const { return frozen_; }

  /// Copies values from another store with identical names and shapes.
  void assign(const ParamStore& other);

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  bool frozen_ = false;
};

/// Largest group count <= 8 that divides channels and leaves >= 2 channels
/// per group (1 when no such count exists).
int default_groups(int channels);

template <typename T>
struct Conv {
  Tensor<T> kernel;  // [kh,kw,Cin,Cout]
  Tensor<T> bias;    // [Cout]

  Tensor<T> operator()(Tape<T>& tape, const Tensor<T>& x) const {
    return ops::conv2d(tape, x, kernel, bias, 1, ops::Padding::Same);
  }
};

template <typename T>
struct GroupNorm {
  Tensor<T> gain;
  Tensor<T> shift;
  int groups = 1;

  Tensor<T> operator()(Tape<T>& tape, const Tensor<T>& x) const {
    return ops::group_norm(tape, x, groups, gain, shift);
  }
};

/// conv3x3 -> group norm -> relu.
template <typename T>
struct ConvNormRelu {
  Conv<T> conv;
  GroupNorm<T> norm;

  Tensor<T> operator()(Tape<T>& tape, const Tensor<T>& x) const {
    return ops::activation(tape, norm(tape, conv(tape, x)), ops::Activation::Relu);
  }
};

/// Deterministic parameter factory: He-normal kernels, zero biases, unit gains.
template <typename T>
class Initializer {
 public:
  Initializer(ParamStore<T>& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Conv<T> conv(const std::string& name, int kernel_size, int cin, int cout, double gain = 2.0);
  GroupNorm<T> norm(const std::string& name, int channels);
  ConvNormRelu<T> block(const std::string& name, int cin, int cout);
  Tensor<T> tensor(const std::string& name, Shape shape, double stddev);

 private:
  ParamStore<T>& store_;
  std::mt19937_64 rng_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Initializer<float>;
extern template class Initializer<double>;

}  // namespace starpoly::nn
