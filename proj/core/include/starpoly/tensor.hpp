#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "starpoly/errors.hpp"

namespace starpoly {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor with an optional gradient accumulator.
///
/// Tensor is a shared handle: copies alias the same storage. This is what lets
/// a parameter live across many computation records while its gradient keeps
/// accumulating. Use clone() for an independent copy.
///
/// The gradient buffer exists iff requires_grad() is set, and always has the
/// same shape as the values.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T value, bool requires_grad = false);
  static Tensor filled(Shape shape, T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return s_->shape.at(axis); }
  std::size_t numel() const { return s_->values.size(); }

  T* data() { return s_->values.data(); }
  const T* data() const { return s_->values.data(); }
  std::span<T> values() { return s_->values; }
  std::span<const T> values() const { return s_->values; }
  T& operator[](std::size_t i) { return s_->values[i]; }
  const T& operator[](std::size_t i) const { return s_->values[i]; }
  T item() const;

  bool requires_grad() const { return s_ && s_->requires_grad; }
  void set_requires_grad(bool flag);
  // The gradient is an accumulator owned by the shared storage, so it stays
  // writable through const handles (adjoint closures capture by value).
  std::span<T> grad() const { return s_->grad; }
  T* grad_data() const { return s_->grad.data(); }
  void zero_grad();

  /// Copy of the values with no gradient and no aliasing.
  Tensor clone() const;
  Tensor detach() const { return clone(); }
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

/// The computation record: executed differentiable operations in execution
/// order, each with the closure that propagates its output gradient back to
/// its inputs. Execution order is a topological order, so replaying it
/// backwards visits every node after all of its consumers.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  /// True when an op with these inputs must produce a differentiable output.
  template <typename... Ts>
  bool tracks(const Ts&... inputs) const {
    return recording_ && (inputs.requires_grad() || ...);
  }

  void record(const Tensor<T>& output, std::function<void()> adjoint);

  /// Seeds d(root)/d(root) = 1 and replays the record backwards. Gradients of
  /// intermediate outputs are recomputed from zero each call; leaf gradients
  /// accumulate.
  void backward(const Tensor<T>& root);

  std::size_t size() const { return nodes_.size(); }
  /// Number of adjoints executed by the most recent backward().
  std::size_t replayed() const { return replayed_; }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> output;
    std::function<void()> adjoint;
  };
  std::vector<Node> nodes_;
  bool recording_;
  std::size_t replayed_ = 0;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

/// Converts values between precisions; the result never requires grad.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) out[i] = static_cast<To>(t[i]);
  return out;
}

}  // namespace starpoly
