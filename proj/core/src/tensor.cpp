#include "starpoly/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace starpoly {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : s_(std::make_shared<Storage>()) {
  s_->values.assign(shape_numel(shape), T(0));
  s_->shape = std::move(shape);
  set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : s_(std::make_shared<Storage>()) {
  require(shape_numel(shape) == values.size(),
          "tensor: " + std::to_string(values.size()) + " values do not fill shape " +
              shape_to_string(shape));
  s_->shape = std::move(shape);
  s_->values = std::move(values);
  set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, "tensor: item() on tensor of shape " + shape_to_string(shape()));
  return s_->values[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  s_->requires_grad = flag;
  if (flag) {
    s_->grad.assign(s_->values.size(), T(0));
  } else {
    s_->grad.clear();
    s_->grad.shrink_to_fit();
  }
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(s_->grad.begin(), s_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(s_->shape, s_->values, false);
}

template <typename T>
void Tape<T>::record(const Tensor<T>& output, std::function<void()> adjoint) {
  nodes_.push_back(Node{output, std::move(adjoint)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& root) {
  require(root.defined() && root.numel() == 1, "backward: root must be a scalar");
  require(root.requires_grad(), "backward: root does not depend on any differentiable input");
  for (auto& node : nodes_) node.output.zero_grad();
  Tensor<T> seed = root;
  seed.grad()[0] += T(1);
  replayed_ = 0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->adjoint();
    ++replayed_;
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace starpoly
