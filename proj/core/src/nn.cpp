#include "starpoly/nn.hpp"

#include <cmath>

namespace starpoly::nn {

template <typename T>
Tensor<T> ParamStore<T>::add(std::string name, Tensor<T> value) {
  for (const auto& [existing, _] : entries_)
    require(existing != name, "ParamStore: duplicate parameter name " + name);
  value.set_requires_grad(!frozen_);
  entries_.emplace_back(std::move(name), value);
  return value;
}

template <typename T>
Tensor<T> ParamStore<T>::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractViolation("ParamStore: no parameter named " + name);
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, t] : entries_)
    if (t.requires_grad()) t.zero_grad();
}

template <typename T>
void ParamStore<T>::freeze() {
  for (auto& [_, t] : entries_) t.set_requires_grad(false);
  frozen_ = true;
}

template <typename T>
void ParamStore<T>::assign(const ParamStore& other) {
  require(other.entries_.size() == entries_.size(), "ParamStore: parameter count mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& [name, dst] = entries_[i];
    const auto& [oname, src] = other.entries_[i];
    require(name == oname && dst.shape() == src.shape(),
            "ParamStore: mismatch at " + name + " vs " + oname);
    std::copy(src.values().begin(), src.values().end(), dst.values().begin());
  }
}

int default_groups(int channels) {
  for (int g = 8; g >= 2; --g)
    if (channels % g == 0 && channels / g >= 2) return g;
  return 1;
}

template <typename T>
Tensor<T> Initializer<T>::tensor(const std::string& name, Shape shape, double stddev) {
  Tensor<T> t(std::move(shape));
  if (stddev > 0) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& v : t.values()) v = static_cast<T>(normal(rng_));
  }
  return store_.add(name, t);
}

template <typename T>
Conv<T> Initializer<T>::conv(const std::string& name, int kernel_size, int cin, int cout,
                             double gain) {
  const auto k = static_cast<std::size_t>(kernel_size);
  const double fan_in = static_cast<double>(kernel_size * kernel_size * cin);
  Conv<T> c;
  c.kernel = tensor(name + ".kernel",
                    Shape{k, k, static_cast<std::size_t>(cin), static_cast<std::size_t>(cout)},
                    std::sqrt(gain / fan_in));
  c.bias = tensor(name + ".bias", Shape{static_cast<std::size_t>(cout)}, 0.0);
  return c;
}

template <typename T>
GroupNorm<T> Initializer<T>::norm(const std::string& name, int channels) {
  GroupNorm<T> n;
  const Shape shape{static_cast<std::size_t>(channels)};
  n.gain = store_.add(name + ".gain", Tensor<T>::filled(shape, T(1)));
  n.shift = store_.add(name + ".shift", Tensor<T>(shape));
  n.groups = default_groups(channels);
  return n;
}

template <typename T>
ConvNormRelu<T> Initializer<T>::block(const std::string& name, int cin, int cout) {
  ConvNormRelu<T> b;
  b.conv = conv(name + ".conv", 3, cin, cout);
  b.norm = norm(name + ".norm", cout);
  return b;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Initializer<float>;
template class Initializer<double>;

}  // namespace starpoly::nn
