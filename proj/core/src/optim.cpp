#include "starpoly/optim.hpp"

#include <cmath>
#include <limits>

namespace starpoly {

template <typename T>
Adam<T>::Adam(nn::ParamStore<T>& params, double lr, AdamConfig config)
    : lr_(lr), config_(config) {
  if (params.frozen()) return;
  for (const auto& [_, t] : params.entries()) {
    if (!t.requires_grad()) continue;
    slots_.push_back({t, std::vector<double>(t.numel(), 0.0), std::vector<double>(t.numel(), 0.0)});
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1 - std::pow(b2, static_cast<double>(t_));
  for (auto& s : slots_) {
    T* p = s.param.data();
    T* g = s.param.grad_data();
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      const double gi = g[i];
      s.m[i] = b1 * s.m[i] + (1 - b1) * gi;
      s.v[i] = b2 * s.v[i] + (1 - b2) * gi * gi;
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      p[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + config_.epsilon));
      g[i] = T(0);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

PlateauSchedule::PlateauSchedule(PlateauConfig config)
    : config_(config), lr_(config.initial_lr), best_(std::numeric_limits<double>::infinity()) {
  if (!(config_.initial_lr > 0) || !(config_.factor > 0 && config_.factor < 1) ||
      config_.patience < 1 || !(config_.min_lr > 0))
    throw ConfigError("optimizer: need initial_lr > 0, 0 < lr_decay < 1, patience >= 1, min_lr > 0");
}

bool PlateauSchedule::observe(double validation_loss) {
  if (validation_loss < best_) {
    best_ = validation_loss;
    bad_ = 0;
    return true;
  }
  if (++bad_ >= config_.patience) {
    lr_ *= config_.factor;
    bad_ = 0;
  }
  return false;
}

}  // namespace starpoly
