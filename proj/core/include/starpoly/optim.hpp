#pragma once

#include <cstddef>
#include <vector>

#include "starpoly/nn.hpp"

namespace starpoly {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over every trainable tensor of a parameter store. A frozen store
/// contributes no state and step() leaves it untouched.
template <typename T>
class Adam {
 public:
  Adam(nn::ParamStore<T>& params, double lr, AdamConfig config = {});

  /// Applies one update from the accumulated gradients, then clears them.
  void step();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::size_t steps() const { return t_; }

 private:
  struct Slot {
    Tensor<T> param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_;
  AdamConfig config_;
  std::size_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

struct PlateauConfig {
  double initial_lr = 1e-4;
  double factor = 0.5;
  int patience = 10;  // epochs without validation improvement before decaying
  double min_lr = 1e-7;
};

/// Learning-rate decay on validation plateaus. After `patience` consecutive
/// epochs without a strictly lower validation loss the rate is multiplied by
/// `factor`; training ends once it drops below `min_lr`.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(PlateauConfig config);

  /// Feeds one epoch's validation loss. Returns true when the loss is a new best.
  bool observe(double validation_loss);

  double lr() const { return lr_; }
  bool finished() const { return lr_ < config_.min_lr; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_; }

 private:
  PlateauConfig config_;
  double lr_;
  double best_;
  int bad_ = 0;
};

}  // namespace starpoly
