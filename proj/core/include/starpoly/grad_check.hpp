#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "starpoly/tensor.hpp"

namespace starpoly {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator so
  /// that entries with vanishing gradient are judged on absolute error. The
  /// rounding error of the difference quotient, 8 eps |f| / step, is
  /// subtracted from the numerator first.
  double floor = 1e-6;
  /// Entries probed per input tensor; 0 probes all of them.
  std::size_t max_probes_per_input = 0;
  std::uint64_t seed = 0x5eed;
  /// When the forward and backward one-sided slopes differ by more than the
  /// tolerance relative to their size and by more than rounding explains, the probe is repeated at a quarter of
  /// the step. Smaller gaps cannot move the central difference past the
  /// tolerance. A gap that does not shrink marks a point where the function is
  /// not differentiable (relu, |x|, clamps, bilinear cell edges) and the probe
  /// is skipped; otherwise the smaller step's central difference is scored.
  bool skip_kinks = true;
  /// The check fails when more than this fraction of probes are kinks.
  double max_kink_fraction = 0.25;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t probes = 0;  // scored probes
  std::size_t kinks = 0;   // probes skipped as non-differentiable
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  bool passed = false;

  std::string summary() const;
};

using DifferentiableFn =
    std::function<Tensor<double>(Tape<double>&, const std::vector<Tensor<double>>&)>;

/// Compares reverse-mode gradients of f against central differences.
///
/// f may return a tensor of any shape; it is contracted with a fixed random
/// weight vector so every output element participates. The inputs must
/// require grad; their gradients are overwritten.
GradCheckReport grad_check(const DifferentiableFn& f, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& options = {});

}  // namespace starpoly
