#include "starpoly/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "starpoly/ops.hpp"

namespace starpoly {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error << " probes=" << probes
     << " kinks=" << kinks
     << " worst=(input " << worst_input << ", index " << worst_index
     << ", analytic " << worst_analytic << ", numeric " << worst_numeric << ")";
  return os.str();
}

GradCheckReport grad_check(const DifferentiableFn& f, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& options) {
  for (const auto& in : inputs) require(in.requires_grad(), "grad_check: inputs must require grad");

  std::mt19937_64 rng(options.seed);
  std::vector<double> weights;
  auto contract = [&](Tape<double>& tape) {
    Tensor<double> out = f(tape, inputs);
    if (weights.empty()) {
      std::uniform_real_distribution<double> u(0.5, 1.5);
      weights.resize(out.numel());
      for (auto& w : weights) w = u(rng);
    }
    return ops::dot_const(tape, out, weights);
  };

  for (auto& in : inputs) in.zero_grad();
  {
    Tape<double> tape;
    Tensor<double> loss = contract(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& in : inputs) analytic.emplace_back(in.grad().begin(), in.grad().end());

  auto evaluate = [&]() {
    Tape<double> tape(false);
    return contract(tape).item();
  };

  const double base = evaluate();
  GradCheckReport report;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor<double> in = inputs[t];
    std::vector<std::size_t> indices(in.numel());
    std::iota(indices.begin(), indices.end(), 0);
    if (options.max_probes_per_input > 0 && indices.size() > options.max_probes_per_input) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.max_probes_per_input);
      std::sort(indices.begin(), indices.end());
    }
    for (std::size_t i : indices) {
      const double saved = in[i];
      auto slopes = [&](double h) {
        in[i] = saved + h;
        const double up = evaluate();
        in[i] = saved - h;
        const double down = evaluate();
        in[i] = saved;
        return std::pair{(up - base) / h, (base - down) / h};
      };
      auto [fwd, bwd] = slopes(options.step);
      double numeric = 0.5 * (fwd + bwd);
      double used_step = options.step;
      if (options.skip_kinks) {
        const double size = std::max({std::abs(fwd), std::abs(bwd), options.floor});
        const double jump = std::abs(fwd - bwd);
        // Rounding in f alone moves a one-sided slope by about eps |f| / step.
        const double noise = 16 * std::numeric_limits<double>::epsilon() * std::abs(base) / options.step;
        if (jump > std::max(options.tolerance * size, noise)) {
          // Smooth curvature makes the jump shrink with the step, a kink at
          // the probed point does not.
          const auto [f4, b4] = slopes(options.step / 4);
          if (std::abs(f4 - b4) > 0.5 * jump) {
            ++report.kinks;
            continue;
          }
          numeric = 0.5 * (f4 + b4);
          used_step = options.step / 4;
        }
      }
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      // Rounding in the difference quotient is not gradient error.
      const double rounding = 8 * std::numeric_limits<double>::epsilon() * std::abs(base) / used_step;
      const double rel = std::max(0.0, std::abs(a - numeric) - rounding) / denom;
      ++report.probes;
      if (rel > report.max_rel_error || report.probes == 1) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        if (rel >= report.max_rel_error) {
          report.worst_input = t;
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  const double total = static_cast<double>(report.probes + report.kinks);
  report.passed = report.max_rel_error < options.tolerance && report.probes > 0 &&
                  static_cast<double>(report.kinks) <= options.max_kink_fraction * total;
  return report;
}

}  // namespace starpoly
