#include "starpoly/cem.hpp"

#include <algorithm>
#include <cmath>

namespace starpoly {

std::string to_string(Weighting w) {
  switch (w) {
    case Weighting::Equal: return "equal";
    case Weighting::Naive: return "naive";
    case Weighting::Cwm: return "cwm";
  }
  return "?";
}

Weighting weighting_from_string(const std::string& name) {
  if (name == "equal") return Weighting::Equal;
  if (name == "naive") return Weighting::Naive;
  if (name == "cwm") return Weighting::Cwm;
  throw ConfigError("unknown weighting '" + name + "' (expected equal|naive|cwm)");
}

std::vector<Point> sample_coords(int x, int y, double d, int k, const RaySet& rays, int samples) {
  require(samples >= 0, "sample_coords: N must be >= 0");
  require(d >= 0, "sample_coords: distance must be >= 0");
  require(k >= 0 && k < rays.size(), "sample_coords: ray index out of range");
  std::vector<Point> out(static_cast<std::size_t>(samples) + 1);
  out[0] = {static_cast<double>(x), static_cast<double>(y)};
  for (int n = 1; n <= samples; ++n) {
    const double step = static_cast<double>(n) / samples * d;
    out[static_cast<std::size_t>(n)] = {x + step * rays.cos(k), y + step * rays.sin(k)};
  }
  return out;
}

namespace {

// Bilinear stencil on one [H,W] plane.
template <typename T>
struct Stencil {
  std::size_t i00, i01, i10, i11;
  T fx, fy;
  bool clamped_x, clamped_y;

  T value(const T* m) const {
    return (T(1) - fy) * ((T(1) - fx) * m[i00] + fx * m[i01]) +
           fy * ((T(1) - fx) * m[i10] + fx * m[i11]);
  }
  void scatter(T* dm, T g) const {
    dm[i00] += g * (T(1) - fy) * (T(1) - fx);
    dm[i01] += g * (T(1) - fy) * fx;
    dm[i10] += g * fy * (T(1) - fx);
    dm[i11] += g * fy * fx;
  }
  T dx(const T* m) const {
    return clamped_x ? T(0) : (T(1) - fy) * (m[i01] - m[i00]) + fy * (m[i11] - m[i10]);
  }
  T dy(const T* m) const {
    return clamped_y ? T(0) : (T(1) - fx) * (m[i10] - m[i00]) + fx * (m[i11] - m[i01]);
  }
};

template <typename T>
Stencil<T> locate(T x, T y, int h, int w) {
  const T cx = std::clamp(x, T(0), T(w - 1));
  const T cy = std::clamp(y, T(0), T(h - 1));
  const int x0 = std::min(static_cast<int>(cx), w - 1);
  const int y0 = std::min(static_cast<int>(cy), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  auto at = [&](int yy, int xx) { return static_cast<std::size_t>(yy) * w + xx; };
  return {at(y0, x0), at(y0, x1), at(y1, x0), at(y1, x1), cx - T(x0), cy - T(y0), cx != x,
          cy != y};
}

// [H,W,K] -> K planes of [H,W], so samples along a ray gather from one small plane.
template <typename T>
std::vector<T> to_planes(const T* src, int h, int w, int k_count) {
  std::vector<T> out(static_cast<std::size_t>(h) * w * k_count);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < plane; ++p)
    for (int k = 0; k < k_count; ++k) out[k * plane + p] = src[p * k_count + k];
  return out;
}

template <typename T>
void add_from_planes(T* dst, const std::vector<T>& planes, int h, int w, int k_count) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < plane; ++p)
    for (int k = 0; k < k_count; ++k) dst[p * k_count + k] += planes[k * plane + p];
}

// Per-(pixel, ray) evaluation shared by forward, backward and weight export.
template <typename T>
struct RayEval {
  int n1;
  std::vector<Stencil<T>> stencil;
  std::vector<T> frac, sampled, conf, w;

  explicit RayEval(int samples)
      : n1(samples + 1), stencil(n1), frac(n1), sampled(n1), conf(n1), w(n1) {
    for (int n = 0; n < n1; ++n) frac[n] = samples == 0 ? T(0) : T(n) / T(samples);
  }

  // dplane/cplane are the [H,W] planes of ray k. The forward pass skips
  // storing stencils, which only the backward pass needs.
  template <bool KeepStencils = true>
  void run(const T* dplane, const T* cplane, int x, int y, int k, int h, int wd,
           const RaySet& rays, const CemWeights<T>& weights, const std::vector<T>& naive_w) {
    const T d = dplane[static_cast<std::size_t>(y) * wd + x];
    const T c = static_cast<T>(rays.cos(k)), s = static_cast<T>(rays.sin(k));
    const bool cwm = weights.mode == Weighting::Cwm;
    for (int n = 0; n < n1; ++n) {
      const Stencil<T> st = locate<T>(T(x) + frac[n] * d * c, T(y) + frac[n] * d * s, h, wd);
      sampled[n] = st.value(dplane);
      if (cwm) conf[n] = st.value(cplane);
      if constexpr (KeepStencils) stencil[n] = st;
    }
    switch (weights.mode) {
      case Weighting::Equal:
        std::fill(w.begin(), w.end(), T(1) / T(n1));
        break;
      case Weighting::Naive:
        w = naive_w;
        break;
      case Weighting::Cwm: {
        const T* kern = weights.cwm_kernel.data();
        const T* bias = weights.cwm_bias.data();
        T top = -std::numeric_limits<T>::infinity();
        for (int m = 0; m < n1; ++m) {
          T logit = bias[m];
          for (int n = 0; n < n1; ++n) logit += conf[n] * kern[n * n1 + m];
          w[m] = logit;
          top = std::max(top, logit);
        }
        T total = 0;
        for (int m = 0; m < n1; ++m) total += (w[m] = std::exp(w[m] - top));
        for (int m = 0; m < n1; ++m) w[m] /= total;
        break;
      }
    }
  }
};

template <typename T>
std::vector<T> softmax_vector(const Tensor<T>& logits) {
  std::vector<T> w(logits.values().begin(), logits.values().end());
  const T top = *std::max_element(w.begin(), w.end());
  T total = 0;
  for (auto& v : w) total += (v = std::exp(v - top));
  for (auto& v : w) v /= total;
  return w;
}

template <typename T>
void check_weights(const CemWeights<T>& weights, int samples) {
  const auto n1 = static_cast<std::size_t>(samples + 1);
  if (weights.mode == Weighting::Naive)
    require(weights.naive_logits.defined() && weights.naive_logits.numel() == n1,
            "cem_refine: naive weighting needs an (N+1)-vector");
  if (weights.mode == Weighting::Cwm)
    require(weights.cwm_kernel.defined() && weights.cwm_kernel.numel() == n1 * n1 &&
                weights.cwm_bias.defined() && weights.cwm_bias.numel() == n1,
            "cem_refine: CWM needs an (N+1)x(N+1) kernel and (N+1) bias");
}

}  // namespace

template <typename T>
Tensor<T> cem_refine(Tape<T>& tape, const Tensor<T>& distances, const Tensor<T>& confidence,
                     int samples, const CemWeights<T>& weights, bool coord_grad) {
  require(distances.rank() == 3, "cem_refine: distances must be [H,W,K]");
  require(confidence.shape() == distances.shape(),
          "cem_refine: confidence shape " + shape_to_string(confidence.shape()) +
              " differs from distances " + shape_to_string(distances.shape()));
  require(samples >= 0, "cem_refine: N must be >= 0");
  if (samples == 0) return distances;
  check_weights(weights, samples);

  const int h = static_cast<int>(distances.dim(0));
  const int w = static_cast<int>(distances.dim(1));
  const int k_count = static_cast<int>(distances.dim(2));
  const RaySet rays(k_count);
  const std::vector<T> naive_w =
      weights.mode == Weighting::Naive ? softmax_vector(weights.naive_logits) : std::vector<T>{};

  bool track = tape.tracks(distances, confidence);
  if (weights.mode == Weighting::Naive) track = track || tape.tracks(weights.naive_logits);
  if (weights.mode == Weighting::Cwm)
    track = track || tape.tracks(weights.cwm_kernel, weights.cwm_bias);
  Tensor<T> out(distances.shape(), track);

  RayEval<T> eval(samples);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::vector<T> dplanes = to_planes(distances.data(), h, w, k_count);
  const std::vector<T> cplanes =
      weights.mode == Weighting::Cwm ? to_planes(confidence.data(), h, w, k_count) : std::vector<T>(plane);
  T* o = out.data();
  for (int k = 0; k < k_count; ++k) {
    const T* dp = dplanes.data() + k * plane;
    const T* cp = weights.mode == Weighting::Cwm ? cplanes.data() + k * plane : cplanes.data();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        eval.template run<false>(dp, cp, x, y, k, h, w, rays, weights, naive_w);
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        T acc = 0;
        for (int n = 0; n < eval.n1; ++n) acc += eval.w[n] * (eval.sampled[n] + eval.frac[n] * dp[p]);
        o[p * k_count + k] = acc;
      }
  }

  if (track) {
    tape.record(out, [=]() mutable {
      const int n1 = samples + 1;
      RayEval<T> eval(samples);
      const bool cwm = weights.mode == Weighting::Cwm;
      const std::vector<T> dplanes = to_planes(distances.data(), h, w, k_count);
      const std::vector<T> cplanes =
          cwm ? to_planes(confidence.data(), h, w, k_count) : std::vector<T>(plane);
      const T* dout = out.grad_data();
      std::vector<T> gd_planes, gc_planes;
      if (distances.requires_grad()) gd_planes.assign(dplanes.size(), T(0));
      if (confidence.requires_grad()) gc_planes.assign(dplanes.size(), T(0));
      const bool learn_naive =
          weights.mode == Weighting::Naive && weights.naive_logits.requires_grad();
      const bool learn_cwm = cwm && (weights.cwm_kernel.requires_grad() ||
                                     weights.cwm_bias.requires_grad());
      std::vector<double> g_kernel(static_cast<std::size_t>(n1 * n1), 0.0);
      std::vector<double> g_bias(static_cast<std::size_t>(n1), 0.0);
      std::vector<T> dw(n1), dlogit(n1), dconf(n1);

      for (int k = 0; k < k_count; ++k) {
        const T* dmap = dplanes.data() + k * plane;
        const T* cmap = cwm ? cplanes.data() + k * plane : cplanes.data();
        T* dd = gd_planes.empty() ? nullptr : gd_planes.data() + k * plane;
        T* dc = gc_planes.empty() ? nullptr : gc_planes.data() + k * plane;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const T g = dout[i * k_count + k];
            if (g == T(0)) continue;
            eval.run(dmap, cmap, x, y, k, h, w, rays, weights, naive_w);
            const T d = dmap[i];

            std::fill(dconf.begin(), dconf.end(), T(0));
            if (weights.mode != Weighting::Equal) {
              T inner = 0;
              for (int n = 0; n < n1; ++n) {
                dw[n] = g * (eval.sampled[n] + eval.frac[n] * d);
                inner += eval.w[n] * dw[n];
              }
              for (int m = 0; m < n1; ++m) dlogit[m] = eval.w[m] * (dw[m] - inner);
              if (learn_naive)
                for (int m = 0; m < n1; ++m) g_bias[m] += dlogit[m];
              if (weights.mode == Weighting::Cwm) {
                const T* kern = weights.cwm_kernel.data();
                for (int n = 0; n < n1; ++n) {
                  T acc = 0;
                  for (int m = 0; m < n1; ++m) {
                    acc += kern[n * n1 + m] * dlogit[m];
                    if (learn_cwm) g_kernel[n * n1 + m] += dlogit[m] * eval.conf[n];
                  }
                  dconf[n] = acc;
                }
                if (learn_cwm)
                  for (int m = 0; m < n1; ++m) g_bias[m] += dlogit[m];
              }
            }

            T d_direct = 0;
            for (int n = 0; n < n1; ++n) {
              const T ds = g * eval.w[n];
              d_direct += ds * eval.frac[n];
              if (dd) eval.stencil[n].scatter(dd, ds);
              if (dc && dconf[n] != T(0)) eval.stencil[n].scatter(dc, dconf[n]);
              if (coord_grad && n > 0) {
                const T gx = ds * eval.stencil[n].dx(dmap) + (cwm ? dconf[n] * eval.stencil[n].dx(cmap) : T(0));
                const T gy = ds * eval.stencil[n].dy(dmap) + (cwm ? dconf[n] * eval.stencil[n].dy(cmap) : T(0));
                d_direct += eval.frac[n] * (gx * static_cast<T>(rays.cos(k)) +
                                            gy * static_cast<T>(rays.sin(k)));
              }
            }
            if (dd) dd[i] += d_direct;
          }
      }
      if (!gd_planes.empty()) add_from_planes(distances.grad_data(), gd_planes, h, w, k_count);
      if (!gc_planes.empty()) add_from_planes(confidence.grad_data(), gc_planes, h, w, k_count);

      if (learn_naive) {
        T* gn = weights.naive_logits.grad_data();
        for (int m = 0; m < n1; ++m) gn[m] += static_cast<T>(g_bias[m]);
      }
      if (learn_cwm) {
        Tensor<T> kern = weights.cwm_kernel, bias = weights.cwm_bias;
        if (kern.requires_grad())
          for (int j = 0; j < n1 * n1; ++j) kern.grad_data()[j] += static_cast<T>(g_kernel[j]);
        if (bias.requires_grad())
          for (int m = 0; m < n1; ++m) bias.grad_data()[m] += static_cast<T>(g_bias[m]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cem_fusion_weights(const Tensor<T>& distances, const Tensor<T>& confidence, int samples,
                             const CemWeights<T>& weights) {
  require(distances.rank() == 3 && confidence.shape() == distances.shape(),
          "cem_fusion_weights: bad map shapes");
  require(samples >= 0, "cem_fusion_weights: N must be >= 0");
  const int h = static_cast<int>(distances.dim(0));
  const int w = static_cast<int>(distances.dim(1));
  const int k_count = static_cast<int>(distances.dim(2));
  const int n1 = samples + 1;
  Tensor<T> out(Shape{distances.dim(0), distances.dim(1), distances.dim(2),
                      static_cast<std::size_t>(n1)});
  if (samples == 0) {
    for (auto& v : out.values()) v = T(1);
    return out;
  }
  check_weights(weights, samples);
  const RaySet rays(k_count);
  const std::vector<T> naive_w =
      weights.mode == Weighting::Naive ? softmax_vector(weights.naive_logits) : std::vector<T>{};
  RayEval<T> eval(samples);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::vector<T> dplanes = to_planes(distances.data(), h, w, k_count);
  const std::vector<T> cplanes = to_planes(confidence.data(), h, w, k_count);
  for (int k = 0; k < k_count; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        eval.template run<false>(dplanes.data() + k * plane, cplanes.data() + k * plane, x, y, k, h,
                                 w, rays, weights, naive_w);
        const std::size_t i = (static_cast<std::size_t>(y) * w + x) * k_count + k;
        std::copy(eval.w.begin(), eval.w.end(), out.data() + i * n1);
      }
  return out;
}

template Tensor<float> cem_refine(Tape<float>&, const Tensor<float>&, const Tensor<float>&, int,
                                  const CemWeights<float>&, bool);
template Tensor<double> cem_refine(Tape<double>&, const Tensor<double>&, const Tensor<double>&,
                                   int, const CemWeights<double>&, bool);
template Tensor<float> cem_fusion_weights(const Tensor<float>&, const Tensor<float>&, int,
                                          const CemWeights<float>&);
template Tensor<double> cem_fusion_weights(const Tensor<double>&, const Tensor<double>&, int,
                                           const CemWeights<double>&);

}  // namespace starpoly
