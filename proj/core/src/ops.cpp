#include "starpoly/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace starpoly::ops {
namespace {

// C[m,n] (+)= A[m,k] * B[k,n] with optional transposes, row-major.
void gemm(bool ta, bool tb, int m, int n, int k, const float* a, const float* b, float* c,
          float beta) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
              n, k, 1.0f, a, ta ? m : k, b, tb ? k : n, beta, c, n);
}

void gemm(bool ta, bool tb, int m, int n, int k, const double* a, const double* b, double* c,
          double beta) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
              n, k, 1.0, a, ta ? m : k, b, tb ? k : n, beta, c, n);
}

struct ConvGeometry {
  int h, w, cin, kh, kw, cout, stride, pad_y, pad_x, out_h, out_w;

  int patch() const { return kh * kw * cin; }
  int pixels() const { return out_h * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1; }
};

template <typename T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const int patch = g.patch();
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      T* row = col + static_cast<std::size_t>(oy * g.out_w + ox) * patch;
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_y;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_x;
          T* dst = row + (ky * g.kw + kx) * g.cin;
          if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) {
            std::fill(dst, dst + g.cin, T(0));
          } else {
            const T* src = in + static_cast<std::size_t>(iy * g.w + ix) * g.cin;
            std::copy(src, src + g.cin, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* in_grad) {
  const int patch = g.patch();
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const T* row = col + static_cast<std::size_t>(oy * g.out_w + ox) * patch;
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_y;
        if (iy < 0 || iy >= g.h) continue;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_x;
          if (ix < 0 || ix >= g.w) continue;
          const T* src = row + (ky * g.kw + kx) * g.cin;
          T* dst = in_grad + static_cast<std::size_t>(iy * g.w + ix) * g.cin;
          for (int c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <typename T>
T sigmoid_value(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus_value(T x) {
  // log(1 + e^x) without overflow.
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

void require_hwc(const Shape& s, const char* op) {
  require(s.size() == 3, std::string(op) + ": expected [H,W,C] input, got " + shape_to_string(s));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride, Padding padding) {
  require_hwc(input.shape(), "conv2d");
  require(kernel.rank() == 4, "conv2d: kernel must be [kh,kw,Cin,Cout], got " +
                                  shape_to_string(kernel.shape()));
  require(stride >= 1, "conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.h = static_cast<int>(input.dim(0));
  g.w = static_cast<int>(input.dim(1));
  g.cin = static_cast<int>(input.dim(2));
  g.kh = static_cast<int>(kernel.dim(0));
  g.kw = static_cast<int>(kernel.dim(1));
  g.cout = static_cast<int>(kernel.dim(3));
  g.stride = stride;
  require(static_cast<int>(kernel.dim(2)) == g.cin,
          "conv2d: kernel expects " + std::to_string(kernel.dim(2)) + " input channels, input has " +
              std::to_string(g.cin));
  require(bias.numel() == static_cast<std::size_t>(g.cout), "conv2d: bias size mismatch");
  if (padding == Padding::Same) {
    require(g.kh % 2 == 1 && g.kw % 2 == 1, "conv2d: same padding needs odd kernel dims");
    g.pad_y = g.kh / 2;
    g.pad_x = g.kw / 2;
    g.out_h = (g.h + g.stride - 1) / g.stride;
    g.out_w = (g.w + g.stride - 1) / g.stride;
  } else {
    require(g.h >= g.kh && g.w >= g.kw, "conv2d: valid padding with kernel larger than input");
    g.pad_y = g.pad_x = 0;
    g.out_h = (g.h - g.kh) / g.stride + 1;
    g.out_w = (g.w - g.kw) / g.stride + 1;
  }

  const bool track = tape.tracks(input, kernel, bias);
  Tensor<T> out(Shape{static_cast<std::size_t>(g.out_h), static_cast<std::size_t>(g.out_w),
                      static_cast<std::size_t>(g.cout)},
                track);
  const int pixels = g.pixels();
  T* o = out.data();
  for (int p = 0; p < pixels; ++p) std::copy(bias.data(), bias.data() + g.cout, o + p * g.cout);

  std::vector<T> col;
  const T* cols = input.data();
  if (!g.pointwise()) {
    col.resize(static_cast<std::size_t>(pixels) * g.patch());
    im2col(g, input.data(), col.data());
    cols = col.data();
  }
  gemm(false, false, pixels, g.cout, g.patch(), cols, kernel.data(), o, T(1));

  if (track) {
    tape.record(out, [g, input, kernel, bias, out]() mutable {
      const T* dout = out.grad_data();
      const int pixels = g.pixels();
      if (bias.requires_grad()) {
        T* db = bias.grad_data();
        for (int p = 0; p < pixels; ++p)
          for (int c = 0; c < g.cout; ++c) db[c] += dout[p * g.cout + c];
      }
      std::vector<T> col;
      const T* cols = input.data();
      if (kernel.requires_grad()) {
        if (!g.pointwise()) {
          col.resize(static_cast<std::size_t>(pixels) * g.patch());
          im2col(g, input.data(), col.data());
          cols = col.data();
        }
        gemm(true, false, g.patch(), g.cout, pixels, cols, dout, kernel.grad_data(), T(1));
      }
      if (input.requires_grad()) {
        if (g.pointwise()) {
          gemm(false, true, pixels, g.cin, g.cout, dout, kernel.data(), input.grad_data(), T(1));
        } else {
          col.assign(static_cast<std::size_t>(pixels) * g.patch(), T(0));
          gemm(false, true, pixels, g.patch(), g.cout, dout, kernel.data(), col.data(), T(0));
          col2im_add(g, col.data(), input.grad_data());
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& input, Activation kind) {
  const bool track = tape.tracks(input);
  Tensor<T> out(input.shape(), track);
  const std::size_t n = input.numel();
  const T* x = input.data();
  T* y = out.data();
  switch (kind) {
    case Activation::Relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) y[i] = sigmoid_value(x[i]);
      break;
    case Activation::Softplus:
      for (std::size_t i = 0; i < n; ++i) y[i] = softplus_value(x[i]);
      break;
  }
  if (track) {
    tape.record(out, [input, out, kind]() mutable {
      if (!input.requires_grad()) return;
      const std::size_t n = input.numel();
      const T* x = input.data();
      const T* y = out.data();
      const T* dy = out.grad_data();
      T* dx = input.grad_data();
      switch (kind) {
        case Activation::Relu:
          for (std::size_t i = 0; i < n; ++i)
            if (x[i] > T(0)) dx[i] += dy[i];
          break;
        case Activation::Sigmoid:
          for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
          break;
        case Activation::Softplus:
          for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * sigmoid_value(x[i]);
          break;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> channel_softmax(Tape<T>& tape, const Tensor<T>& input) {
  require(input.rank() >= 1 && input.shape().back() >= 1, "channel_softmax: empty last axis");
  const std::size_t m = input.shape().back();
  const std::size_t rows = input.numel() / m;
  const bool track = tape.tracks(input);
  Tensor<T> out(input.shape(), track);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = input.data() + r * m;
    T* y = out.data() + r * m;
    const T top = *std::max_element(x, x + m);
    T total = 0;
    for (std::size_t j = 0; j < m; ++j) total += (y[j] = std::exp(x[j] - top));
    for (std::size_t j = 0; j < m; ++j) y[j] /= total;
  }
  if (track) {
    tape.record(out, [input, out, m, rows]() mutable {
      if (!input.requires_grad()) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = out.data() + r * m;
        const T* dy = out.grad_data() + r * m;
        T* dx = input.grad_data() + r * m;
        T inner = 0;
        for (std::size_t j = 0; j < m; ++j) inner += y[j] * dy[j];
        for (std::size_t j = 0; j < m; ++j) dx[j] += y[j] * (dy[j] - inner);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_sample(Tape<T>& tape, const Tensor<T>& map, const Tensor<T>& coords,
                          bool coord_grad) {
  require(map.rank() == 2, "bilinear_sample: map must be [H,W]");
  require(coords.rank() == 2 && coords.dim(1) == 2, "bilinear_sample: coords must be [n,2]");
  const int h = static_cast<int>(map.dim(0));
  const int w = static_cast<int>(map.dim(1));
  const std::size_t n = coords.dim(0);
  const bool track = tape.recording() &&
                     (map.requires_grad() || (coord_grad && coords.requires_grad()));
  Tensor<T> out(Shape{n}, track);

  struct Cell {
    int x0, y0, x1, y1;
    T fx, fy;
    bool clamped_x, clamped_y;
  };
  auto locate = [h, w](T x, T y) {
    Cell c{};
    const T cx = std::clamp(x, T(0), T(w - 1));
    const T cy = std::clamp(y, T(0), T(h - 1));
    c.clamped_x = cx != x;
    c.clamped_y = cy != y;
    c.x0 = std::min(static_cast<int>(std::floor(cx)), w - 1);
    c.y0 = std::min(static_cast<int>(std::floor(cy)), h - 1);
    c.x1 = std::min(c.x0 + 1, w - 1);
    c.y1 = std::min(c.y0 + 1, h - 1);
    c.fx = cx - T(c.x0);
    c.fy = cy - T(c.y0);
    return c;
  };

  const T* m = map.data();
  for (std::size_t i = 0; i < n; ++i) {
    const Cell c = locate(coords[2 * i], coords[2 * i + 1]);
    const T v00 = m[c.y0 * w + c.x0], v01 = m[c.y0 * w + c.x1];
    const T v10 = m[c.y1 * w + c.x0], v11 = m[c.y1 * w + c.x1];
    out[i] = (T(1) - c.fy) * ((T(1) - c.fx) * v00 + c.fx * v01) +
             c.fy * ((T(1) - c.fx) * v10 + c.fx * v11);
  }

  if (track) {
    tape.record(out, [map, coords, out, coord_grad, locate, w, n]() mutable {
      const T* m = map.data();
      const T* dout = out.grad_data();
      const bool to_coords = coord_grad && coords.requires_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const Cell c = locate(coords[2 * i], coords[2 * i + 1]);
        const T g = dout[i];
        if (map.requires_grad()) {
          T* dm = map.grad_data();
          dm[c.y0 * w + c.x0] += g * (T(1) - c.fy) * (T(1) - c.fx);
          dm[c.y0 * w + c.x1] += g * (T(1) - c.fy) * c.fx;
          dm[c.y1 * w + c.x0] += g * c.fy * (T(1) - c.fx);
          dm[c.y1 * w + c.x1] += g * c.fy * c.fx;
        }
        if (to_coords) {
          const T v00 = m[c.y0 * w + c.x0], v01 = m[c.y0 * w + c.x1];
          const T v10 = m[c.y1 * w + c.x0], v11 = m[c.y1 * w + c.x1];
          if (!c.clamped_x)
            coords.grad_data()[2 * i] +=
                g * ((T(1) - c.fy) * (v01 - v00) + c.fy * (v11 - v10));
          if (!c.clamped_y)
            coords.grad_data()[2 * i + 1] +=
                g * ((T(1) - c.fx) * (v10 - v00) + c.fx * (v11 - v01));
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2(Tape<T>& tape, const Tensor<T>& input) {
  require_hwc(input.shape(), "maxpool2");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  require(h % 2 == 0 && w % 2 == 0,
          "maxpool2: spatial dims must be even, got " + shape_to_string(input.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  const bool track = tape.tracks(input);
  Tensor<T> out(Shape{oh, ow, c}, track);
  std::vector<std::size_t> argmax(track ? out.numel() : 0);
  const T* x = input.data();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * oy) * w + 2 * ox) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (oy * ow + ox) * c + ch;
        out[o] = x[best];
        if (track) argmax[o] = best;
      }
    }
  }
  if (track) {
    tape.record(out, [input, out, argmax = std::move(argmax)]() mutable {
      if (!input.requires_grad()) return;
      const T* dy = out.grad_data();
      T* dx = input.grad_data();
      for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += dy[o];
    });
  }
  return out;
}

template <typename T>
Tensor<T> upsample2(Tape<T>& tape, const Tensor<T>& input) {
  require_hwc(input.shape(), "upsample2");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const bool track = tape.tracks(input);
  Tensor<T> out(Shape{2 * h, 2 * w, c}, track);
  for (std::size_t y = 0; y < 2 * h; ++y) {
    for (std::size_t x = 0; x < 2 * w; ++x) {
      const T* src = input.data() + ((y / 2) * w + x / 2) * c;
      std::copy(src, src + c, out.data() + (y * 2 * w + x) * c);
    }
  }
  if (track) {
    tape.record(out, [input, out, h, w, c]() mutable {
      if (!input.requires_grad()) return;
      const T* dy = out.grad_data();
      T* dx = input.grad_data();
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t x = 0; x < 2 * w; ++x) {
          const T* src = dy + (y * 2 * w + x) * c;
          T* dst = dx + ((y / 2) * w + x / 2) * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
    });
  }
  return out;
}

template <typename T>
Tensor<T> group_norm(Tape<T>& tape, const Tensor<T>& input, int groups, const Tensor<T>& gain,
                     const Tensor<T>& shift) {
  require_hwc(input.shape(), "group_norm");
  const std::size_t c = input.dim(2);
  require(groups >= 1 && c % static_cast<std::size_t>(groups) == 0,
          "group_norm: " + std::to_string(c) + " channels not divisible into " +
              std::to_string(groups) + " groups");
  require(gain.numel() == c && shift.numel() == c, "group_norm: affine parameter size mismatch");
  const std::size_t pixels = input.dim(0) * input.dim(1);
  const std::size_t per_group = c / static_cast<std::size_t>(groups);
  const std::size_t count = pixels * per_group;
  const bool track = tape.tracks(input, gain, shift);
  Tensor<T> out(input.shape(), track);

  // Normalized values are needed by the adjoint; stored in a side buffer.
  std::vector<T> xhat(input.numel());
  std::vector<T> inv_std(static_cast<std::size_t>(groups));
  const T* x = input.data();
  for (std::size_t g = 0; g < static_cast<std::size_t>(groups); ++g) {
    const std::size_t c0 = g * per_group;
    double s = 0;
    for (std::size_t p = 0; p < pixels; ++p)
      for (std::size_t j = 0; j < per_group; ++j) s += x[p * c + c0 + j];
    const double mu = s / static_cast<double>(count);
    double v = 0;
    for (std::size_t p = 0; p < pixels; ++p)
      for (std::size_t j = 0; j < per_group; ++j) {
        const double d = x[p * c + c0 + j] - mu;
        v += d * d;
      }
    v /= static_cast<double>(count);
    const T istd = static_cast<T>(1.0 / std::sqrt(v + kNormEpsilon));
    inv_std[g] = istd;
    for (std::size_t p = 0; p < pixels; ++p)
      for (std::size_t j = 0; j < per_group; ++j) {
        const std::size_t i = p * c + c0 + j;
        xhat[i] = static_cast<T>(x[i] - mu) * istd;
        out[i] = xhat[i] * gain[c0 + j] + shift[c0 + j];
      }
  }

  if (track) {
    tape.record(out, [input, gain, shift, out, xhat = std::move(xhat),
                      inv_std = std::move(inv_std), groups, c, pixels, per_group,
                      count]() mutable {
      const T* dy = out.grad_data();
      if (gain.requires_grad() || shift.requires_grad()) {
        for (std::size_t p = 0; p < pixels; ++p)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            if (gain.requires_grad()) gain.grad_data()[ch] += dy[i] * xhat[i];
            if (shift.requires_grad()) shift.grad_data()[ch] += dy[i];
          }
      }
      if (!input.requires_grad()) return;
      T* dx = input.grad_data();
      for (std::size_t g = 0; g < static_cast<std::size_t>(groups); ++g) {
        const std::size_t c0 = g * per_group;
        double sum_d = 0, sum_dx = 0;
        for (std::size_t p = 0; p < pixels; ++p)
          for (std::size_t j = 0; j < per_group; ++j) {
            const std::size_t i = p * c + c0 + j;
            const double dxhat = dy[i] * gain[c0 + j];
            sum_d += dxhat;
            sum_dx += dxhat * xhat[i];
          }
        const double n = static_cast<double>(count);
        for (std::size_t p = 0; p < pixels; ++p)
          for (std::size_t j = 0; j < per_group; ++j) {
            const std::size_t i = p * c + c0 + j;
            const double dxhat = dy[i] * gain[c0 + j];
            dx[i] += static_cast<T>(inv_std[g] * (dxhat - sum_d / n - xhat[i] * sum_dx / n));
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == b.rank() && a.rank() >= 1, "concat_channels: rank mismatch");
  for (std::size_t i = 0; i + 1 < a.rank(); ++i)
    require(a.dim(i) == b.dim(i), "concat_channels: leading dims differ: " +
                                      shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
  const std::size_t ca = a.shape().back(), cb = b.shape().back();
  const std::size_t rows = a.numel() / std::max<std::size_t>(ca, 1);
  Shape shape = a.shape();
  shape.back() = ca + cb;
  const bool track = tape.tracks(a, b);
  Tensor<T> out(shape, track);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(a.data() + r * ca, a.data() + (r + 1) * ca, out.data() + r * (ca + cb));
    std::copy(b.data() + r * cb, b.data() + (r + 1) * cb, out.data() + r * (ca + cb) + ca);
  }
  if (track) {
    tape.record(out, [a, b, out, ca, cb, rows]() mutable {
      const T* dy = out.grad_data();
      for (std::size_t r = 0; r < rows; ++r) {
        if (a.requires_grad())
          for (std::size_t j = 0; j < ca; ++j) a.grad_data()[r * ca + j] += dy[r * (ca + cb) + j];
        if (b.requires_grad())
          for (std::size_t j = 0; j < cb; ++j)
            b.grad_data()[r * cb + j] += dy[r * (ca + cb) + ca + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(Tape<T>& tape, const Tensor<T>& input, std::size_t begin,
                         std::size_t end) {
  require(input.rank() >= 1 && begin < end && end <= input.shape().back(),
          "slice_channels: bad channel range");
  const std::size_t c = input.shape().back(), k = end - begin;
  const std::size_t rows = input.numel() / c;
  Shape shape = input.shape();
  shape.back() = k;
  const bool track = tape.tracks(input);
  Tensor<T> out(shape, track);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(input.data() + r * c + begin, input.data() + r * c + end, out.data() + r * k);
  if (track) {
    tape.record(out, [input, out, c, k, rows, begin]() mutable {
      if (!input.requires_grad()) return;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < k; ++j)
          input.grad_data()[r * c + begin + j] += out.grad_data()[r * k + j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& input, Shape shape) {
  require(shape_numel(shape) == input.numel(), "reshape: cannot view " +
                                                   shape_to_string(input.shape()) + " as " +
                                                   shape_to_string(shape));
  const bool track = tape.tracks(input);
  Tensor<T> out(std::move(shape), std::vector<T>(input.values().begin(), input.values().end()),
                track);
  if (track) {
    tape.record(out, [input, out]() mutable {
      if (!input.requires_grad()) return;
      for (std::size_t i = 0; i < input.numel(); ++i) input.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

namespace {

template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd,
                 Bwd bwd) {
  require(a.shape() == b.shape(), std::string(name) + ": shape mismatch " +
                                      shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
  const bool track = tape.tracks(a, b);
  Tensor<T> out(a.shape(), track);
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fwd(a[i], b[i]);
  if (track) {
    tape.record(out, [a, b, out, bwd]() mutable {
      for (std::size_t i = 0; i < a.numel(); ++i) {
        const auto [ga, gb] = bwd(a[i], b[i], out.grad()[i]);
        if (a.requires_grad()) a.grad()[i] += ga;
        if (b.requires_grad()) b.grad()[i] += gb;
      }
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      tape, a, b, "add", [](T x, T y) { return x + y; },
      [](T, T, T g) { return std::pair<T, T>{g, g}; });
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      tape, a, b, "sub", [](T x, T y) { return x - y; },
      [](T, T, T g) { return std::pair<T, T>{g, -g}; });
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      tape, a, b, "mul", [](T x, T y) { return x * y; },
      [](T x, T y, T g) { return std::pair<T, T>{g * y, g * x}; });
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  const bool track = tape.tracks(a);
  Tensor<T> out(a.shape(), track);
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * factor;
  if (track) {
    tape.record(out, [a, out, factor]() mutable {
      if (!a.requires_grad()) return;
      for (std::size_t i = 0; i < a.numel(); ++i) a.grad()[i] += out.grad()[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
  std::vector<T> ones(a.numel(), T(1));
  return dot_const(tape, a, ones);
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a) {
  require(a.numel() > 0, "mean: empty tensor");
  std::vector<T> w(a.numel(), T(1) / static_cast<T>(a.numel()));
  return dot_const(tape, a, w);
}

template <typename T>
Tensor<T> dot_const(Tape<T>& tape, const Tensor<T>& a, const std::vector<T>& weights) {
  require(weights.size() == a.numel(), "dot_const: weight count mismatch");
  const bool track = tape.tracks(a);
  T total = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) total += a[i] * weights[i];
  Tensor<T> out = Tensor<T>::scalar(total, track);
  if (track) {
    tape.record(out, [a, out, weights]() mutable {
      if (!a.requires_grad()) return;
      const T g = out.grad()[0];
      for (std::size_t i = 0; i < a.numel(); ++i) a.grad()[i] += g * weights[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> rot90(const Tensor<T>& input, int quarter_turns) {
  require(input.rank() >= 2, "rot90: need at least [H,W]");
  const int turns = ((quarter_turns % 4) + 4) % 4;
  Tensor<T> cur = input.clone();
  for (int t = 0; t < turns; ++t) {
    const std::size_t h = cur.dim(0), w = cur.dim(1);
    const std::size_t c = cur.numel() / (h * w);
    Shape shape = cur.shape();
    std::swap(shape[0], shape[1]);
    Tensor<T> next(shape);
    // (x', y') = (h-1-y, x): new row = x, new col = h-1-y, new width = h.
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const T* src = cur.data() + (y * w + x) * c;
        std::copy(src, src + c, next.data() + (x * h + (h - 1 - y)) * c);
      }
    cur = next;
  }
  return cur;
}

template <typename T>
Tensor<T> hflip(const Tensor<T>& input) {
  require(input.rank() >= 2, "hflip: need at least [H,W]");
  const std::size_t h = input.dim(0), w = input.dim(1);
  const std::size_t c = input.numel() / (h * w);
  Tensor<T> out(input.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const T* src = input.data() + (y * w + x) * c;
      std::copy(src, src + c, out.data() + (y * w + (w - 1 - x)) * c);
    }
  return out;
}

#define STARPOLY_INSTANTIATE_OPS(T)                                                             \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, \
                            Padding);                                                           \
  template Tensor<T> activation(Tape<T>&, const Tensor<T>&, Activation);                        \
  template Tensor<T> channel_softmax(Tape<T>&, const Tensor<T>&);                               \
  template Tensor<T> bilinear_sample(Tape<T>&, const Tensor<T>&, const Tensor<T>&, bool);       \
  template Tensor<T> maxpool2(Tape<T>&, const Tensor<T>&);                                      \
  template Tensor<T> upsample2(Tape<T>&, const Tensor<T>&);                                     \
  template Tensor<T> group_norm(Tape<T>&, const Tensor<T>&, int, const Tensor<T>&,              \
                                const Tensor<T>&);                                              \
  template Tensor<T> concat_channels(Tape<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> slice_channels(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);      \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                               \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                      \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> dot_const(Tape<T>&, const Tensor<T>&, const std::vector<T>&);              \
  template Tensor<T> rot90(const Tensor<T>&, int);                                              \
  template Tensor<T> hflip(const Tensor<T>&);

STARPOLY_INSTANTIATE_OPS(float)
STARPOLY_INSTANTIATE_OPS(double)

}  // namespace starpoly::ops
