#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xrprobe/nn/tensor.hpp"
#include "xrprobe/rng.hpp"

namespace xrprobe::nn {

/// Kaiming-uniform (fan-in, ReLU gain) weights; biases stay zero.
template <class T>
void kaiming_uniform(Param<T>& w, std::size_t fan_in, CounterRng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : w.value) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// y = x W^T + b over (batch, in).
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out) : in_(in), out_(out), weight_(out * in, true), bias_(out, false) {}

  void init(CounterRng& rng) { kaiming_uniform(weight_, in_, rng); }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    const std::size_t b = x.dim(0);
    Tensor<T> y({b, out_});
    for (std::size_t i = 0; i < b; ++i) {
      const T* xi = &x.data[i * in_];
      for (std::size_t o = 0; o < out_; ++o) {
        const T* wo = &weight_.value[o * in_];
        double acc = bias_.value[o];
        for (std::size_t k = 0; k < in_; ++k) acc += double(wo[k]) * xi[k];
        y.data[i * out_ + o] = static_cast<T>(acc);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t b = dy.dim(0);
    Tensor<T> dx({b, in_});
    for (std::size_t o = 0; o < out_; ++o) {
      double gb = 0;
      for (std::size_t i = 0; i < b; ++i) gb += dy.data[i * out_ + o];
      bias_.grad[o] += static_cast<T>(gb);
      for (std::size_t k = 0; k < in_; ++k) {
        double gw = 0;
        for (std::size_t i = 0; i < b; ++i) gw += double(dy.data[i * out_ + o]) * input_.data[i * in_ + k];
        weight_.grad[o * in_ + k] += static_cast<T>(gw);
      }
    }
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < in_; ++k) {
        double acc = 0;
        for (std::size_t o = 0; o < out_; ++o) acc += double(dy.data[i * out_ + o]) * weight_.value[o * in_ + k];
        dx.data[i * in_ + k] = static_cast<T>(acc);
      }
    return dx;
  }

  void collect(ParamList<T>& ps) {
    ps.push_back(&weight_);
    ps.push_back(&bias_);
  }

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }
  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

template <class T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    pre_ = x;
    Tensor<T> y = x;
    for (auto& v : y.data) v = v < T{0} ? T{0} : v;  // NaN passes through
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(pre_.data[i] > T{0})) dx.data[i] = T{0};
    return dx;
  }

  /// Pre-activations of the last forward pass (used to test for kinks).
  const Tensor<T>& pre_activation() const noexcept { return pre_; }

 private:
  Tensor<T> pre_;
};

/// Inverted dropout; identity outside training mode.
template <class T>
class Dropout {
 public:
  explicit Dropout(double p = 0.0) : p_(p) {}

  Tensor<T> forward(const Tensor<T>& x, bool training, CounterRng* rng) {
    if (!training || p_ == 0.0 || rng == nullptr) {
      mask_.clear();
      return x;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - p_));
    mask_.assign(x.size(), T{0});
    Tensor<T> y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = rng->bernoulli(p_) ? T{0} : scale;
      y.data[i] *= mask_[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    if (mask_.empty()) return dy;
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask_[i];
    return dx;
  }

  double p() const noexcept { return p_; }

 private:
  double p_;
  std::vector<T> mask_;
};

/// k x k convolution, stride 1, zero padding k/2 (grid extent preserved),
/// over (batch, rows, cols, channels). Weight layout (out, ky, kx, in).
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t k)
      : in_(in), out_(out), k_(k), weight_(out * k * k * in, true), bias_(out, false) {
    if (k % 2 == 0) throw std::invalid_argument("Conv2d: kernel size must be odd");
  }

  void init(CounterRng& rng) { kaiming_uniform(weight_, in_ * k_ * k_, rng); }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(k_ / 2);
    Tensor<T> y({b, h, w, out_});
    std::vector<double> acc(out_);
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          for (std::size_t o = 0; o < out_; ++o) acc[o] = bias_.value[o];
          for (std::size_t ky = 0; ky < k_; ++ky) {
            const auto sr = static_cast<std::ptrdiff_t>(r + ky) - pad;
            if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < k_; ++kx) {
              const auto sc = static_cast<std::ptrdiff_t>(c + kx) - pad;
              if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(w)) continue;
              const T* xi = &x.data[((n * h + sr) * w + sc) * in_];
              for (std::size_t o = 0; o < out_; ++o) {
                const T* wk = &weight_.value[((o * k_ + ky) * k_ + kx) * in_];
                double s = 0;
                for (std::size_t i = 0; i < in_; ++i) s += double(wk[i]) * xi[i];
                acc[o] += s;
              }
            }
          }
          T* yo = &y.data[((n * h + r) * w + c) * out_];
          for (std::size_t o = 0; o < out_; ++o) yo[o] = static_cast<T>(acc[o]);
        }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t b = input_.dim(0), h = input_.dim(1), w = input_.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(k_ / 2);
    Tensor<T> dx({b, h, w, in_});
    std::vector<double> gw(weight_.size(), 0.0), gb(out_, 0.0), gx(in_);
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          const T* g = &dy.data[((n * h + r) * w + c) * out_];
          for (std::size_t o = 0; o < out_; ++o) gb[o] += g[o];
          for (std::size_t ky = 0; ky < k_; ++ky) {
            const auto sr = static_cast<std::ptrdiff_t>(r + ky) - pad;
            if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < k_; ++kx) {
              const auto sc = static_cast<std::ptrdiff_t>(c + kx) - pad;
              if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(w)) continue;
              const std::size_t xoff = ((n * h + sr) * w + sc) * in_;
              const T* xi = &input_.data[xoff];
              std::fill(gx.begin(), gx.end(), 0.0);
              for (std::size_t o = 0; o < out_; ++o) {
                const double go = g[o];
                if (go == 0.0) continue;
                const std::size_t woff = ((o * k_ + ky) * k_ + kx) * in_;
                for (std::size_t i = 0; i < in_; ++i) {
                  gw[woff + i] += go * xi[i];
                  gx[i] += go * weight_.value[woff + i];
                }
              }
              for (std::size_t i = 0; i < in_; ++i) dx.data[xoff + i] += static_cast<T>(gx[i]);
            }
          }
        }
    for (std::size_t i = 0; i < gw.size(); ++i) weight_.grad[i] += static_cast<T>(gw[i]);
    for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += static_cast<T>(gb[o]);
    return dx;
  }

  void collect(ParamList<T>& ps) {
    ps.push_back(&weight_);
    ps.push_back(&bias_);
  }

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }
  std::size_t kernel() const noexcept { return k_; }
  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }

 private:
  std::size_t in_ = 0, out_ = 0, k_ = 1;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

/// Adaptive global average pooling: (batch, rows, cols, ch) -> (batch, ch).
template <class T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    shape_ = x.shape;
    const std::size_t b = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
    Tensor<T> y({b, c});
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0;
        for (std::size_t p = 0; p < hw; ++p) s += x.data[(n * hw + p) * c + ch];
        y.data[n * c + ch] = static_cast<T>(s / static_cast<double>(hw));
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx(shape_);
    const std::size_t b = shape_[0], hw = shape_[1] * shape_[2], c = shape_[3];
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t ch = 0; ch < c; ++ch) dx.data[(n * hw + p) * c + ch] = static_cast<T>(dy.data[n * c + ch] * inv);
    return dx;
  }

 private:
  std::vector<std::size_t> shape_;
};

/// Bilinear resize of (batch, h, w, ch) to (batch, out_h, out_w, ch) using
/// half-pixel centers (align_corners = false), clamped at the borders.
template <class T>
class BilinearUpsample {
 public:
  struct Tap {
    std::size_t lo, hi;
    double w_hi;  // weight of `hi`; `lo` gets 1 - w_hi
  };

  static std::vector<Tap> taps(std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      auto lo = static_cast<std::size_t>(src);
      if (lo > in - 1) lo = in - 1;
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[i] = {lo, hi, src - static_cast<double>(lo)};
      if (hi == lo) t[i].w_hi = 0.0;
    }
    return t;
  }

  BilinearUpsample() = default;
  BilinearUpsample(std::size_t out_h, std::size_t out_w) : out_h_(out_h), out_w_(out_w) {}

  Tensor<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape;
    const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    ry_ = taps(h, out_h_);
    rx_ = taps(w, out_w_);
    Tensor<T> y({b, out_h_, out_w_, c});
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t i = 0; i < out_h_; ++i)
        for (std::size_t j = 0; j < out_w_; ++j) {
          const auto [y0, y1, wy] = ry_[i];
          const auto [x0, x1, wx] = rx_[j];
          const T* p00 = &x.data[((n * h + y0) * w + x0) * c];
          const T* p01 = &x.data[((n * h + y0) * w + x1) * c];
          const T* p10 = &x.data[((n * h + y1) * w + x0) * c];
          const T* p11 = &x.data[((n * h + y1) * w + x1) * c];
          T* out = &y.data[((n * out_h_ + i) * out_w_ + j) * c];
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double top = (1 - wx) * p00[ch] + wx * p01[ch];
            const double bot = (1 - wx) * p10[ch] + wx * p11[ch];
            out[ch] = static_cast<T>((1 - wy) * top + wy * bot);
          }
        }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    const std::size_t b = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3];
    std::vector<double> acc(Tensor<T>::count(in_shape_), 0.0);
    for (std::size_t n = 0; n < b; ++n)
      for (std::size_t i = 0; i < out_h_; ++i)
        for (std::size_t j = 0; j < out_w_; ++j) {
          const auto [y0, y1, wy] = ry_[i];
          const auto [x0, x1, wx] = rx_[j];
          const T* g = &dy.data[((n * out_h_ + i) * out_w_ + j) * c];
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double gv = g[ch];
            acc[((n * h + y0) * w + x0) * c + ch] += (1 - wy) * (1 - wx) * gv;
            acc[((n * h + y0) * w + x1) * c + ch] += (1 - wy) * wx * gv;
            acc[((n * h + y1) * w + x0) * c + ch] += wy * (1 - wx) * gv;
            acc[((n * h + y1) * w + x1) * c + ch] += wy * wx * gv;
          }
        }
    Tensor<T> dx(in_shape_);
    for (std::size_t i = 0; i < acc.size(); ++i) dx.data[i] = static_cast<T>(acc[i]);
    return dx;
  }

  std::size_t out_h() const noexcept { return out_h_; }
  std::size_t out_w() const noexcept { return out_w_; }

 private:
  std::size_t out_h_ = 0, out_w_ = 0;
  std::vector<std::size_t> in_shape_;
  std::vector<Tap> ry_, rx_;
};

}  // namespace xrprobe::nn
