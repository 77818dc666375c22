#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "xrprobe/nn/tensor.hpp"

namespace xrprobe::nn {

template <class T>
struct LossResult {
  double value = 0;
  Tensor<T> grad;  // d loss / d logits
};

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Mean binary cross-entropy with logits over every element of (batch, k).
template <class T>
LossResult<T> bce_with_logits(const Tensor<T>& logits, std::span<const std::uint8_t> targets) {
  LossResult<T> r{0.0, Tensor<T>(logits.shape)};
  const double inv = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits.data[i], y = targets[i];
    // log(1 + exp(-|z|)) + max(z, 0) - z*y
    r.value += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * y;
    r.grad.data[i] = static_cast<T>((sigmoid(z) - y) * inv);
  }
  r.value *= inv;
  return r;
}

/// Mean softmax cross-entropy over (batch, classes) with integer targets.
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  LossResult<T> r{0.0, Tensor<T>(logits.shape)};
  const double inv = 1.0 / static_cast<double>(b);
  std::vector<double> p(c);
  for (std::size_t n = 0; n < b; ++n) {
    const T* z = &logits.data[n * c];
    double mx = z[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, double(z[k]));
    double sum = 0;
    for (std::size_t k = 0; k < c; ++k) sum += p[k] = std::exp(z[k] - mx);
    const auto t = static_cast<std::size_t>(targets[n]);
    r.value += std::log(sum) + mx - z[t];
    for (std::size_t k = 0; k < c; ++k) r.grad.data[n * c + k] = static_cast<T>((p[k] / sum - (k == t ? 1.0 : 0.0)) * inv);
  }
  r.value *= inv;
  return r;
}

/// Soft Dice loss on segmentation logits (batch, rows, cols, k).
/// k = 1: sigmoid foreground probability, targets in {0,1}.
/// k > 1: softmax over channels, Dice averaged over foreground classes 1..k-1.
/// Per sample D = (2 sum(p t) + s) / (sum p + sum t + s); loss = 1 - mean D, in [0, 1].
template <class T>
LossResult<T> dice_loss(const Tensor<T>& logits, std::span<const int> targets, double smooth = 1.0) {
  const std::size_t b = logits.dim(0), hw = logits.dim(1) * logits.dim(2), k = logits.dim(3);
  LossResult<T> r{0.0, Tensor<T>(logits.shape)};
  std::vector<double> prob(hw * k);
  const std::size_t first = k == 1 ? 0 : 1;
  const double terms = static_cast<double>(b * (k == 1 ? 1 : k - 1));
  double dice_sum = 0;
  std::vector<double> dprob(hw * k);
  for (std::size_t n = 0; n < b; ++n) {
    const T* z = &logits.data[n * hw * k];
    const int* t = &targets[n * hw];
    if (k == 1) {
      for (std::size_t p = 0; p < hw; ++p) prob[p] = sigmoid(z[p]);
    } else {
      for (std::size_t p = 0; p < hw; ++p) {
        double mx = z[p * k];
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, double(z[p * k + c]));
        double sum = 0;
        for (std::size_t c = 0; c < k; ++c) sum += prob[p * k + c] = std::exp(z[p * k + c] - mx);
        for (std::size_t c = 0; c < k; ++c) prob[p * k + c] /= sum;
      }
    }
    std::fill(dprob.begin(), dprob.end(), 0.0);
    for (std::size_t c = first; c < std::max<std::size_t>(k, 1); ++c) {
      const int cls = k == 1 ? 1 : static_cast<int>(c);
      double inter = 0, sp = 0, st = 0;
      for (std::size_t p = 0; p < hw; ++p) {
        const double pv = prob[p * k + (k == 1 ? 0 : c)];
        const double tv = t[p] == cls;
        inter += pv * tv;
        sp += pv;
        st += tv;
      }
      const double s = sp + st + smooth;
      const double d = (2 * inter + smooth) / s;
      dice_sum += d;
      // dD/dp = (2t - D) / S ; loss contribution is -D / terms
      for (std::size_t p = 0; p < hw; ++p) {
        const double tv = t[p] == cls;
        dprob[p * k + (k == 1 ? 0 : c)] += -(2 * tv - d) / s / terms;
      }
    }
    T* g = &r.grad.data[n * hw * k];
    if (k == 1) {
      for (std::size_t p = 0; p < hw; ++p) g[p] = static_cast<T>(dprob[p] * prob[p] * (1 - prob[p]));
    } else {
      for (std::size_t p = 0; p < hw; ++p) {
        double dot = 0;
        for (std::size_t c = 0; c < k; ++c) dot += dprob[p * k + c] * prob[p * k + c];
        for (std::size_t c = 0; c < k; ++c) g[p * k + c] = static_cast<T>(prob[p * k + c] * (dprob[p * k + c] - dot));
      }
    }
  }
  r.value = 1.0 - dice_sum / terms;
  return r;
}

/// Mean squared error; used for closed-form gradient checks.
template <class T>
LossResult<T> mse(const Tensor<T>& pred, std::span<const double> targets) {
  LossResult<T> r{0.0, Tensor<T>(pred.shape)};
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred.data[i] - targets[i];
    r.value += e * e * inv;
    r.grad.data[i] = static_cast<T>(2 * e * inv);
  }
  return r;
}

}  // namespace xrprobe::nn
