#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xrprobe/error.hpp"

namespace xrprobe::metrics {

/// Dice similarity coefficient on binary masks: (2|A n B| + s) / (|A| + |B| + s).
/// With s > 0 two empty masks score 1.
template <class A, class B>
double dsc(std::span<const A> pred, std::span<const B> truth, double smooth = 1.0) {
  if (pred.size() != truth.size()) throw std::invalid_argument("dsc: mask sizes differ");
  double inter = 0, sp = 0, st = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    inter += p && t;
    sp += p;
    st += t;
  }
  const double denom = sp + st + smooth;
  if (denom == 0) throw UndefinedMetric("dsc: both masks empty with smooth = 0");
  return (2 * inter + smooth) / denom;
}

/// Mean DSC over foreground classes 1..C-1 of label rasters.
inline double dsc_multiclass(std::span<const int> pred, std::span<const int> truth, int num_classes, double smooth = 1.0) {
  if (num_classes < 2) throw std::invalid_argument("dsc_multiclass: need at least 2 classes");
  double sum = 0;
  std::vector<std::uint8_t> p(pred.size()), t(truth.size());
  for (int c = 1; c < num_classes; ++c) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p[i] = pred[i] == c;
      t[i] = truth[i] == c;
    }
    sum += dsc<std::uint8_t, std::uint8_t>(p, t, smooth);
  }
  return sum / (num_classes - 1);
}

/// Mean DSC restricted to cases flagged positive.
inline double dice_pos(std::span<const double> per_case, std::span<const std::uint8_t> positive) {
  if (per_case.size() != positive.size()) throw std::invalid_argument("dice_pos: length mismatch");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < per_case.size(); ++i)
    if (positive[i]) {
      sum += per_case[i];
      ++n;
    }
  if (n == 0) throw UndefinedMetric("dice_pos: no positive cases");
  return sum / static_cast<double>(n);
}

}  // namespace xrprobe::metrics
