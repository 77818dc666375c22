#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "xrprobe/error.hpp"
#include "xrprobe/nn/tensor.hpp"

namespace xrprobe::nn {

/// Elementwise relative error with the denominator floored at 1e-3 so that
/// near-zero gradients are compared on an absolute scale.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1e-3, std::abs(analytic), std::abs(numeric)});
}

/// Central finite-difference check of `analytic` = d f / d x at x.
inline double gradcheck_fn(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                           std::span<const double> analytic, double step = 1e-4) {
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    x[i] = x0;
    const double num = (fp - fm) / (2 * step);
    if (!std::isfinite(num) || !std::isfinite(analytic[i])) throw NumericError("gradcheck: non-finite value");
    worst = std::max(worst, relative_error(analytic[i], num));
  }
  return worst;
}

/// Checks the parameter gradients of a double-precision model. `loss(true)`
/// must zero the gradients, run forward and backward, and return the loss;
/// `loss(false)` runs forward only. Dropout must be disabled.
inline double gradcheck(const ParamList<double>& params, const std::function<double(bool)>& loss, double step = 1e-4) {
  for (auto* p : params) p->zero_grad();
  loss(true);
  std::vector<std::vector<double>> analytic;
  for (const auto* p : params) analytic.push_back(p->grad);
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params[k]->value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x0 = v[i];
      v[i] = x0 + step;
      const double fp = loss(false);
      v[i] = x0 - step;
      const double fm = loss(false);
      v[i] = x0;
      const double num = (fp - fm) / (2 * step);
      if (!std::isfinite(num) || !std::isfinite(analytic[k][i])) throw NumericError("gradcheck: non-finite value");
      worst = std::max(worst, relative_error(analytic[k][i], num));
    }
  }
  return worst;
}

}  // namespace xrprobe::nn
