#pragma once

#include <cmath>
#include <vector>

#include "xrprobe/nn/tensor.hpp"

namespace xrprobe::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  long step = 0;
};

/// One Adam step with decoupled weight decay on `decay` parameters:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
template <class T>
void adam_step(const ParamList<T>& params, AdamState<T>& state, double lr, double weight_decay, const AdamConfig& cfg = {}) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), T{0});
      state.v.emplace_back(p->size(), T{0});
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.size()) throw std::invalid_argument("adam_step: parameter/state shape mismatch");
    const double wd = p.decay ? weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      const double mi = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
      const double vi = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps) + wd * double(p.value[i]);
      p.value[i] = static_cast<T>(p.value[i] - lr * update);
    }
  }
}

/// Halves the learning rate after `patience` consecutive non-improving
/// epochs. The rate after k reductions is exactly base * 2^-k.
class PlateauSchedule {
 public:
  PlateauSchedule(double base_lr, int patience, double factor = 0.5)
      : base_(base_lr), patience_(patience), factor_(factor) {}

  /// Returns true when this epoch triggered a reduction.
  bool step(bool improved) {
    if (improved) {
      bad_ = 0;
      return false;
    }
    if (++bad_ > patience_) {
      ++reductions_;
      bad_ = 0;
      return true;
    }
    return false;
  }

  double lr() const {
    return factor_ == 0.5 ? std::ldexp(base_, -reductions_) : base_ * std::pow(factor_, reductions_);
  }
  int reductions() const noexcept { return reductions_; }

 private:
  double base_;
  int patience_;
  double factor_;
  int bad_ = 0;
  int reductions_ = 0;
};

/// Signals a stop after `patience` consecutive epochs without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  bool step(bool improved) {
    since_best_ = improved ? 0 : since_best_ + 1;
    return since_best_ >= patience_;
  }

  int since_best() const noexcept { return since_best_; }

 private:
  int patience_;
  int since_best_ = 0;
};

}  // namespace xrprobe::nn
