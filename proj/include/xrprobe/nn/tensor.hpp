#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace xrprobe::nn {

/// Dense row-major tensor. Dense activations are (batch, features); spatial
/// activations are (batch, rows, cols, channels).
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, T fill = T{0}) : shape(std::move(s)), data(count(shape), fill) {}

  static std::size_t count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const noexcept { return shape.size(); }
  T& operator[](std::size_t i) noexcept { return data[i]; }
  const T& operator[](std::size_t i) const noexcept { return data[i]; }
};

/// A trainable parameter block with its gradient accumulator.
template <class T>
struct Param {
  std::vector<T> value;
  std::vector<T> grad;
  bool decay = true;  // weight decay applies to weights, not biases

  Param() = default;
  Param(std::size_t n, bool decays) : value(n, T{0}), grad(n, T{0}), decay(decays) {}

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

template <class T>
using ParamList = std::vector<Param<T>*>;

template <class T>
std::size_t parameter_count(const ParamList<T>& ps) {
  std::size_t n = 0;
  for (const auto* p : ps) n += p->size();
  return n;
}

template <class T>
std::vector<float> flatten_params(const ParamList<T>& ps) {
  std::vector<float> out;
  out.reserve(parameter_count(ps));
  for (const auto* p : ps)
    for (T v : p->value) out.push_back(static_cast<float>(v));
  return out;
}

template <class T>
void load_params(const ParamList<T>& ps, const std::vector<float>& flat) {
  if (flat.size() != parameter_count(ps)) throw std::invalid_argument("parameter count does not match architecture");
  std::size_t k = 0;
  for (auto* p : ps)
    for (auto& v : p->value) v = static_cast<T>(flat[k++]);
}

}  // namespace xrprobe::nn
