#pragma once

// Synthetic probe benchmarks shared by the unit and acceptance suites.

#include <cmath>
#include <vector>

#include "xrprobe/metrics/classification.hpp"
#include "xrprobe/nn/layers.hpp"
#include "xrprobe/probe/train.hpp"
#include "xrprobe/rng.hpp"
#include "xrprobe/synth.hpp"

namespace bench {

using namespace xrprobe;
using namespace xrprobe::probe;

struct Part {
  FeatureSet cls, grid;
  ClassTargets y;
  MaskSet masks;
};

struct Benchmark {
  Part train, val, test;
};

inline ClassTargets binary_targets(const std::vector<int>& labels) {
  ClassTargets t;
  t.kind = LabelKind::Binary;
  t.index = labels;
  for (int v : labels) t.bits.push_back(static_cast<std::uint8_t>(v));
  return t;
}

/// Planted-signal benchmark split by record order into train/val/test.
inline Benchmark patch_signal(const synth::PatchSignalSpec& spec) {
  const auto ds = synth::make_patch_signal(spec);
  const auto& entries = ds.manifest.at("entries");
  Benchmark b;
  for (std::size_t i = 0; i < ds.bundle.size(); ++i) {
    const std::string split = entries[i].at("split");
    Part& s = split == "train" ? b.train : split == "val" ? b.val : b.test;
    const auto& rec = ds.bundle.records()[i];
    const auto& mask = ds.masks[i].second;
    if (s.cls.n == 0) {
      s.cls = {0, 0, 0, spec.dim, {}};
      s.grid = {0, rec.h, rec.w, spec.dim, {}};
      s.masks = {0, mask.height, mask.width, 2, {}};
    }
    s.cls.x.insert(s.cls.x.end(), rec.cls.begin(), rec.cls.end());
    s.grid.x.insert(s.grid.x.end(), rec.patches.begin(), rec.patches.end());
    for (auto p : mask.pixels) s.masks.px.push_back(p);
    ++s.cls.n;
    ++s.grid.n;
    ++s.masks.n;
    s.y.index.push_back(entries[i].at("label").get<int>());
  }
  for (Part* s : {&b.train, &b.val, &b.test}) s->y = binary_targets(s->y.index);
  return b;
}

/// Two Gaussian blobs in d dimensions with means at +/- `sep`/2 along a
/// random unit direction.
inline Benchmark blobs(std::size_t d, std::size_t n_train, std::size_t n_val, std::size_t n_test, double sep,
                       std::uint64_t seed) {
  CounterRng rng(derive_key({seed, 0xB10B}));
  std::vector<double> dir(d);
  double norm = 0;
  for (auto& v : dir) {
    v = rng.normal();
    norm += v * v;
  }
  for (auto& v : dir) v /= std::sqrt(norm);
  Benchmark b;
  auto fill = [&](Part& s, std::size_t n) {
    s.cls = {n, 0, 0, d, {}};
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % 2);
      const double sign = y[i] ? 0.5 : -0.5;
      for (std::size_t k = 0; k < d; ++k) s.cls.x.push_back(static_cast<float>(rng.normal() + sign * sep * dir[k]));
    }
    s.y = binary_targets(y);
  };
  fill(b.train, n_train);
  fill(b.val, n_val);
  fill(b.test, n_test);
  return b;
}

/// XOR quadrants in 2-D: label 1 iff the coordinates have opposite signs.
/// Points stay at least `margin` away from both axes.
inline Benchmark xor2d(std::size_t n_train, std::size_t n_val, std::size_t n_test, double margin, std::uint64_t seed) {
  CounterRng rng(derive_key({seed, 0x0A0B}));
  Benchmark b;
  auto fill = [&](Part& s, std::size_t n) {
    s.cls = {n, 0, 0, 2, {}};
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sx = rng.bernoulli(0.5) ? 1 : -1, sy = rng.bernoulli(0.5) ? 1 : -1;
      s.cls.x.push_back(static_cast<float>(sx * rng.uniform(margin, 1.0)));
      s.cls.x.push_back(static_cast<float>(sy * rng.uniform(margin, 1.0)));
      y[i] = sx * sy < 0;
    }
    s.y = binary_targets(y);
  };
  fill(b.train, n_train);
  fill(b.val, n_val);
  fill(b.test, n_test);
  return b;
}

/// 4x4 grids of N(0,1) patches with d = 8; the 8x8 mask is the bilinear
/// upsampling of channel 0 thresholded at zero, which a 1x1 conv can realize.
inline Part channel_threshold(std::size_t n, std::uint64_t seed) {
  CounterRng rng(derive_key({seed, 0x5E6}));
  Part s;
  s.grid = {n, 4, 4, 8, {}};
  s.masks = {n, 8, 8, 2, {}};
  nn::BilinearUpsample<double> up(8, 8);
  for (std::size_t i = 0; i < n; ++i) {
    nn::Tensor<double> c0({1, 4, 4, 1});
    for (std::size_t p = 0; p < 16; ++p)
      for (std::size_t k = 0; k < 8; ++k) {
        const auto v = static_cast<float>(rng.normal());
        s.grid.x.push_back(v);
        if (k == 0) c0.data[p] = v;
      }
    for (double v : up.forward(c0).data) s.masks.px.push_back(v > 0);
  }
  return s;
}

inline double test_mcc(const std::vector<double>& scores, const ClassTargets& y) {
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > 0.5;
  return metrics::mcc(metrics::confusion(y.index, pred, 2));
}

inline double test_auroc(const std::vector<double>& scores, const ClassTargets& y) {
  return metrics::auroc<double, int>(scores, y.index);
}

inline double accuracy(const std::vector<double>& scores, const ClassTargets& y) {
  double hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hit += (scores[i] > 0.5) == (y.index[i] == 1);
  return hit / static_cast<double>(scores.size());
}

}  // namespace bench
