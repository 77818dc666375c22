#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xrprobe/bundle.hpp"
#include "xrprobe/error.hpp"
#include "xrprobe/manifest.hpp"
#include "xrprobe/nn/tensor.hpp"
#include "xrprobe/pgm.hpp"

namespace xrprobe::probe {

/// Frozen features for n samples: CLS vectors (rows = cols = 0) or patch
/// grids (rows x cols x d, channel fastest).
struct FeatureSet {
  std::size_t n = 0, rows = 0, cols = 0, d = 0;
  std::vector<float> x;

  bool spatial() const noexcept { return rows > 0; }
  std::size_t stride() const noexcept { return spatial() ? rows * cols * d : d; }

  template <class T>
  nn::Tensor<T> batch(std::span<const std::size_t> idx) const {
    nn::Tensor<T> t(spatial() ? std::vector<std::size_t>{idx.size(), rows, cols, d}
                              : std::vector<std::size_t>{idx.size(), d});
    const std::size_t s = stride();
    for (std::size_t b = 0; b < idx.size(); ++b)
      std::transform(x.begin() + idx[b] * s, x.begin() + (idx[b] + 1) * s, t.data.begin() + b * s,
                     [](float v) { return static_cast<T>(v); });
    return t;
  }
};

/// Classification targets. `index` holds the class (binary: 0/1); `bits`
/// holds the BCE targets (binary: n x 1, multilabel: n x C).
struct ClassTargets {
  LabelKind kind = LabelKind::Binary;
  int num_classes = 2;
  std::vector<int> index;
  std::vector<std::uint8_t> bits;

  std::size_t size() const noexcept { return kind == LabelKind::Multilabel ? bits.size() / num_classes : index.size(); }
  std::size_t out_dim() const noexcept { return kind == LabelKind::Binary ? 1 : static_cast<std::size_t>(num_classes); }
  bool uses_bce() const noexcept { return kind != LabelKind::Multiclass; }
};

/// Per-pixel class rasters, all of one size.
struct MaskSet {
  std::size_t n = 0, rows = 0, cols = 0;
  int num_classes = 2;
  std::vector<int> px;

  std::size_t channels() const noexcept { return num_classes <= 2 ? 1 : static_cast<std::size_t>(num_classes); }

  std::vector<int> batch(std::span<const std::size_t> idx) const {
    const std::size_t s = rows * cols;
    std::vector<int> out(idx.size() * s);
    for (std::size_t b = 0; b < idx.size(); ++b)
      std::copy(px.begin() + idx[b] * s, px.begin() + (idx[b] + 1) * s, out.begin() + b * s);
    return out;
  }
};

inline FeatureSet gather_cls(const EmbeddingBundle& bundle, const DatasetManifest& m, std::span<const std::size_t> entries) {
  FeatureSet f{entries.size(), 0, 0, bundle.dim(), {}};
  f.x.reserve(f.n * f.d);
  for (std::size_t i : entries) {
    const auto& rec = bundle.at(m.entries[i].image_id);
    f.x.insert(f.x.end(), rec.cls.begin(), rec.cls.end());
  }
  return f;
}

inline FeatureSet gather_patches(const EmbeddingBundle& bundle, const DatasetManifest& m, std::span<const std::size_t> entries) {
  if (!bundle.has_patches()) throw DataError("bundle has no patch grids");
  FeatureSet f{entries.size(), 0, 0, bundle.dim(), {}};
  for (std::size_t i : entries) {
    const auto& rec = bundle.at(m.entries[i].image_id);
    if (f.rows == 0) {
      f.rows = rec.h;
      f.cols = rec.w;
      f.x.reserve(f.n * f.stride());
    } else if (rec.h != f.rows || rec.w != f.cols) {
      throw DataError("patch grid of '" + rec.image_id + "' differs in extent from the rest of the split");
    }
    f.x.insert(f.x.end(), rec.patches.begin(), rec.patches.end());
  }
  return f;
}

inline ClassTargets gather_targets(const DatasetManifest& m, std::span<const std::size_t> entries) {
  ClassTargets t{m.kind, m.num_classes, {}, {}};
  for (std::size_t i : entries) {
    const auto& lv = m.entries[i].label;
    switch (m.kind) {
      case LabelKind::Binary: {
        const int v = std::get<BinaryLabel>(lv).value;
        t.index.push_back(v);
        t.bits.push_back(static_cast<std::uint8_t>(v));
        break;
      }
      case LabelKind::Multiclass:
        t.index.push_back(std::get<ClassLabel>(lv).index);
        break;
      case LabelKind::Multilabel: {
        const auto& b = std::get<MultiLabel>(lv).bits;
        t.bits.insert(t.bits.end(), b.begin(), b.end());
        break;
      }
      default:
        throw DataError("manifest label_kind '" + to_string(m.kind) + "' is not a classification task");
    }
  }
  return t;
}

/// Loads every entry's mask raster; class values must be < num_classes.
inline MaskSet gather_masks(const DatasetManifest& m, std::span<const std::size_t> entries, int num_classes) {
  MaskSet s;
  s.n = entries.size();
  s.num_classes = num_classes;
  for (std::size_t i : entries) {
    const auto& e = m.entries[i];
    if (!e.mask) throw DataError("entry '" + e.image_id + "' has no mask");
    const Raster r = read_pgm(*e.mask);
    if (s.rows == 0) {
      s.rows = r.height;
      s.cols = r.width;
      s.px.reserve(s.n * s.rows * s.cols);
    } else if (r.height != s.rows || r.width != s.cols) {
      throw DataError("mask of '" + e.image_id + "' differs in size from the rest of the split");
    }
    for (auto v : r.pixels) {
      if (v >= num_classes) throw DataError("mask of '" + e.image_id + "' has class value " + std::to_string(v) + " >= " + std::to_string(num_classes));
      s.px.push_back(v);
    }
  }
  return s;
}

}  // namespace xrprobe::probe
