#pragma once

// Synthetic planted-signal datasets for smoke runs and benchmarks.
//
// Every patch is N(0, noise^2) per channel. Positive images get a fixed
// pattern vector added to one random patch, so the label is only visible
// locally. The CLS vector is the mean of the patches plus N(0, cls_noise^2),
// which dilutes the pattern by a factor h*w. Masks mark the planted patch at
// `mask_scale` pixels per patch.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrprobe/bundle.hpp"
#include "xrprobe/pgm.hpp"
#include "xrprobe/rng.hpp"

namespace xrprobe::synth {

struct PatchSignalSpec {
  std::size_t n_train = 200;
  std::size_t n_val = 100;
  std::size_t n_test = 200;
  std::uint32_t dim = 16;
  std::uint16_t grid = 4;
  double signal = 6.0;  // norm of the planted pattern
  double noise = 1.0;
  double cls_noise = 1.0;
  double positive_rate = 0.5;
  std::size_t mask_scale = 2;
  std::uint64_t seed = 0;
};

struct Dataset {
  EmbeddingBundle bundle;
  nlohmann::json manifest;                      // mask paths are relative ("masks/<id>.pgm")
  std::vector<std::pair<std::string, Raster>> masks;
};

inline Dataset make_patch_signal(const PatchSignalSpec& s) {
  Dataset out{EmbeddingBundle(s.dim, true), nlohmann::json::object(), {}};
  CounterRng prng(derive_key({s.seed, 0xC0FFEE}));
  std::vector<double> pattern(s.dim);
  double norm = 0;
  for (auto& v : pattern) {
    v = prng.normal();
    norm += v * v;
  }
  for (auto& v : pattern) v *= s.signal / std::sqrt(norm);

  nlohmann::json entries = nlohmann::json::array();
  const std::size_t total = s.n_train + s.n_val + s.n_test;
  const std::size_t cells = std::size_t{s.grid} * s.grid;
  for (std::size_t i = 0; i < total; ++i) {
    CounterRng rng(derive_key({s.seed, 1, i}));
    char id[32];
    std::snprintf(id, sizeof id, "img-%05zu", i);
    const int label = rng.bernoulli(s.positive_rate) ? 1 : 0;
    const std::size_t where = rng.below(cells);

    EmbeddingRecord rec{id, std::vector<float>(s.dim, 0.0f), s.grid, s.grid, std::vector<float>(cells * s.dim)};
    std::vector<double> mean(s.dim, 0.0);
    for (std::size_t p = 0; p < cells; ++p)
      for (std::size_t c = 0; c < s.dim; ++c) {
        double v = s.noise * rng.normal();
        if (label && p == where) v += pattern[c];
        rec.patches[p * s.dim + c] = static_cast<float>(v);
        mean[c] += v / static_cast<double>(cells);
      }
    for (std::size_t c = 0; c < s.dim; ++c) rec.cls[c] = static_cast<float>(mean[c] + s.cls_noise * rng.normal());

    const std::size_t side = std::size_t{s.grid} * s.mask_scale;
    Raster mask{side, side, std::vector<std::uint8_t>(side * side, 0)};
    if (label)
      for (std::size_t r = 0; r < s.mask_scale; ++r)
        for (std::size_t c = 0; c < s.mask_scale; ++c)
          mask.pixels[((where / s.grid) * s.mask_scale + r) * side + (where % s.grid) * s.mask_scale + c] = 1;

    const char* split = i < s.n_train ? "train" : i < s.n_train + s.n_val ? "val" : "test";
    const std::string mask_rel = std::string("masks/") + id + ".pgm";
    entries.push_back({{"image_id", id},
                       {"split", split},
                       {"label", label},
                       {"mask", mask_rel},
                       {"sex", rng.bernoulli(0.5) ? "F" : "M"},
                       {"age_years", std::round(rng.uniform(18.0, 90.0))}});
    out.masks.emplace_back(mask_rel, std::move(mask));
    out.bundle.add(std::move(rec));
  }
  out.manifest = {{"version", 1}, {"label_kind", "binary"}, {"num_classes", 2}, {"entries", entries}};
  return out;
}

/// Writes bundle.xremb, manifest.json (binary labels), mask_manifest.json
/// (same entries, label_kind "mask") and masks/ under `dir`.
inline void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "masks");
  write_bundle(d.bundle, (dir / "bundle.xremb").string());
  for (const auto& [rel, r] : d.masks) write_pgm(r, (dir / rel).string());
  std::ofstream os(dir / "manifest.json");
  os << d.manifest.dump(1) << "\n";
  auto masks = d.manifest;
  masks["label_kind"] = "mask";
  std::ofstream ms(dir / "mask_manifest.json");
  ms << masks.dump(1) << "\n";
}

}  // namespace xrprobe::synth
