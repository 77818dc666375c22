#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xrprobe/error.hpp"
#include "xrprobe/manifest.hpp"
#include "xrprobe/rng.hpp"

namespace xrprobe {

/// Per-class sample size: round-half-up of fraction * count.
inline std::size_t stratum_take(double fraction, std::size_t count) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count) + 0.5));
}

/// Stratified subset of the train split for one seed. Returns manifest entry
/// indices ordered by image_id. Each class is shuffled independently by a
/// counter-based generator keyed on (seed, class index), so the subset depends
/// only on (manifest, fraction, seed).
inline std::vector<std::size_t> make_fraction_split(const DatasetManifest& m, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");

  // class index -> (name, members); class index is the label for binary and
  // multiclass tasks, otherwise the rank of the stratum key.
  std::map<std::string, std::vector<std::size_t>> by_key;
  for (std::size_t i : m.indices(Split::Train)) by_key[stratum_of(m.entries[i].label)].push_back(i);
  if (by_key.empty()) throw DataError("train split is empty");

  std::vector<std::size_t> out;
  std::uint64_t rank = 0;
  for (auto& [key, members] : by_key) {
    std::uint64_t class_index = rank++;
    if (m.kind == LabelKind::Binary || m.kind == LabelKind::Multiclass) class_index = std::stoull(key);
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return m.entries[a].image_id < m.entries[b].image_id; });
    const std::size_t take = stratum_take(fraction, members.size());
    if (take == 0)
      throw DataError("insufficient support: class '" + key + "' has no samples at fraction " + std::to_string(fraction));
    if (take < members.size()) {
      CounterRng rng(derive_key({seed, class_index}));
      shuffle(members, rng);
    }
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end(),
            [&](std::size_t a, std::size_t b) { return m.entries[a].image_id < m.entries[b].image_id; });
  return out;
}

inline std::vector<std::vector<std::size_t>> make_fraction_splits(const DatasetManifest& m, double fraction,
                                                                  const std::vector<std::uint64_t>& seeds) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(seeds.size());
  for (auto s : seeds) out.push_back(make_fraction_split(m, fraction, s));
  return out;
}

}  // namespace xrprobe
