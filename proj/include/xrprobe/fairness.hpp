#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrprobe/error.hpp"
#include "xrprobe/manifest.hpp"
#include "xrprobe/metrics/classification.hpp"
#include "xrprobe/rng.hpp"

namespace xrprobe::fairness {

enum class Axis { Sex, Age };

inline Axis parse_axis(const std::string& s) {
  if (s == "sex") return Axis::Sex;
  if (s == "age") return Axis::Age;
  throw ConfigError("axis must be 'sex' or 'age'");
}

/// Age bins [0,35), [35,60), [60,inf).
inline std::string age_group(double years) {
  if (years < 35) return "young";
  if (years < 60) return "middle";
  return "elderly";
}

/// Train groups and eval groups of an axis. Sex: train {M, F, all}, eval {M, F}.
/// Age: train and eval {young, middle, elderly}.
inline std::vector<std::string> train_groups(Axis a) {
  return a == Axis::Sex ? std::vector<std::string>{"M", "F", "all"} : std::vector<std::string>{"young", "middle", "elderly"};
}
inline std::vector<std::string> eval_groups(Axis a) {
  return a == Axis::Sex ? std::vector<std::string>{"M", "F"} : std::vector<std::string>{"young", "middle", "elderly"};
}

inline std::optional<std::string> group_of(const ManifestEntry& e, Axis a) {
  if (a == Axis::Sex) {
    if (!e.sex) return std::nullopt;
    return *e.sex == Sex::M ? "M" : "F";
  }
  if (!e.age_years) return std::nullopt;
  return age_group(*e.age_years);
}

struct Cell {
  std::string train_group, eval_group;
  std::vector<std::size_t> train, val, test;  // manifest entry indices
};

struct SubgroupMatrix {
  std::vector<Cell> cells;
  std::vector<std::string> skipped;  // reasons
};

/// Enumerates every (train group, eval group) combination. The model of a
/// cell is trained on the train group's train/val entries and tested on the
/// eval group's test entries. Cells with an empty subgroup are skipped.
inline SubgroupMatrix subgroup_matrix(const DatasetManifest& m, Axis axis) {
  SubgroupMatrix out;
  bool any = false;
  for (const auto& e : m.entries) any = any || group_of(e, axis).has_value();
  if (!any) {
    out.skipped.push_back("manifest has no " + std::string(axis == Axis::Sex ? "sex" : "age") + " metadata");
    return out;
  }
  auto members = [&](const std::string& g, Split s) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      const auto& e = m.entries[i];
      if (e.split != s) continue;
      const auto eg = group_of(e, axis);
      if (g == "all" ? true : (eg && *eg == g)) idx.push_back(i);
    }
    return idx;
  };
  for (const auto& tg : train_groups(axis))
    for (const auto& eg : eval_groups(axis)) {
      Cell c{tg, eg, members(tg, Split::Train), members(tg, Split::Val), members(eg, Split::Test)};
      if (c.train.empty() || c.val.empty())
        out.skipped.push_back("train group '" + tg + "' is empty in the train or val split (eval '" + eg + "')");
      else if (c.test.empty())
        out.skipped.push_back("eval group '" + eg + "' is empty in the test split (train '" + tg + "')");
      else
        out.cells.push_back(std::move(c));
    }
  return out;
}

struct BootstrapResult {
  std::vector<double> values;
  double median = 0;
  double lo = 0, hi = 0;  // percentile interval
};

/// Linear-interpolation percentile of sorted data, q in [0, 100].
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (pos - static_cast<double>(i)) * (sorted[j] - sorted[i]);
}

/// Bootstrap distribution of a test-set statistic. Resample r draws n items
/// with replacement from a generator keyed on (seed, r, attempt); resamples
/// for which `stat` is undefined are redrawn up to 100 times.
template <class Stat>
BootstrapResult bootstrap(std::size_t n_items, Stat&& stat, std::size_t n_resamples, std::uint64_t seed,
                          double interval = 95.0) {
  if (n_items == 0) throw DataError("bootstrap: empty test set");
  constexpr int kMaxAttempts = 100;
  BootstrapResult out;
  out.values.reserve(n_resamples);
  std::vector<std::size_t> idx(n_items);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      CounterRng rng(derive_key({seed, r, static_cast<std::uint64_t>(attempt)}));
      for (auto& i : idx) i = rng.below(n_items);
      try {
        out.values.push_back(stat(std::span<const std::size_t>(idx)));
        ok = true;
      } catch (const UndefinedMetric&) {
      }
    }
    if (!ok) throw DataError("bootstrap: resample " + std::to_string(r) + " had a single class in 100 attempts");
  }
  auto sorted = out.values;
  std::sort(sorted.begin(), sorted.end());
  out.median = percentile_sorted(sorted, 50);
  out.lo = percentile_sorted(sorted, (100 - interval) / 2);
  out.hi = percentile_sorted(sorted, 100 - (100 - interval) / 2);
  return out;
}

inline BootstrapResult bootstrap_auc(std::span<const double> scores, std::span<const int> labels, std::size_t n = 200,
                                     std::uint64_t seed = 0) {
  if (scores.size() != labels.size()) throw std::invalid_argument("bootstrap_auc: length mismatch");
  // Fails early when the full test set is single-class.
  metrics::auroc<double, int>(scores, labels);
  std::vector<double> s(scores.size());
  std::vector<int> y(scores.size());
  return bootstrap(
      scores.size(),
      [&](std::span<const std::size_t> idx) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
          s[i] = scores[idx[i]];
          y[i] = labels[idx[i]];
        }
        return metrics::auroc<double, int>(s, y);
      },
      n, seed);
}

struct MannWhitneyResult {
  double u = 0;  // U statistic of the first sample
  double p = 1;  // two-sided
  bool exact = false;
};

namespace detail {

/// Number of arrangements giving each U value for sample sizes (n, m):
/// f(n, m, u) = f(n-1, m, u-m) + f(n, m-1, u).
inline std::vector<double> u_distribution(std::size_t n, std::size_t m) {
  // table[j][u] for the current n, j = 0..m
  std::vector<std::vector<double>> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {1.0};  // n = 0: only U = 0
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {1.0};  // m = 0: only U = 0
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j].assign(i * j + 1, 0.0);
      for (std::size_t u = 0; u < prev[j].size(); ++u) cur[j][u + j] += prev[j][u];  // largest value in sample a
      for (std::size_t u = 0; u < cur[j - 1].size(); ++u) cur[j][u] += cur[j - 1][u];   // largest value in sample b
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

/// Two-sided Mann-Whitney U test. U counts pairs (a_i > b_j) plus half the
/// ties. Exact null distribution when min(n, m) <= 8, n + m <= 16 and no
/// ties; otherwise normal approximation with tie and continuity correction.
inline MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney: empty sample");
  const std::size_t n = a.size(), m = b.size(), total = n + m;
  std::vector<std::pair<double, int>> all;
  all.reserve(total);
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum_a = 0, tie_term = 0;
  bool ties = false;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && all[j].first == all[i].first) ++j;
    const double t = static_cast<double>(j - i);
    if (j - i > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) rank_sum_a += mid;
    i = j;
  }
  const double nn = static_cast<double>(n), mm = static_cast<double>(m), N = static_cast<double>(total);
  MannWhitneyResult r;
  r.u = rank_sum_a - nn * (nn + 1) / 2;

  if (!ties && std::min(n, m) <= 8 && total <= 16) {
    const auto dist = detail::u_distribution(n, m);
    double all_count = 0, le = 0, ge = 0;
    const auto u = static_cast<std::size_t>(std::llround(r.u));
    for (std::size_t k = 0; k < dist.size(); ++k) {
      all_count += dist[k];
      if (k <= u) le += dist[k];
      if (k >= u) ge += dist[k];
    }
    r.p = std::min(1.0, 2 * std::min(le, ge) / all_count);
    r.exact = true;
    return r;
  }
  const double mu = nn * mm / 2;
  const double var = nn * mm / 12 * ((N + 1) - tie_term / (N * (N - 1)));
  if (var <= 0) {
    r.p = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.u - mu) - 0.5) / std::sqrt(var);
  r.p = std::min(1.0, 2 * detail::normal_sf(z));
  return r;
}

inline MannWhitneyResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  return mann_whitney(std::span<const double>(a), std::span<const double>(b));
}

struct CellResult {
  std::string train_group, eval_group;
  BootstrapResult bootstrap;
  std::size_t n_test = 0;
};

struct PairTest {
  std::string eval_group, train_a, train_b;
  MannWhitneyResult test;
  bool significant = false;
};

struct FairnessReport {
  Axis axis = Axis::Sex;
  double alpha = 0.05;
  std::vector<CellResult> cells;
  std::vector<PairTest> pairs;
  std::vector<std::string> skipped;

  std::size_t non_significant() const {
    return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const PairTest& p) { return !p.significant; }));
  }
};

/// Compares, within each eval group, the bootstrap samples of every pair of
/// train groups. A pair is significant iff p < alpha.
inline FairnessReport fairness_report(Axis axis, std::vector<CellResult> cells, std::vector<std::string> skipped,
                                      double alpha = 0.05) {
  FairnessReport rep{axis, alpha, std::move(cells), {}, std::move(skipped)};
  const auto tg = train_groups(axis);
  for (const auto& eg : eval_groups(axis))
    for (std::size_t i = 0; i < tg.size(); ++i)
      for (std::size_t j = i + 1; j < tg.size(); ++j) {
        const CellResult* a = nullptr;
        const CellResult* b = nullptr;
        for (const auto& c : rep.cells) {
          if (c.eval_group != eg) continue;
          if (c.train_group == tg[i]) a = &c;
          if (c.train_group == tg[j]) b = &c;
        }
        if (!a || !b) continue;
        PairTest pt{eg, tg[i], tg[j], mann_whitney(a->bootstrap.values, b->bootstrap.values), false};
        pt.significant = pt.test.p < alpha;
        rep.pairs.push_back(std::move(pt));
      }
  return rep;
}

inline nlohmann::ordered_json to_json(const FairnessReport& r) {
  nlohmann::ordered_json j;
  j["axis"] = r.axis == Axis::Sex ? "sex" : "age";
  j["alpha"] = r.alpha;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : r.cells)
    j["cells"].push_back({{"train_group", c.train_group},
                          {"eval_group", c.eval_group},
                          {"n_test", c.n_test},
                          {"median", c.bootstrap.median},
                          {"interval", {c.bootstrap.lo, c.bootstrap.hi}},
                          {"values", c.bootstrap.values}});
  j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : r.pairs)
    j["pairs"].push_back({{"eval_group", p.eval_group},
                          {"train_a", p.train_a},
                          {"train_b", p.train_b},
                          {"U", p.test.u},
                          {"p", p.test.p},
                          {"exact", p.test.exact},
                          {"significant", p.significant}});
  j["non_significant_pairs"] = r.non_significant();
  j["skipped"] = r.skipped;
  return j;
}

}  // namespace xrprobe::fairness
