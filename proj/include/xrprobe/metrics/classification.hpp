#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "xrprobe/error.hpp"

namespace xrprobe::metrics {

/// Area under the ROC curve as the Mann-Whitney rank statistic:
/// (concordant pairs + 0.5 * tied pairs) / (P * N). Ties get mid-ranks.
template <class Score, class Label>
double auroc(std::span<const Score> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        pos_rank_sum += mid_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("auroc: labels contain a single class");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(n_neg));
}

template <class Score, class Label>
double auroc(const std::vector<Score>& scores, const std::vector<Label>& labels) {
  return auroc(std::span<const Score>(scores), std::span<const Label>(labels));
}

/// Row = true class, column = predicted class.
using ConfusionMatrix = std::vector<std::vector<std::uint64_t>>;

inline ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int num_classes) {
  ConfusionMatrix cm(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm.at(truth[i]).at(pred[i]);
  return cm;
}

/// Matthews correlation coefficient; Gorodkin's R_K statistic for C > 2,
/// which reduces to the binary formula for C = 2. Zero denominator gives 0.
inline double mcc(const ConfusionMatrix& cm) {
  const std::size_t c = cm.size();
  if (c == 0) throw std::invalid_argument("mcc: empty confusion matrix");
  std::vector<double> t(c, 0.0), p(c, 0.0);
  double s = 0, correct = 0;
  for (std::size_t i = 0; i < c; ++i) {
    if (cm[i].size() != c) throw std::invalid_argument("mcc: confusion matrix must be square");
    for (std::size_t j = 0; j < c; ++j) {
      const double v = static_cast<double>(cm[i][j]);
      t[i] += v;
      p[j] += v;
      s += v;
    }
    correct += static_cast<double>(cm[i][i]);
  }
  double pt = 0, pp = 0, tt = 0;
  for (std::size_t k = 0; k < c; ++k) {
    pt += p[k] * t[k];
    pp += p[k] * p[k];
    tt += t[k] * t[k];
  }
  const double denom = std::sqrt(s * s - pp) * std::sqrt(s * s - tt);
  if (denom == 0) return 0.0;
  return (correct * s - pt) / denom;
}

/// Mean score per group id, in first-appearance order of the groups.
struct GroupedScores {
  std::vector<std::string> group_ids;
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Per-study aggregation: group score is the mean of member scores; group
/// label is the max of member labels (a study is positive if any image is).
inline GroupedScores aggregate_per_group(std::span<const double> scores, std::span<const int> labels,
                                         std::span<const std::string> group_ids) {
  if (scores.size() != group_ids.size() || labels.size() != group_ids.size())
    throw std::invalid_argument("aggregate_per_group: length mismatch");
  std::map<std::string, std::size_t> slot;
  GroupedScores out;
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto [it, fresh] = slot.emplace(group_ids[i], out.group_ids.size());
    if (fresh) {
      out.group_ids.push_back(group_ids[i]);
      sums.push_back(0);
      counts.push_back(0);
      out.labels.push_back(0);
    }
    sums[it->second] += scores[i];
    ++counts[it->second];
    out.labels[it->second] = std::max(out.labels[it->second], labels[i]);
  }
  for (std::size_t g = 0; g < sums.size(); ++g) out.scores.push_back(sums[g] / static_cast<double>(counts[g]));
  return out;
}

}  // namespace xrprobe::metrics
