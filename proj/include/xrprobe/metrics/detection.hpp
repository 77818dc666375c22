#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "xrprobe/error.hpp"
#include "xrprobe/manifest.hpp"

namespace xrprobe::metrics {

inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

using ImageBoxes = std::vector<Box>;

/// Area under the all-points interpolated precision-recall curve.
/// `is_tp` is in descending-confidence order.
inline double average_precision(std::span<const std::uint8_t> is_tp, std::size_t n_truth) {
  if (n_truth == 0) return 0.0;
  const std::size_t n = is_tp.size();
  std::vector<double> prec(n), rec(n);
  double tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_tp[i];
    prec[i] = tp / static_cast<double>(i + 1);
    rec[i] = tp / static_cast<double>(n_truth);
  }
  for (std::size_t i = n; i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (rec[i] - prev_recall) * prec[i];
    prev_recall = rec[i];
  }
  return ap;
}

/// Mean over classes of AP at IoU >= iou_threshold. Predictions of a class are
/// matched greedily in descending confidence (ties: image order, then box
/// order) to the unmatched same-class truth of highest IoU in the same image.
/// Classes with predictions but no truths contribute AP 0.
inline double map_at(std::span<const ImageBoxes> preds, std::span<const ImageBoxes> truths, double iou_threshold = 0.5) {
  if (preds.size() != truths.size()) throw std::invalid_argument("map: prediction and truth image counts differ");
  std::set<int> classes;
  for (const auto& img : truths)
    for (const auto& b : img) classes.insert(b.cls);
  for (const auto& img : preds)
    for (const auto& b : img) {
      if (!b.confidence) throw DataError("map: prediction without confidence");
      classes.insert(b.cls);
    }
  if (classes.empty()) throw UndefinedMetric("map: no boxes at all");

  struct Det {
    double conf;
    std::size_t image, box;
  };
  double sum = 0;
  for (int c : classes) {
    std::vector<Det> dets;
    std::size_t n_truth = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (std::size_t j = 0; j < preds[i].size(); ++j)
        if (preds[i][j].cls == c) dets.push_back({*preds[i][j].confidence, i, j});
      for (const auto& t : truths[i]) n_truth += t.cls == c;
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.conf > b.conf; });
    std::vector<std::vector<std::uint8_t>> used(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) used[i].assign(truths[i].size(), 0);
    std::vector<std::uint8_t> is_tp;
    is_tp.reserve(dets.size());
    for (const auto& d : dets) {
      const Box& p = preds[d.image][d.box];
      double best = -1;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < truths[d.image].size(); ++k) {
        const Box& t = truths[d.image][k];
        if (t.cls != c || used[d.image][k]) continue;
        const double v = iou(p, t);
        if (v >= iou_threshold && v > best) {
          best = v;
          best_k = k;
        }
      }
      if (best >= 0) used[d.image][best_k] = 1;
      is_tp.push_back(best >= 0);
    }
    sum += average_precision(is_tp, n_truth);
  }
  return sum / static_cast<double>(classes.size());
}

inline double map50(std::span<const ImageBoxes> preds, std::span<const ImageBoxes> truths) {
  return map_at(preds, truths, 0.5);
}

/// Detection mIoU: mean over truth boxes of the best IoU with a same-class
/// prediction in the same image (0 when there is none).
inline double detection_miou(std::span<const ImageBoxes> preds, std::span<const ImageBoxes> truths) {
  if (preds.size() != truths.size()) throw std::invalid_argument("miou: prediction and truth image counts differ");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truths.size(); ++i)
    for (const auto& t : truths[i]) {
      double best = 0;
      for (const auto& p : preds[i])
        if (p.cls == t.cls) best = std::max(best, iou(p, t));
      sum += best;
      ++n;
    }
  if (n == 0) throw UndefinedMetric("miou: no truth boxes");
  return sum / static_cast<double>(n);
}

/// Fraction of pairs with IoU strictly above the threshold.
inline double grounding_accuracy(std::span<const Box> pred, std::span<const Box> truth, double threshold = 0.5) {
  if (pred.size() != truth.size()) throw std::invalid_argument("grounding: length mismatch");
  if (pred.empty()) throw UndefinedMetric("grounding: no pairs");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += iou(pred[i], truth[i]) > threshold;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

inline double grounding_miou(std::span<const Box> pred, std::span<const Box> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("grounding: length mismatch");
  if (pred.empty()) throw UndefinedMetric("grounding: no pairs");
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += iou(pred[i], truth[i]);
  return sum / static_cast<double>(pred.size());
}

}  // namespace xrprobe::metrics
