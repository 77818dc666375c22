#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrprobe/error.hpp"
#include "xrprobe/metrics/classification.hpp"
#include "xrprobe/metrics/segmentation.hpp"
#include "xrprobe/nn/losses.hpp"
#include "xrprobe/nn/optim.hpp"
#include "xrprobe/probe/data.hpp"
#include "xrprobe/probe/models.hpp"
#include "xrprobe/rng.hpp"

namespace xrprobe::probe {

/// Optimizer schedule. Defaults are the classification recipe.
struct TrainSchedule {
  std::size_t batch = 64;
  int max_epochs = 500;
  double lr = 1e-4;
  double weight_decay = 1e-6;
  double plateau_factor = 0.5;
  int plateau_patience = 2;
  int early_stop_patience = 10;
  long max_iterations = 0;  // 0 = no cap

  /// Segmentation recipe: batch 8, 5,000-iteration cap.
  static TrainSchedule segmentation() {
    TrainSchedule s;
    s.batch = 8;
    s.max_iterations = 5000;
    return s;
  }
};

inline nlohmann::json to_json(const TrainSchedule& s) {
  return {{"batch", s.batch}, {"max_epochs", s.max_epochs}, {"lr", s.lr}, {"weight_decay", s.weight_decay},
          {"plateau_factor", s.plateau_factor}, {"plateau_patience", s.plateau_patience},
          {"early_stop_patience", s.early_stop_patience}, {"max_iterations", s.max_iterations}};
}

inline TrainSchedule schedule_from_json(const nlohmann::json& j, TrainSchedule s = {}) {
  s.batch = j.value("batch", s.batch);
  s.max_epochs = j.value("max_epochs", s.max_epochs);
  s.lr = j.value("lr", s.lr);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.plateau_factor = j.value("plateau_factor", s.plateau_factor);
  s.plateau_patience = j.value("plateau_patience", s.plateau_patience);
  s.early_stop_patience = j.value("early_stop_patience", s.early_stop_patience);
  s.max_iterations = j.value("max_iterations", s.max_iterations);
  if (s.batch == 0 || s.max_epochs <= 0 || !(s.lr > 0) || s.weight_decay < 0 || !(s.plateau_factor > 0 && s.plateau_factor <= 1))
    throw ConfigError("invalid training schedule");
  return s;
}

struct TrainedProbe {
  nlohmann::json architecture;
  std::vector<float> params;
  int best_epoch = -1;
  std::vector<double> val_trace;
  std::vector<double> lr_trace;
  int epochs_run = 0;
  long iterations = 0;
  std::string stop_reason;
};

/// Validation outcome of one epoch. Higher score is better; at equal score
/// a lower loss counts as an improvement.
struct EpochEval {
  double score = 0;
  double loss = 0;
};

inline bool improves(const EpochEval& e, const EpochEval& best) {
  return e.score > best.score || (e.score == best.score && e.loss < best.loss);
}

/// Shared epoch loop: shuffled minibatches, Adam, plateau halving and early
/// stopping on the validation score; restores the best checkpoint.
/// `step(batch)` must zero gradients, run forward/backward and return the loss.
template <class StepFn, class EvalFn>
TrainedProbe run_training(const nn::ParamList<float>& params, std::size_t n_train, const TrainSchedule& sched,
                          std::uint64_t seed, StepFn&& step, EvalFn&& eval) {
  if (n_train == 0) throw DataError("empty training set");
  TrainedProbe out;
  nn::AdamState<float> adam;
  nn::PlateauSchedule plateau(sched.lr, sched.plateau_patience, sched.plateau_factor);
  nn::EarlyStopping stopper(sched.early_stop_patience);
  EpochEval best{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  std::vector<float> best_params = nn::flatten_params(params);

  std::vector<std::size_t> order(n_train);
  out.stop_reason = "max_epochs";
  for (int epoch = 0; epoch < sched.max_epochs; ++epoch) {
    const double lr = plateau.lr();
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffler(derive_key({seed, kStreamShuffle, static_cast<std::uint64_t>(epoch)}));
    shuffle(order, shuffler);
    bool capped = false;
    for (std::size_t start = 0; start < n_train; start += sched.batch) {
      const std::size_t end = std::min(n_train, start + sched.batch);
      const double loss = step(std::span<const std::size_t>(order.data() + start, end - start));
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << " (lr=" << lr << ")";
        throw NumericError(msg.str());
      }
      nn::adam_step(params, adam, lr, sched.weight_decay);
      ++out.iterations;
      if (sched.max_iterations > 0 && out.iterations >= sched.max_iterations) {
        capped = true;
        break;
      }
    }
    const EpochEval e = eval();
    out.val_trace.push_back(e.score);
    out.lr_trace.push_back(lr);
    out.epochs_run = epoch + 1;
    const bool better = improves(e, best);
    if (better) {
      best = e;
      out.best_epoch = epoch;
      best_params = nn::flatten_params(params);
    }
    if (capped) {
      out.stop_reason = "max_iterations";
      break;
    }
    if (stopper.step(better)) {
      out.stop_reason = "early_stop";
      break;
    }
    plateau.step(better);
  }
  nn::load_params(params, best_params);
  out.params = std::move(best_params);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction helpers

/// Class scores: binary -> n sigmoid scores; multilabel -> n x C sigmoids;
/// multiclass -> n x C softmax probabilities.
inline std::vector<double> logits_to_scores(const nn::Tensor<float>& logits, const ClassTargets& t) {
  std::vector<double> out(logits.size());
  if (t.uses_bce()) {
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = nn::sigmoid(logits.data[i]);
    return out;
  }
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  for (std::size_t n = 0; n < b; ++n) {
    double mx = logits.data[n * c];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, double(logits.data[n * c + k]));
    double s = 0;
    for (std::size_t k = 0; k < c; ++k) s += out[n * c + k] = std::exp(logits.data[n * c + k] - mx);
    for (std::size_t k = 0; k < c; ++k) out[n * c + k] /= s;
  }
  return out;
}

/// Validation/test score for a classification task: AUROC (binary), mean
/// per-label AUROC over labels with both classes (multilabel), MCC of the
/// argmax (multiclass). When AUROC is undefined the MCC of thresholded
/// predictions is reported instead, which is 0 for single-class labels.
inline double classification_score(const std::vector<double>& scores, const ClassTargets& t) {
  const std::size_t n = t.size();
  if (t.kind == LabelKind::Multiclass) {
    std::vector<int> pred(n);
    const std::size_t c = t.num_classes;
    for (std::size_t i = 0; i < n; ++i)
      pred[i] = static_cast<int>(std::max_element(scores.begin() + i * c, scores.begin() + (i + 1) * c) - (scores.begin() + i * c));
    return metrics::mcc(metrics::confusion(t.index, pred, t.num_classes));
  }
  const std::size_t k = t.out_dim();
  double sum = 0;
  int used = 0;
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scores[i * k + j];
      y[i] = t.bits[i * k + j];
    }
    try {
      sum += metrics::auroc<double, std::uint8_t>(s, y);
      ++used;
    } catch (const UndefinedMetric&) {
    }
  }
  if (used > 0) return sum / used;
  // No label has both classes: fall back to MCC over all thresholded outputs.
  std::vector<int> truth, pred;
  for (std::size_t i = 0; i < n * k; ++i) {
    truth.push_back(t.bits[i]);
    pred.push_back(scores[i] > 0.5);
  }
  return metrics::mcc(metrics::confusion(truth, pred, 2));
}

template <class Model, class Forward>
std::vector<double> predict_scores(Model& model, const FeatureSet& f, const ClassTargets& t, Forward&& fwd,
                                   double* loss = nullptr) {
  constexpr std::size_t kEvalBatch = 256;
  std::vector<double> out;
  double loss_sum = 0;
  for (std::size_t start = 0; start < f.n; start += kEvalBatch) {
    std::vector<std::size_t> idx(std::min(kEvalBatch, f.n - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = fwd(model, f.batch<float>(idx));
    const auto s = logits_to_scores(logits, t);
    out.insert(out.end(), s.begin(), s.end());
    if (loss) {
      if (t.uses_bce()) {
        const std::size_t k = t.out_dim();
        loss_sum += nn::bce_with_logits<float>(logits, std::span(t.bits).subspan(start * k, idx.size() * k)).value * idx.size();
      } else {
        loss_sum += nn::softmax_cross_entropy<float>(logits, std::span(t.index).subspan(start, idx.size())).value * idx.size();
      }
    }
  }
  if (loss) *loss = loss_sum / static_cast<double>(f.n);
  return out;
}

template <class T>
nn::LossResult<T> classification_loss(const nn::Tensor<T>& logits, const ClassTargets& t, std::span<const std::size_t> idx) {
  if (t.uses_bce()) {
    const std::size_t k = t.out_dim();
    std::vector<std::uint8_t> y(idx.size() * k);
    for (std::size_t b = 0; b < idx.size(); ++b)
      std::copy_n(t.bits.begin() + idx[b] * k, k, y.begin() + b * k);
    return nn::bce_with_logits<T>(logits, y);
  }
  std::vector<int> y(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) y[b] = t.index[idx[b]];
  return nn::softmax_cross_entropy<T>(logits, y);
}

/// Hard per-pixel labels from segmentation logits (batch, rows, cols, K).
inline std::vector<int> logits_to_labels(const nn::Tensor<float>& logits) {
  const std::size_t k = logits.dim(3), px = logits.size() / k;
  std::vector<int> out(px);
  for (std::size_t p = 0; p < px; ++p) {
    if (k == 1) {
      out[p] = logits.data[p] > 0.0f;
    } else {
      const float* z = &logits.data[p * k];
      out[p] = static_cast<int>(std::max_element(z, z + k) - z);
    }
  }
  return out;
}

/// Per-case DSC (smooth 1) of hard predictions against the mask set.
template <class Model>
std::vector<double> predict_case_dsc(Model& seg, const FeatureSet& f, const MaskSet& masks, double* loss = nullptr) {
  constexpr std::size_t kEvalBatch = 64;
  std::vector<double> out;
  double loss_sum = 0;
  const std::size_t px = masks.rows * masks.cols;
  for (std::size_t start = 0; start < f.n; start += kEvalBatch) {
    std::vector<std::size_t> idx(std::min(kEvalBatch, f.n - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = seg.forward(f.batch<float>(idx));
    const auto truth = masks.batch(idx);
    if (loss) loss_sum += nn::dice_loss<float>(logits, truth).value * idx.size();
    const auto pred = logits_to_labels(logits);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::span<const int> p(pred.data() + b * px, px), t(truth.data() + b * px, px);
      out.push_back(masks.num_classes <= 2 ? metrics::dsc<int, int>(p, t, 1.0) : metrics::dsc_multiclass(p, t, masks.num_classes, 1.0));
    }
  }
  if (loss) *loss = loss_sum / static_cast<double>(f.n);
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Trainers

inline void check_classification_inputs(const FeatureSet& f, const ClassTargets& t, std::size_t out_dim, const char* what) {
  if (t.size() != f.n) throw DataError(std::string(what) + ": feature and label counts differ");
  if (t.out_dim() != out_dim) throw ConfigError(std::string(what) + ": label arity does not match out_dim");
}

inline TrainedProbe train_mlp_probe(const FeatureSet& train, const ClassTargets& train_y, const FeatureSet& val,
                                    const ClassTargets& val_y, const MlpProbeConfig& cfg, const TrainSchedule& sched,
                                    std::uint64_t seed) {
  if (train.spatial() || val.spatial()) throw DataError("mlp probe expects CLS vectors");
  if (val.n == 0) throw DataError("validation split is empty");
  check_classification_inputs(train, train_y, cfg.out_dim, "train");
  check_classification_inputs(val, val_y, cfg.out_dim, "val");
  if ((cfg.loss == LossKind::BCE) != train_y.uses_bce()) throw ConfigError("loss kind does not match label kind");

  MlpProbe<float> model(cfg);
  CounterRng init_rng(derive_key({seed, kStreamInitCls}));
  model.init(init_rng);
  CounterRng dropout_rng(derive_key({seed, kStreamDropout}));
  auto params = model.params();

  auto step = [&](std::span<const std::size_t> idx) {
    for (auto* p : params) p->zero_grad();
    const auto logits = model.forward(train.batch<float>(idx), true, &dropout_rng);
    auto l = classification_loss<float>(logits, train_y, idx);
    model.backward(l.grad);
    return l.value;
  };
  auto eval = [&] {
    EpochEval e;
    const auto s = predict_scores(model, val, val_y, [](auto& m, const auto& x) { return m.forward(x); }, &e.loss);
    e.score = classification_score(s, val_y);
    return e;
  };
  auto out = run_training(params, train.n, sched, seed, step, eval);
  out.architecture = model.descriptor();
  return out;
}

inline TrainedProbe train_conv_probe(const FeatureSet& train, const ClassTargets& train_y, const FeatureSet& val,
                                     const ClassTargets& val_y, const ConvProbeConfig& cfg, const TrainSchedule& sched,
                                     std::uint64_t seed) {
  if (!train.spatial() || !val.spatial()) throw DataError("conv probe expects patch grids");
  if (val.n == 0) throw DataError("validation split is empty");
  check_classification_inputs(train, train_y, cfg.out_dim, "train");
  check_classification_inputs(val, val_y, cfg.out_dim, "val");
  if ((cfg.loss == LossKind::BCE) != train_y.uses_bce()) throw ConfigError("loss kind does not match label kind");

  ConvProbe<float> model(cfg);
  CounterRng init_rng(derive_key({seed, kStreamInitCls}));
  model.init(init_rng);
  auto params = model.params();

  auto step = [&](std::span<const std::size_t> idx) {
    for (auto* p : params) p->zero_grad();
    const auto logits = model.forward(train.batch<float>(idx));
    auto l = classification_loss<float>(logits, train_y, idx);
    model.backward(l.grad);
    return l.value;
  };
  auto eval = [&] {
    EpochEval e;
    const auto s = predict_scores(model, val, val_y, [](auto& m, const auto& x) { return m.forward(x); }, &e.loss);
    e.score = classification_score(s, val_y);
    return e;
  };
  auto out = run_training(params, train.n, sched, seed, step, eval);
  out.architecture = model.descriptor();
  return out;
}

inline void check_seg_inputs(const FeatureSet& f, const MaskSet& m, const SegDecoderConfig& cfg, const char* what) {
  if (!f.spatial()) throw DataError(std::string(what) + ": segmentation expects patch grids");
  if (m.n != f.n) throw DataError(std::string(what) + ": grid and mask counts differ");
  if (m.rows != cfg.out_rows || m.cols != cfg.out_cols)
    throw DataError(std::string(what) + ": mask frame " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                    " does not match decoder output " + std::to_string(cfg.out_rows) + "x" + std::to_string(cfg.out_cols));
  if (m.num_classes != cfg.num_classes) throw DataError(std::string(what) + ": mask class count mismatch");
}

inline TrainedProbe train_linear_seg_decoder(const FeatureSet& train, const MaskSet& train_m, const FeatureSet& val,
                                             const MaskSet& val_m, const SegDecoderConfig& cfg, const TrainSchedule& sched,
                                             std::uint64_t seed) {
  if (val.n == 0) throw DataError("validation split is empty");
  check_seg_inputs(train, train_m, cfg, "train");
  check_seg_inputs(val, val_m, cfg, "val");

  SegDecoder<float> model(cfg);
  CounterRng init_rng(derive_key({seed, kStreamInitSeg}));
  model.init(init_rng);
  auto params = model.params();

  auto step = [&](std::span<const std::size_t> idx) {
    for (auto* p : params) p->zero_grad();
    const auto logits = model.forward(train.batch<float>(idx));
    auto l = nn::dice_loss<float>(logits, train_m.batch(idx));
    model.backward(l.grad);
    return l.value;
  };
  auto eval = [&] {
    EpochEval e;
    e.score = mean_of(predict_case_dsc(model, val, val_m, &e.loss));
    return e;
  };
  auto out = run_training(params, train.n, sched, seed, step, eval);
  out.architecture = model.descriptor();
  return out;
}

/// Which head's validation score drives checkpointing in multitask training.
enum class MultitaskSelection { Classification, Segmentation };

struct MultitaskConfig {
  ConvProbeConfig cls;
  SegDecoderConfig seg;
  double lambda = 1.0;
  MultitaskSelection selection = MultitaskSelection::Classification;
};

/// Conv classification head and linear segmentation head on the same patch
/// grid, trained on cls_loss + lambda * dice_loss. The classification head is
/// initialized from the same stream as train_conv_probe and the segmentation
/// head from its own stream, so lambda = 0 reproduces conv-probe training.
inline TrainedProbe train_multitask(const FeatureSet& train, const ClassTargets& train_y, const MaskSet& train_m,
                                    const FeatureSet& val, const ClassTargets& val_y, const MaskSet& val_m,
                                    const MultitaskConfig& cfg, const TrainSchedule& sched, std::uint64_t seed) {
  if (!train.spatial() || !val.spatial()) throw DataError("multitask expects patch grids");
  if (val.n == 0) throw DataError("validation split is empty");
  check_classification_inputs(train, train_y, cfg.cls.out_dim, "train");
  check_classification_inputs(val, val_y, cfg.cls.out_dim, "val");
  check_seg_inputs(train, train_m, cfg.seg, "train");
  check_seg_inputs(val, val_m, cfg.seg, "val");
  if (cfg.lambda < 0) throw ConfigError("multitask lambda must be non-negative");

  ConvProbe<float> cls(cfg.cls);
  SegDecoder<float> seg(cfg.seg);
  CounterRng cls_rng(derive_key({seed, kStreamInitCls}));
  CounterRng seg_rng(derive_key({seed, kStreamInitSeg}));
  cls.init(cls_rng);
  seg.init(seg_rng);
  auto params = cls.params();
  for (auto* p : seg.params()) params.push_back(p);

  auto step = [&](std::span<const std::size_t> idx) {
    for (auto* p : params) p->zero_grad();
    const auto x = train.batch<float>(idx);
    auto lc = classification_loss<float>(cls.forward(x), train_y, idx);
    cls.backward(lc.grad);
    auto ls = nn::dice_loss<float>(seg.forward(x), train_m.batch(idx));
    for (auto& g : ls.grad.data) g = static_cast<float>(g * cfg.lambda);
    seg.backward(ls.grad);
    return lc.value + cfg.lambda * ls.value;
  };
  auto eval = [&] {
    EpochEval e;
    if (cfg.selection == MultitaskSelection::Classification) {
      const auto s = predict_scores(cls, val, val_y, [](auto& m, const auto& xb) { return m.forward(xb); }, &e.loss);
      e.score = classification_score(s, val_y);
    } else {
      e.score = mean_of(predict_case_dsc(seg, val, val_m, &e.loss));
    }
    return e;
  };
  auto out = run_training(params, train.n, sched, seed, step, eval);
  out.architecture = {{"kind", "multitask"},
                      {"cls", cls.descriptor()},
                      {"seg", seg.descriptor()},
                      {"lambda", cfg.lambda},
                      {"selection", cfg.selection == MultitaskSelection::Classification ? "classification" : "segmentation"}};
  return out;
}

// ---------------------------------------------------------------------------
// Inference from a trained probe

inline std::size_t architecture_param_count(const nlohmann::json& arch) {
  const std::string kind = arch.at("kind");
  if (kind == "mlp") return nn::parameter_count(MlpProbe<float>(mlp_config_from_json(arch)).params());
  if (kind == "conv") return nn::parameter_count(ConvProbe<float>(conv_config_from_json(arch)).params());
  if (kind == "seg") return nn::parameter_count(SegDecoder<float>(seg_config_from_json(arch)).params());
  if (kind == "multitask")
    return architecture_param_count(arch.at("cls")) + architecture_param_count(arch.at("seg"));
  throw DataError("unknown probe kind '" + kind + "'");
}

/// Classification scores (see logits_to_scores) from an mlp, conv or multitask probe.
inline std::vector<double> predict_classification(const TrainedProbe& p, const FeatureSet& f, const ClassTargets& t) {
  const std::string kind = p.architecture.at("kind");
  auto fwd = [](auto& m, const auto& x) { return m.forward(x); };
  if (kind == "mlp") {
    MlpProbe<float> m(mlp_config_from_json(p.architecture));
    nn::load_params(m.params(), p.params);
    return predict_scores(m, f, t, fwd);
  }
  const bool multi = kind == "multitask";
  if (kind != "conv" && !multi) throw DataError("probe kind '" + kind + "' has no classification head");
  ConvProbe<float> m(conv_config_from_json(multi ? p.architecture.at("cls") : p.architecture));
  auto ps = m.params();
  std::vector<float> head(p.params.begin(), p.params.begin() + static_cast<std::ptrdiff_t>(nn::parameter_count(ps)));
  nn::load_params(ps, head);
  return predict_scores(m, f, t, fwd);
}

inline std::vector<double> predict_segmentation_dsc(const TrainedProbe& p, const FeatureSet& f, const MaskSet& masks) {
  const std::string kind = p.architecture.at("kind");
  if (kind == "seg") {
    SegDecoder<float> m(seg_config_from_json(p.architecture));
    nn::load_params(m.params(), p.params);
    return predict_case_dsc(m, f, masks);
  }
  if (kind != "multitask") throw DataError("probe kind '" + kind + "' has no segmentation head");
  const std::size_t n_cls = architecture_param_count(p.architecture.at("cls"));
  SegDecoder<float> m(seg_config_from_json(p.architecture.at("seg")));
  nn::load_params(m.params(), std::vector<float>(p.params.begin() + static_cast<std::ptrdiff_t>(n_cls), p.params.end()));
  return predict_case_dsc(m, f, masks);
}

}  // namespace xrprobe::probe
