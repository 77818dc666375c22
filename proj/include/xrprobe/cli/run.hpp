#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "xrprobe/bundle.hpp"
#include "xrprobe/cli/config.hpp"
#include "xrprobe/cli/table.hpp"
#include "xrprobe/error.hpp"
#include "xrprobe/fairness.hpp"
#include "xrprobe/manifest.hpp"
#include "xrprobe/metrics/classification.hpp"
#include "xrprobe/metrics/detection.hpp"
#include "xrprobe/metrics/nlg.hpp"
#include "xrprobe/metrics/report.hpp"
#include "xrprobe/metrics/segmentation.hpp"
#include "xrprobe/pca.hpp"
#include "xrprobe/probe/data.hpp"
#include "xrprobe/probe/io.hpp"
#include "xrprobe/probe/train.hpp"
#include "xrprobe/report_prep.hpp"
#include "xrprobe/retrieval.hpp"
#include "xrprobe/splits.hpp"

namespace xrprobe::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct RunResult {
  ojson report;
  std::vector<std::string> artifacts;
  std::vector<std::string> plan;
};

/// Runs `n` independent jobs on up to `jobs` threads. Results must be written
/// by index, so assembly order does not depend on scheduling. The exception
/// of the lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(n))));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + p.string() + "' for writing");
  os << text;
  if (!os) throw DataError("write failed for '" + p.string() + "'");
}

template <class J>
void write_json(const fs::path& p, const J& j) {
  write_text(p, j.dump(2) + "\n");
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (report::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::string fraction_tag(double f) {
  std::ostringstream s;
  s << f * 100;
  return s.str() + "pct";
}

/// Directory outputs get run_config.json inside; file outputs get <out>.run.json.
inline bool output_is_dir(const std::string& task) { return task == "probe" || task == "segment" || task == "pca"; }

inline fs::path archive_path(const RunConfig& cfg) {
  return output_is_dir(cfg.task()) ? fs::path(cfg.out()) / "run_config.json" : fs::path(cfg.out() + ".run.json");
}

// ---------------------------------------------------------------------------
// probe / segment

struct ProbeJob {
  double fraction;
  std::size_t fraction_index;
  std::uint64_t seed;
  std::vector<std::size_t> train;
};

inline probe::MlpProbeConfig mlp_config(const nlohmann::json& p, std::size_t d, const probe::ClassTargets& t) {
  probe::MlpProbeConfig c;
  c.in_dim = d;
  if (p.contains("hidden")) {
    c.hidden1 = p.at("hidden").at(0);
    c.hidden2 = p.at("hidden").at(1);
  }
  c.out_dim = t.out_dim();
  c.dropout = p.value("dropout", 0.2);
  c.loss = t.uses_bce() ? probe::LossKind::BCE : probe::LossKind::CE;
  return c;
}

inline probe::ConvProbeConfig conv_config(const nlohmann::json& p, std::size_t d, const probe::ClassTargets& t) {
  probe::ConvProbeConfig c = p.value("preset", std::string{}) == "deep" ? probe::ConvProbeConfig::deep_preset(d, t.out_dim())
                                                                         : probe::ConvProbeConfig{d, {}, t.out_dim(), probe::LossKind::BCE};
  if (p.contains("conv_layers")) {
    c.layers.clear();
    for (const auto& l : p.at("conv_layers")) c.layers.push_back({l.at(0), l.at(1)});
  }
  c.loss = t.uses_bce() ? probe::LossKind::BCE : probe::LossKind::CE;
  return c;
}

/// Test scores with optional per-group mean aggregation (binary tasks).
inline double score_test(const std::vector<double>& scores, const probe::ClassTargets& t, const DatasetManifest& m,
                         const std::vector<std::size_t>& test, bool aggregate) {
  if (!aggregate || t.kind != LabelKind::Binary) return probe::classification_score(scores, t);
  std::vector<std::string> groups;
  for (std::size_t i : test) groups.push_back(m.entries[i].group_id.value_or(m.entries[i].image_id));
  const auto g = metrics::aggregate_per_group(scores, t.index, groups);
  probe::ClassTargets gt{LabelKind::Binary, 2, g.labels, {}};
  for (int v : g.labels) gt.bits.push_back(static_cast<std::uint8_t>(v));
  return probe::classification_score(g.scores, gt);
}

inline RunResult run_probe(const RunConfig& cfg, std::ostream& log) {
  const bool segment = cfg.task() == "segment";
  const auto pcfg = cfg.section("probe");
  const std::string kind = segment ? "seg" : pcfg.value("kind", std::string{"mlp"});
  const auto seeds = cfg.seeds();
  const auto fractions = cfg.fractions();

  RunResult res;
  const EmbeddingBundle bundle = load_bundle(cfg.bundle());
  const DatasetManifest m = load_manifest(cfg.manifest());
  check_resolves(m, bundle);
  check_has_test(m);
  const auto val = m.indices(Split::Val);
  const auto test = m.indices(Split::Test);
  if (val.empty()) throw DataError("manifest has an empty val split");
  if (segment && m.kind != LabelKind::Mask) throw DataError("segment task needs a manifest with label_kind 'mask'");
  if (!segment && (m.kind == LabelKind::Mask || m.kind == LabelKind::Boxes || m.kind == LabelKind::Text))
    throw DataError("probe task needs a classification manifest");

  std::vector<ProbeJob> jobs;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const auto subsets = make_fraction_splits(m, fractions[fi], seeds);
    for (std::size_t si = 0; si < seeds.size(); ++si) jobs.push_back({fractions[fi], fi, seeds[si], subsets[si]});
  }
  for (const auto& j : jobs)
    res.plan.push_back("train " + kind + " fraction=" + fraction_tag(j.fraction) + " seed=" + std::to_string(j.seed) +
                       " n_train=" + std::to_string(j.train.size()));
  if (cfg.dry_run()) return res;

  probe::TrainSchedule sched = probe::schedule_from_json(cfg.section("schedule"),
                                                         segment ? probe::TrainSchedule::segmentation() : probe::TrainSchedule{});
  const bool spatial = kind != "mlp";
  const int mask_classes = segment ? m.num_classes : pcfg.value("mask_classes", 2);
  const bool need_masks = kind == "seg" || kind == "multitask";
  const bool need_labels = kind != "seg";

  auto features = [&](const std::vector<std::size_t>& idx) {
    return spatial ? probe::gather_patches(bundle, m, idx) : probe::gather_cls(bundle, m, idx);
  };
  const auto val_x = features(val);
  const auto test_x = features(test);
  probe::ClassTargets val_y, test_y;
  probe::MaskSet val_m, test_m;
  if (need_labels) {
    val_y = probe::gather_targets(m, val);
    test_y = probe::gather_targets(m, test);
  }
  if (need_masks) {
    val_m = probe::gather_masks(m, val, mask_classes);
    test_m = probe::gather_masks(m, test, mask_classes);
  }
  const bool aggregate = cfg.raw.value("aggregate_groups", false);
  const fs::path out_dir = cfg.out();
  fs::create_directories(out_dir);

  struct JobResult {
    std::map<std::string, double> metrics;
    std::string probe_file;
    int best_epoch = 0, epochs = 0;
  };
  std::vector<JobResult> results(jobs.size());
  std::mutex log_mu;

  parallel_for(jobs.size(), cfg.jobs(), [&](std::size_t ji) {
    const auto& job = jobs[ji];
    const auto train_x = features(job.train);
    probe::TrainedProbe tp;
    JobResult& r = results[ji];
    if (kind == "mlp" || kind == "conv") {
      const auto train_y = probe::gather_targets(m, job.train);
      if (kind == "mlp")
        tp = probe::train_mlp_probe(train_x, train_y, val_x, val_y, mlp_config(pcfg, bundle.dim(), train_y), sched, job.seed);
      else
        tp = probe::train_conv_probe(train_x, train_y, val_x, val_y, conv_config(pcfg, bundle.dim(), train_y), sched, job.seed);
      r.metrics[m.kind == LabelKind::Multiclass ? "mcc" : "auroc"] =
          score_test(probe::predict_classification(tp, test_x, test_y), test_y, m, test, aggregate);
    } else {
      const auto train_m = probe::gather_masks(m, job.train, mask_classes);
      const probe::SegDecoderConfig seg_cfg{bundle.dim(), mask_classes, train_m.rows, train_m.cols};
      if (kind == "seg") {
        tp = probe::train_linear_seg_decoder(train_x, train_m, val_x, val_m, seg_cfg, sched, job.seed);
      } else {
        const auto train_y = probe::gather_targets(m, job.train);
        probe::MultitaskConfig mt{conv_config(pcfg, bundle.dim(), train_y), seg_cfg, pcfg.value("lambda", 1.0),
                                  pcfg.value("selection", std::string{"classification"}) == "segmentation"
                                      ? probe::MultitaskSelection::Segmentation
                                      : probe::MultitaskSelection::Classification};
        tp = probe::train_multitask(train_x, train_y, train_m, val_x, val_y, val_m, mt, sched, job.seed);
        r.metrics[m.kind == LabelKind::Multiclass ? "mcc" : "auroc"] =
            score_test(probe::predict_classification(tp, test_x, test_y), test_y, m, test, aggregate);
      }
      const auto per_case = probe::predict_segmentation_dsc(tp, test_x, test_m);
      r.metrics["dsc"] = probe::mean_of(per_case);
      std::vector<std::uint8_t> positive;
      for (std::size_t i = 0; i < test_m.n; ++i) {
        bool any = false;
        for (std::size_t p = 0; p < test_m.rows * test_m.cols && !any; ++p) any = test_m.px[i * test_m.rows * test_m.cols + p] != 0;
        positive.push_back(any);
      }
      try {
        r.metrics["dice_pos"] = metrics::dice_pos(per_case, positive);
      } catch (const UndefinedMetric&) {
      }
    }
    r.probe_file = "probe_" + kind + "_" + fraction_tag(job.fraction) + "_seed" + std::to_string(job.seed) + ".xrp";
    probe::save_probe(tp, (out_dir / r.probe_file).string());
    r.best_epoch = tp.best_epoch;
    r.epochs = tp.epochs_run;
    std::lock_guard lock(log_mu);
    log << "[" << kind << "] fraction=" << fraction_tag(job.fraction) << " seed=" << job.seed << " epochs=" << tp.epochs_run
        << " best_epoch=" << tp.best_epoch << " stop=" << tp.stop_reason << "\n";
  });

  ojson report;
  report["task"] = cfg.task();
  report["kind"] = kind;
  report["n_val"] = val.size();
  report["n_test"] = test.size();
  report["results"] = ojson::array();
  std::vector<TableRow> rows;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    std::map<std::string, std::vector<double>> per_metric;
    ojson runs = ojson::array();
    for (std::size_t ji = 0; ji < jobs.size(); ++ji) {
      if (jobs[ji].fraction_index != fi) continue;
      for (const auto& [name, v] : results[ji].metrics) per_metric[name].push_back(v);
      runs.push_back({{"seed", jobs[ji].seed}, {"n_train", jobs[ji].train.size()}, {"probe", results[ji].probe_file},
                      {"best_epoch", results[ji].best_epoch}, {"epochs", results[ji].epochs}});
      res.artifacts.push_back((out_dir / results[ji].probe_file).string());
    }
    ojson entry;
    entry["fraction"] = fractions[fi];
    entry["runs"] = runs;
    entry["metrics"] = ojson::array();
    TableRow row{fraction_tag(fractions[fi]), {}};
    for (const auto& [name, vals] : per_metric) {
      const auto mr = metrics::MetricReport::from_values(name, vals, test.size());
      const nlohmann::json mj = mr;
      entry["metrics"].push_back(ojson::parse(mj.dump()));
      row.scores[name] = mr.mean;
    }
    report["results"].push_back(entry);
    rows.push_back(std::move(row));
  }
  const auto table = render_table(rows);
  write_json(out_dir / "report.json", report);
  write_text(out_dir / "table.txt", table.text);
  res.artifacts.push_back((out_dir / "report.json").string());
  res.artifacts.push_back((out_dir / "table.txt").string());
  res.report = std::move(report);
  return res;
}

// ---------------------------------------------------------------------------
// retrieve

inline RunResult run_retrieve(const RunConfig& cfg, std::ostream&) {
  const auto r = cfg.section("retrieval");
  RunResult res;
  const auto ks = r.at("k").get<std::vector<int>>();
  res.plan.push_back("retrieve task=" + r.at("task").get<std::string>());
  if (cfg.dry_run()) return res;
  const EmbeddingBundle bundle = load_bundle(cfg.bundle());
  const DatasetManifest m = load_manifest(cfg.manifest());
  std::ifstream in(r.at("task").get<std::string>());
  if (!in) throw DataError("cannot open retrieval task '" + r.at("task").get<std::string>() + "'");
  nlohmann::json tj;
  try {
    tj = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("retrieval task is not valid JSON: ") + e.what());
  }
  const auto task = make_retrieval_task(bundle, m, tj.at("queries").get<std::vector<std::string>>(),
                                        tj.at("candidates").get<std::vector<std::string>>(), ks);
  std::vector<double> p;
  try {
    p = precision_at_ks(task, ks);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  ojson report;
  report["task"] = "retrieve";
  report["n_queries"] = task.queries.size();
  report["n_candidates"] = task.candidates.size();
  ojson pk;
  for (std::size_t i = 0; i < ks.size(); ++i) pk[std::to_string(ks[i])] = p[i];
  report["precision_at_k"] = pk;
  write_json(cfg.out(), report);
  res.artifacts.push_back(cfg.out());
  res.report = std::move(report);
  return res;
}

// ---------------------------------------------------------------------------
// fairness

/// Mean AUROC over labels with both classes; UndefinedMetric when none has.
inline double strict_auc(const std::vector<double>& scores, const probe::ClassTargets& t) {
  const std::size_t n = t.size(), k = t.out_dim();
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  double sum = 0;
  int used = 0;
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
  if (used == 0) throw UndefinedMetric("no label with both classes");
  return sum / used;
}

inline RunResult run_fairness(const RunConfig& cfg, std::ostream& log) {
  const auto f = cfg.section("fairness");
  const auto axis = fairness::parse_axis(f.at("axis"));
  const auto n_boot = f.value("n_bootstrap", 200);
  const double alpha = f.value("alpha", 0.05);
  const std::uint64_t seed = f.value("seed", std::uint64_t{0});
  nlohmann::json pcfg = f.value("probe", nlohmann::json::object());
  if (f.contains("probe_cfg")) {
    std::ifstream in(f.at("probe_cfg").get<std::string>());
    if (!in) throw ConfigError("cannot open probe config '" + f.at("probe_cfg").get<std::string>() + "'");
    pcfg = nlohmann::json::parse(in);
  }
  const auto sched = probe::schedule_from_json(pcfg.value("schedule", f.value("schedule", nlohmann::json::object())));

  RunResult res;
  const EmbeddingBundle bundle = load_bundle(cfg.bundle());
  const DatasetManifest m = load_manifest(cfg.manifest());
  check_resolves(m, bundle);
  if (m.kind != LabelKind::Binary && m.kind != LabelKind::Multilabel)
    throw DataError("fairness needs a binary or multilabel manifest");
  const auto matrix = fairness::subgroup_matrix(m, axis);
  for (const auto& c : matrix.cells)
    res.plan.push_back("cell train=" + c.train_group + " eval=" + c.eval_group + " n_test=" + std::to_string(c.test.size()));
  if (cfg.dry_run()) return res;

  // One model per train group, shared by its eval cells.
  std::vector<std::string> groups;
  for (const auto& c : matrix.cells)
    if (std::find(groups.begin(), groups.end(), c.train_group) == groups.end()) groups.push_back(c.train_group);
  std::vector<probe::TrainedProbe> models(groups.size());
  parallel_for(groups.size(), cfg.jobs(), [&](std::size_t gi) {
    const auto& cell = *std::find_if(matrix.cells.begin(), matrix.cells.end(), [&](const auto& c) { return c.train_group == groups[gi]; });
    const auto tx = probe::gather_cls(bundle, m, cell.train), vx = probe::gather_cls(bundle, m, cell.val);
    const auto ty = probe::gather_targets(m, cell.train), vy = probe::gather_targets(m, cell.val);
    models[gi] = probe::train_mlp_probe(tx, ty, vx, vy, mlp_config(pcfg, bundle.dim(), ty), sched, seed);
  });

  std::vector<fairness::CellResult> cells(matrix.cells.size());
  parallel_for(matrix.cells.size(), cfg.jobs(), [&](std::size_t ci) {
    const auto& c = matrix.cells[ci];
    const auto gi = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), c.train_group) - groups.begin());
    const auto x = probe::gather_cls(bundle, m, c.test);
    const auto y = probe::gather_targets(m, c.test);
    const auto scores = probe::predict_classification(models[gi], x, y);
    const std::size_t k = y.out_dim();
    auto boot = fairness::bootstrap(
        c.test.size(),
        [&](std::span<const std::size_t> idx) {
          std::vector<double> s;
          probe::ClassTargets t{y.kind, y.num_classes, {}, {}};
          for (std::size_t i : idx)
            for (std::size_t j = 0; j < k; ++j) {
              s.push_back(scores[i * k + j]);
              t.bits.push_back(y.bits[i * k + j]);
            }
          if (y.kind == LabelKind::Binary)
            for (std::size_t i : idx) t.index.push_back(y.index[i]);
          return strict_auc(s, t);
        },
        static_cast<std::size_t>(n_boot), seed);
    cells[ci] = {c.train_group, c.eval_group, std::move(boot), c.test.size()};
  });
  const auto rep = fairness::fairness_report(axis, std::move(cells), matrix.skipped, alpha);
  for (const auto& s : rep.skipped) log << "[fairness] skipped: " << s << "\n";
  res.report = fairness::to_json(rep);
  write_json(cfg.out(), res.report);
  res.artifacts.push_back(cfg.out());
  return res;
}

// ---------------------------------------------------------------------------
// metrics

inline ojson metric_entry(const std::string& name, double v, std::size_t n) {
  nlohmann::json j = metrics::MetricReport::from_values(name, {v}, n);
  return ojson::parse(j.dump());
}

inline RunResult run_metrics(const RunConfig& cfg, std::ostream&) {
  const auto mc = cfg.section("metrics");
  const std::string mode = mc.at("mode");
  RunResult res;
  res.plan.push_back("metrics " + mode);
  if (cfg.dry_run()) return res;
  const auto preds = read_jsonl(mc.at("pred"));
  const auto refs = read_jsonl(mc.at("ref"));
  std::map<std::string, nlohmann::json> ref_by_id;
  for (const auto& r : refs) ref_by_id[r.at("id").get<std::string>()] = r;

  ojson report;
  report["task"] = "metrics";
  report["mode"] = mode;
  report["metrics"] = ojson::array();
  try {
    if (mode == "nlg") {
      std::vector<metrics::Tokens> cands;
      std::vector<std::vector<metrics::Tokens>> rs;
      for (const auto& p : preds) {
        const auto id = p.at("id").get<std::string>();
        auto it = ref_by_id.find(id);
        if (it == ref_by_id.end()) throw DataError("no reference for id '" + id + "'");
        cands.push_back(metrics::tokenize(p.at("text").get<std::string>()));
        std::vector<metrics::Tokens> refs_i;
        if (it->second.contains("texts"))
          for (const auto& t : it->second.at("texts")) refs_i.push_back(metrics::tokenize(t.get<std::string>()));
        else
          refs_i.push_back(metrics::tokenize(it->second.at("text").get<std::string>()));
        rs.push_back(std::move(refs_i));
      }
      const std::size_t n = cands.size();
      for (int k = 1; k <= 4; ++k) report["metrics"].push_back(metric_entry("bleu" + std::to_string(k), metrics::bleu(cands, rs, k), n));
      report["metrics"].push_back(metric_entry("rouge_l", metrics::rouge_l_corpus(cands, rs), n));
      report["metrics"].push_back(metric_entry("cider", metrics::cider(cands, rs), n));
    } else if (mode == "det") {
      std::map<std::string, metrics::ImageBoxes> pred_by_id;
      for (const auto& p : preds) {
        auto& v = pred_by_id[p.at("id").get<std::string>()];
        for (const auto& b : p.at("boxes")) v.push_back(parse_box(b));
      }
      std::vector<metrics::ImageBoxes> pv, tv;
      for (const auto& r : refs) {
        metrics::ImageBoxes t;
        for (const auto& b : r.at("boxes")) t.push_back(parse_box(b));
        tv.push_back(std::move(t));
        auto it = pred_by_id.find(r.at("id").get<std::string>());
        pv.push_back(it == pred_by_id.end() ? metrics::ImageBoxes{} : it->second);
      }
      report["metrics"].push_back(metric_entry("map50", metrics::map50(pv, tv), tv.size()));
      report["metrics"].push_back(metric_entry("miou", metrics::detection_miou(pv, tv), tv.size()));
    } else {
      std::vector<Box> pv, tv;
      for (const auto& p : preds) {
        const auto id = p.at("id").get<std::string>();
        auto it = ref_by_id.find(id);
        if (it == ref_by_id.end()) throw DataError("no truth box for id '" + id + "'");
        pv.push_back(parse_box(p.at("box")));
        tv.push_back(parse_box(it->second.at("box")));
      }
      report["metrics"].push_back(metric_entry("accuracy_iou_gt_0.5", metrics::grounding_accuracy(pv, tv, 0.5), pv.size()));
      report["metrics"].push_back(metric_entry("miou", metrics::grounding_miou(pv, tv), pv.size()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("prediction file schema error: ") + e.what());
  } catch (const UndefinedMetric& e) {
    throw DataError(e.what());
  }
  write_json(cfg.out(), report);
  res.artifacts.push_back(cfg.out());
  res.report = std::move(report);
  return res;
}

// ---------------------------------------------------------------------------
// report-prep

inline RunResult run_report_prep(const RunConfig& cfg, std::ostream&) {
  const auto rc = cfg.section("report_prep");
  RunResult res;
  res.plan.push_back("report-prep " + rc.at("in").get<std::string>());
  if (cfg.dry_run()) return res;
  const auto keywords = rc.value("keywords", report::default_keywords());
  const std::string audit_path = rc.value("audit", cfg.out() + ".audit.jsonl");
  std::string out, audit;
  std::size_t n = 0, flagged = 0;
  for (const auto& j : read_jsonl(rc.at("in"))) {
    report::RawReport raw;
    try {
      raw = {j.at("id").get<std::string>(), j.at("text").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("raw report schema error: ") + e.what());
    }
    report::AuditEntry a;
    const auto sr = report::preprocess(raw, a, keywords);
    out += report::to_json(sr).dump() + "\n";
    if (!a.empty()) {
      audit += report::to_json(a).dump() + "\n";
      ++flagged;
    }
    ++n;
  }
  write_text(cfg.out(), out);
  write_text(audit_path, audit);
  res.artifacts = {cfg.out(), audit_path};
  res.report = {{"task", "report-prep"}, {"reports", n}, {"flagged", flagged}};
  return res;
}

// ---------------------------------------------------------------------------
// pca

inline std::string file_safe(std::string id) {
  for (auto& c : id)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return id;
}

inline RunResult run_pca(const RunConfig& cfg, std::ostream&) {
  const auto pc = cfg.section("pca");
  const auto ids = pc.at("ids").get<std::vector<std::string>>();
  const std::size_t k = pc.value("k", 3);
  const bool per_image = pc.value("per_image", false);
  RunResult res;
  for (const auto& id : ids) res.plan.push_back("pca " + id);
  if (cfg.dry_run()) return res;
  const EmbeddingBundle bundle = load_bundle(cfg.bundle());
  std::vector<const EmbeddingRecord*> recs;
  for (const auto& id : ids) recs.push_back(&bundle.at(id));
  const fs::path out_dir = cfg.out();
  fs::create_directories(out_dir);
  ojson report;
  report["task"] = "pca";
  report["per_image"] = per_image;
  report["images"] = ojson::array();
  auto emit = [&](const EmbeddingRecord& r, const pca::PcaModel& model) {
    const auto grid = pca::project_patch_grid(r, model, k);
    const auto path = out_dir / (file_safe(r.image_id) + ".ppm");
    pca::render_component_map(grid, path.string());
    res.artifacts.push_back(path.string());
    report["images"].push_back({{"id", r.image_id}, {"map", path.filename().string()}});
  };
  if (per_image) {
    for (const auto* r : recs) {
      const auto model = pca::pca_fit(pca::patch_rows({r}), k);
      write_json(out_dir / (file_safe(r->image_id) + ".pca.json"), pca::to_json(model));
      emit(*r, model);
    }
  } else {
    const auto model = pca::pca_fit(pca::patch_rows(recs), k);
    write_json(out_dir / "pca_model.json", pca::to_json(model));
    res.artifacts.push_back((out_dir / "pca_model.json").string());
    report["explained_ratio"] = model.explained_ratio;
    for (const auto* r : recs) emit(*r, model);
  }
  write_json(out_dir / "report.json", report);
  res.report = std::move(report);
  return res;
}

// ---------------------------------------------------------------------------

/// Validates, archives the config verbatim beside the outputs, and executes.
inline RunResult run(const RunConfig& cfg, std::ostream& log) {
  const auto errs = validate(cfg);
  if (!errs.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  const std::string task = cfg.task();
  auto dispatch = [&]() -> RunResult {
    if (task == "probe" || task == "segment") return run_probe(cfg, log);
    if (task == "retrieve") return run_retrieve(cfg, log);
    if (task == "fairness") return run_fairness(cfg, log);
    if (task == "metrics") return run_metrics(cfg, log);
    if (task == "report-prep") return run_report_prep(cfg, log);
    return run_pca(cfg, log);
  };
  RunResult res;
  try {
    res = dispatch();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config value error: ") + e.what());
  }
  if (cfg.dry_run()) return res;
  write_json(archive_path(cfg), cfg.raw);
  res.artifacts.push_back(archive_path(cfg).string());
  return res;
}

}  // namespace xrprobe::cli
