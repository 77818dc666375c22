#pragma once

// Run configuration (JSON, schema_version 1). Common keys:
//
//   schema_version  1
//   task            "probe" | "segment" | "retrieve" | "fairness" | "metrics" | "report-prep" | "pca"
//   bundle, manifest, out
//   seeds           [0, 1, 2, 3, 4]
//   fractions       [0.01, 0.1, 1.0]
//   jobs            worker count (default 1, or XRPROBE_JOBS)
//   dry_run         print the plan only
//   probe           { "kind": "mlp"|"conv"|"seg"|"multitask", "hidden": [h1, h2], "dropout": 0.2,
//                     "conv_layers": [[k, ch], ...], "preset": "deep", "lambda": 1.0,
//                     "selection": "classification"|"segmentation" }
//   schedule        { "batch", "max_epochs", "lr", "weight_decay", "plateau_factor",
//                     "plateau_patience", "early_stop_patience", "max_iterations" }
//   aggregate_groups  mean-aggregate test scores per group_id before scoring
//   retrieval       { "task": "task.json", "k": [5, 10, 100] }
//   fairness        { "axis": "sex"|"age", "n_bootstrap": 200, "alpha": 0.05, "seed": 0, "probe": {...}, "schedule": {...} }
//   metrics         { "mode": "nlg"|"det"|"grounding", "pred": "...", "ref": "..." }
//   report_prep     { "in": "raw.jsonl", "audit": "audit.jsonl", "keywords": ["FINDINGS", "REPORT"] }
//   pca             { "ids": [...], "k": 3, "per_image": false }

#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrprobe/error.hpp"

namespace xrprobe::cli {

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
  nlohmann::json raw;
  // Command-line overrides; they never touch `raw`, which is archived verbatim.
  std::optional<int> jobs_override;
  bool force_dry_run = false;

  std::string task() const { return raw.value("task", ""); }
  std::string bundle() const { return raw.value("bundle", ""); }
  std::string manifest() const { return raw.value("manifest", ""); }
  std::string out() const { return raw.value("out", ""); }
  bool dry_run() const { return force_dry_run || raw.value("dry_run", false); }

  std::vector<std::uint64_t> seeds() const { return raw.value("seeds", std::vector<std::uint64_t>{0}); }
  std::vector<double> fractions() const { return raw.value("fractions", std::vector<double>{1.0}); }
  nlohmann::json section(const std::string& key) const {
    return raw.contains(key) ? raw.at(key) : nlohmann::json::object();
  }

  int jobs() const {
    if (jobs_override) return *jobs_override;
    if (raw.contains("jobs")) return raw.at("jobs").get<int>();
    if (const char* env = std::getenv("XRPROBE_JOBS")) {
      try {
        return std::max(1, std::stoi(env));
      } catch (...) {
        return 1;
      }
    }
    return 1;
  }
};

/// Every schema violation, so all of them can be reported before any work.
inline std::vector<std::string> validate(const RunConfig& cfg) {
  std::vector<std::string> errs;
  const auto& j = cfg.raw;
  if (!j.is_object()) return {"config must be a JSON object"};
  auto need_string = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty())
      errs.push_back(std::string("'") + key + "' must be a non-empty string");
  };
  if (j.value("schema_version", 0) != kSchemaVersion) errs.push_back("'schema_version' must be 1");
  static const std::set<std::string> tasks{"probe", "segment", "retrieve", "fairness", "metrics", "report-prep", "pca"};
  const std::string task = j.contains("task") && j.at("task").is_string() ? j.at("task").get<std::string>() : "";
  if (!tasks.contains(task)) errs.push_back("'task' must be one of probe, segment, retrieve, fairness, metrics, report-prep, pca");
  need_string("out");

  if (task == "probe" || task == "segment" || task == "retrieve" || task == "fairness" || task == "pca") need_string("bundle");
  if (task == "probe" || task == "segment" || task == "retrieve" || task == "fairness") need_string("manifest");

  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array() || j.at("seeds").empty()) errs.push_back("'seeds' must be a non-empty list");
    else
      for (const auto& s : j.at("seeds"))
        if (!s.is_number_integer() || s.get<std::int64_t>() < 0) errs.push_back("'seeds' entries must be non-negative integers");
  } else if (task == "probe" || task == "segment") {
    errs.push_back("'seeds' is required");
  }
  if (j.contains("fractions")) {
    if (!j.at("fractions").is_array() || j.at("fractions").empty()) errs.push_back("'fractions' must be a non-empty list");
    else
      for (const auto& f : j.at("fractions"))
        if (!f.is_number() || !(f.get<double>() > 0 && f.get<double>() <= 1)) errs.push_back("'fractions' entries must be in (0, 1]");
  }
  if (j.contains("jobs") && (!j.at("jobs").is_number_integer() || j.at("jobs").get<int>() < 1))
    errs.push_back("'jobs' must be a positive integer");

  const auto probe = cfg.section("probe");
  if (task == "probe") {
    static const std::set<std::string> kinds{"mlp", "conv", "multitask"};
    if (!probe.contains("kind") || !probe.at("kind").is_string() || !kinds.contains(probe.at("kind").get<std::string>()))
      errs.push_back("'probe.kind' must be mlp, conv or multitask (use task 'segment' for seg)");
  }
  if (probe.contains("dropout") && (!probe.at("dropout").is_number() || probe.at("dropout").get<double>() < 0 ||
                                    probe.at("dropout").get<double>() >= 1))
    errs.push_back("'probe.dropout' must be in [0, 1)");
  if (probe.contains("lambda") && (!probe.at("lambda").is_number() || probe.at("lambda").get<double>() < 0))
    errs.push_back("'probe.lambda' must be non-negative");

  if (task == "retrieve") {
    const auto r = cfg.section("retrieval");
    if (!r.contains("task") || !r.at("task").is_string()) errs.push_back("'retrieval.task' must name a task file");
    if (!r.contains("k") || !r.at("k").is_array() || r.at("k").empty()) errs.push_back("'retrieval.k' must be a non-empty list");
  }
  if (task == "fairness") {
    const auto f = cfg.section("fairness");
    const auto axis = f.value("axis", std::string{});
    if (axis != "sex" && axis != "age") errs.push_back("'fairness.axis' must be sex or age");
    if (f.contains("n_bootstrap") && (!f.at("n_bootstrap").is_number_integer() || f.at("n_bootstrap").get<int>() < 1))
      errs.push_back("'fairness.n_bootstrap' must be a positive integer");
  }
  if (task == "metrics") {
    const auto m = cfg.section("metrics");
    const auto mode = m.value("mode", std::string{});
    if (mode != "nlg" && mode != "det" && mode != "grounding") errs.push_back("'metrics.mode' must be nlg, det or grounding");
    if (!m.contains("pred") || !m.contains("ref")) errs.push_back("'metrics.pred' and 'metrics.ref' are required");
  }
  if (task == "report-prep" && !cfg.section("report_prep").contains("in")) errs.push_back("'report_prep.in' is required");
  if (task == "pca") {
    const auto p = cfg.section("pca");
    if (!p.contains("ids") || !p.at("ids").is_array() || p.at("ids").empty()) errs.push_back("'pca.ids' must be a non-empty list");
    if (p.value("k", 3) < 1 || p.value("k", 3) > 3) errs.push_back("'pca.k' must be in 1..3");
  }
  return errs;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return RunConfig{nlohmann::json::parse(in), std::nullopt, false};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace xrprobe::cli
