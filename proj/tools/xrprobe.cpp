// xrprobe command-line entry point. Every subcommand except `validate` builds
// a run config and hands it to the orchestrator, so `run --config` on the
// archived config repeats the same work.

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xrprobe/xrprobe.hpp"

namespace {

using nlohmann::json;
using namespace xrprobe;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

struct Validation {
  std::size_t records = 0;
  std::vector<std::string> warnings;
};

Validation validate_inputs(const std::string& bundle_path, const std::string& manifest_path) {
  const auto b = load_bundle(bundle_path);
  Validation v{b.size(), {}};
  auto check = [&](const std::string& id, const char* what, std::span<const float> x) {
    double n2 = 0;
    for (float f : x) {
      if (!std::isfinite(f)) {
        v.warnings.push_back("'" + id + "': non-finite value in " + what);
        return;
      }
      n2 += double{f} * f;
    }
    if (n2 == 0) v.warnings.push_back("'" + id + "': zero-norm " + std::string(what));
  };
  for (const auto& r : b.records()) {
    check(r.image_id, "CLS vector", r.cls);
    for (std::size_t y = 0; y < r.h; ++y)
      for (std::size_t x = 0; x < r.w; ++x)
        check(r.image_id, ("patch (" + std::to_string(y) + "," + std::to_string(x) + ")").c_str(), r.patch(y, x));
  }
  if (!manifest_path.empty()) {
    const auto m = load_manifest(manifest_path);
    check_resolves(m, b);
  }
  return v;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Config);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Data);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Numeric);
  } catch (const UndefinedMetric& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Data);
  }
}

int execute(json cfg, int jobs, bool dry_run) {
  cfg["schema_version"] = cli::kSchemaVersion;
  cli::RunConfig rc{std::move(cfg), std::nullopt, dry_run};
  if (jobs > 0) rc.jobs_override = jobs;
  const auto res = cli::run(rc, std::cerr);
  if (dry_run) {
    for (const auto& p : res.plan) std::cout << p << "\n";
    std::cout << res.plan.size() << " step(s) planned, nothing executed\n";
    return 0;
  }
  for (const auto& a : res.artifacts) std::cout << "wrote " << a << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frozen-embedding evaluation toolkit for chest X-ray foundation models"};
  app.require_subcommand(1);
  int jobs = 0;
  bool dry_run = false;
  app.add_option("--jobs", jobs, "Worker threads for independent runs (default: XRPROBE_JOBS or 1)")->check(CLI::PositiveNumber);
  app.add_flag("--dry-run", dry_run, "Print the plan and exit");

  json cfg;
  std::string bundle, manifest, out;
  auto common = [&](CLI::App* sub, bool need_manifest) {
    sub->add_option("--bundle", bundle, "Embedding bundle (.xremb)")->required();
    auto* m = sub->add_option("--manifest", manifest, "Dataset manifest (JSON)");
    if (need_manifest) m->required();
    sub->add_option("--out", out, "Output path")->required();
  };

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Zero-shot kNN retrieval, precision@k");
  std::string task_file, ks = "5,10,100";
  common(retrieve, true);
  retrieve->add_option("--task", task_file, "Task JSON {queries:[...], candidates:[...]}")->required();
  retrieve->add_option("--k", ks, "Comma-separated cutoffs");

  // probe train
  auto* probe = app.add_subcommand("probe", "Probe training");
  probe->require_subcommand(1);
  auto* train = probe->add_subcommand("train", "Train probes over fractions and seeds");
  std::string kind = "mlp", fractions = "1.0", probe_cfg, schedule_cfg;
  int n_seeds = 5;
  double lambda = 1.0;
  bool aggregate = false;
  common(train, true);
  train->add_option("--kind", kind, "mlp | conv | seg | multitask")->check(CLI::IsMember({"mlp", "conv", "seg", "multitask"}));
  train->add_option("--fraction", fractions, "Training fraction(s), comma-separated");
  train->add_option("--seeds", n_seeds, "Number of seeds (0..n-1)")->check(CLI::NonNegativeNumber);
  train->add_option("--lambda", lambda, "Multitask segmentation loss weight");
  train->add_option("--probe-cfg", probe_cfg, "JSON file with extra probe settings");
  train->add_option("--schedule", schedule_cfg, "JSON file with schedule overrides");
  train->add_flag("--aggregate-groups", aggregate, "Mean-aggregate test scores per group_id");

  // segment
  auto* segment = app.add_subcommand("segment", "Linear segmentation decoder over patch embeddings");
  common(segment, true);
  segment->add_option("--fraction", fractions, "Training fraction(s), comma-separated");
  segment->add_option("--seeds", n_seeds, "Number of seeds (0..n-1)")->check(CLI::NonNegativeNumber);
  segment->add_option("--schedule", schedule_cfg, "JSON file with schedule overrides");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Score prediction files");
  metrics->require_subcommand(1);
  std::string pred, ref, metrics_out;
  auto metric_mode = [&](const char* name, const char* help, const char* ref_flag) {
    auto* s = metrics->add_subcommand(name, help);
    s->add_option("--pred", pred, "Predictions (JSONL)")->required();
    s->add_option(ref_flag, ref, "References (JSONL)")->required();
    s->add_option("--out", metrics_out, "Report path (default: stdout)");
    return s;
  };
  auto* m_nlg = metric_mode("nlg", "BLEU-1..4, ROUGE-L, CIDEr", "--ref,--truth");
  auto* m_det = metric_mode("det", "mAP@50 and mIoU", "--truth,--ref");
  auto* m_grd = metric_mode("grounding", "Accuracy at IoU>0.5 and mIoU", "--truth,--ref");

  // fairness
  auto* fair = app.add_subcommand("fairness", "Subgroup train/eval matrix with bootstrap and Mann-Whitney tests");
  std::string axis;
  int n_boot = 200;
  double alpha = 0.05;
  std::uint64_t fair_seed = 0;
  common(fair, true);
  fair->add_option("--axis", axis, "sex | age")->required()->check(CLI::IsMember({"sex", "age"}));
  fair->add_option("--probe-cfg", probe_cfg, "JSON probe config (may carry a 'schedule' object)");
  fair->add_option("--bootstrap", n_boot, "Bootstrap resamples")->check(CLI::PositiveNumber);
  fair->add_option("--alpha", alpha, "Significance level");
  fair->add_option("--seed", fair_seed, "Training and bootstrap seed");

  // report-prep
  auto* prep = app.add_subcommand("report-prep", "Clinical report preprocessing");
  std::string prep_in, audit;
  prep->add_option("--in", prep_in, "Raw reports JSONL {id, text}")->required();
  prep->add_option("--out", out, "Short reports JSONL")->required();
  prep->add_option("--audit", audit, "Audit JSONL (default: <out>.audit.jsonl)");

  // pca
  auto* pca = app.add_subcommand("pca", "PCA maps of patch embeddings");
  std::string ids;
  int k = 3;
  bool per_image = false;
  pca->add_option("--bundle", bundle, "Embedding bundle with patches")->required();
  pca->add_option("--ids", ids, "Comma-separated image ids")->required();
  pca->add_option("--k", k, "Components (1..3)")->check(CLI::Range(1, 3));
  pca->add_option("--out", out, "Output directory")->required();
  pca->add_flag("--per-image", per_image, "Fit one PCA per image instead of one over all listed images");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a bundle (and optionally a manifest)");
  bool strict = false;
  validate->add_option("--bundle", bundle, "Embedding bundle")->required();
  validate->add_option("--manifest", manifest, "Dataset manifest");
  validate->add_flag("--strict", strict, "Exit with a data error when there are warnings");

  // run
  auto* run = app.add_subcommand("run", "Execute a JSON run config");
  std::string config_path;
  run->add_option("--config", config_path, "Run config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  return guarded([&]() -> int {
    auto seeds_list = [&] {
      json s = json::array();
      for (int i = 0; i < n_seeds; ++i) s.push_back(i);
      return s;
    };
    auto fraction_list = [&] {
      json f = json::array();
      for (const auto& t : split_csv(fractions)) {
        try {
          f.push_back(std::stod(t));
        } catch (const std::exception&) {
          throw ConfigError("bad fraction '" + t + "'");
        }
      }
      return f;
    };

    if (*retrieve) {
      json k_list = json::array();
      for (const auto& t : split_csv(ks)) {
        try {
          k_list.push_back(std::stoi(t));
        } catch (const std::exception&) {
          throw ConfigError("bad k '" + t + "'");
        }
      }
      cfg = {{"task", "retrieve"}, {"bundle", bundle}, {"manifest", manifest}, {"out", out},
             {"retrieval", {{"task", task_file}, {"k", k_list}}}};
    } else if (*train || *segment) {
      const bool seg = *segment || kind == "seg";
      json p = probe_cfg.empty() ? json::object() : read_json_file(probe_cfg);
      if (!seg) {
        p["kind"] = kind;
        if (kind == "multitask") p["lambda"] = lambda;
      }
      cfg = {{"task", seg ? "segment" : "probe"}, {"bundle", bundle}, {"manifest", manifest}, {"out", out},
             {"seeds", seeds_list()}, {"fractions", fraction_list()}, {"probe", p}};
      if (!schedule_cfg.empty()) cfg["schedule"] = read_json_file(schedule_cfg);
      if (aggregate) cfg["aggregate_groups"] = true;
    } else if (*metrics) {
      const std::string mode = *m_nlg ? "nlg" : *m_det ? "det" : "grounding";
      (void)m_grd;
      const bool to_stdout = metrics_out.empty();
      const std::string target = to_stdout ? (std::filesystem::temp_directory_path() / "xrprobe-metrics.json").string() : metrics_out;
      cfg = {{"task", "metrics"}, {"out", target}, {"metrics", {{"mode", mode}, {"pred", pred}, {"ref", ref}}}};
      if (to_stdout) {
        cfg["schema_version"] = cli::kSchemaVersion;
        const auto res = cli::run(cli::RunConfig{cfg, std::nullopt, dry_run}, std::cerr);
        if (!dry_run) {
          std::cout << res.report.dump(2) << "\n";
          std::filesystem::remove(target);
          std::filesystem::remove(target + ".run.json");
        }
        return 0;
      }
    } else if (*fair) {
      json f = {{"axis", axis}, {"n_bootstrap", n_boot}, {"alpha", alpha}, {"seed", fair_seed}};
      if (!probe_cfg.empty()) f["probe"] = read_json_file(probe_cfg);
      cfg = {{"task", "fairness"}, {"bundle", bundle}, {"manifest", manifest}, {"out", out}, {"fairness", f}};
    } else if (*prep) {
      json r = {{"in", prep_in}};
      if (!audit.empty()) r["audit"] = audit;
      cfg = {{"task", "report-prep"}, {"out", out}, {"report_prep", r}};
    } else if (*pca) {
      cfg = {{"task", "pca"}, {"bundle", bundle}, {"out", out},
             {"pca", {{"ids", split_csv(ids)}, {"k", k}, {"per_image", per_image}}}};
    } else if (*validate) {
      const auto v = validate_inputs(bundle, manifest);
      for (const auto& w : v.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << bundle << ": " << v.records << " record(s), " << v.warnings.size() << " warning(s)\n";
      return strict && !v.warnings.empty() ? static_cast<int>(ExitCode::Data) : 0;
    } else if (*run) {
      auto rc = cli::load_run_config(config_path);
      rc.force_dry_run = dry_run;
      if (jobs > 0) rc.jobs_override = jobs;
      const auto res = cli::run(rc, std::cerr);
      const bool planned = rc.dry_run();
      for (const auto& p : planned ? res.plan : res.artifacts) std::cout << (planned ? "" : "wrote ") << p << "\n";
      return 0;
    }
    return execute(cfg, jobs, dry_run);
  });
}
