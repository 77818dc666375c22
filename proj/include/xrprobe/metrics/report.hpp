#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace xrprobe::metrics {

/// Named scalar with per-seed values; `mean` is their arithmetic mean.
struct MetricReport {
  std::string name;
  std::vector<double> per_seed;
  double mean = 0;
  std::optional<std::vector<double>> bootstrap;
  std::size_t n = 0;  // evaluation set size

  static MetricReport from_values(std::string name, std::vector<double> values, std::size_t n) {
    MetricReport r{std::move(name), std::move(values), 0.0, std::nullopt, n};
    double s = 0;
    for (double v : r.per_seed) s += v;
    r.mean = r.per_seed.empty() ? 0.0 : s / static_cast<double>(r.per_seed.size());
    return r;
  }
};

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"metric", r.name}, {"per_seed", r.per_seed}, {"mean", r.mean}, {"n", r.n}};
  if (r.bootstrap) j["bootstrap"] = *r.bootstrap;
}

inline void from_json(const nlohmann::json& j, MetricReport& r) {
  r.name = j.at("metric").get<std::string>();
  r.per_seed = j.at("per_seed").get<std::vector<double>>();
  r.mean = j.at("mean").get<double>();
  r.n = j.value("n", std::size_t{0});
  if (j.contains("bootstrap")) r.bootstrap = j.at("bootstrap").get<std::vector<double>>();
}

}  // namespace xrprobe::metrics
