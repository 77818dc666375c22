#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace xrprobe::cli {

struct TableRow {
  std::string model;
  std::map<std::string, double> scores;  // metric -> value (higher is better)
};

enum class Mark { None, Best, Second };

struct RenderedTable {
  std::string text;
  nlohmann::ordered_json json;
};

/// Per metric column: every row holding the maximum is Best; if exactly one
/// row is Best, every row holding the runner-up value is Second. Tied bests
/// suppress the Second marker. Text output wraps Best in **..** and Second
/// in *..*.
inline RenderedTable render_table(const std::vector<TableRow>& rows, int precision = 1, double scale = 100.0) {
  std::vector<std::string> metrics;
  for (const auto& r : rows)
    for (const auto& [m, v] : r.scores)
      if (std::find(metrics.begin(), metrics.end(), m) == metrics.end()) metrics.push_back(m);

  std::vector<std::vector<Mark>> marks(rows.size(), std::vector<Mark>(metrics.size(), Mark::None));
  for (std::size_t c = 0; c < metrics.size(); ++c) {
    std::vector<double> vals;
    for (const auto& r : rows)
      if (auto it = r.scores.find(metrics[c]); it != r.scores.end()) vals.push_back(it->second);
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end(), std::greater<>());
    const double best = vals.front();
    const auto n_best = std::count(vals.begin(), vals.end(), best);
    std::optional<double> second;
    if (n_best == 1 && vals.size() > 1) second = vals[1];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto it = rows[r].scores.find(metrics[c]);
      if (it == rows[r].scores.end()) continue;
      if (it->second == best) marks[r][c] = Mark::Best;
      else if (second && it->second == *second) marks[r][c] = Mark::Second;
    }
  }

  auto fmt = [&](double v, Mark m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v * scale);
    std::string s = buf;
    if (m == Mark::Best) return "**" + s + "**";
    if (m == Mark::Second) return "*" + s + "*";
    return s;
  };

  std::vector<std::vector<std::string>> cells;
  cells.push_back({"model"});
  for (const auto& m : metrics) cells[0].push_back(m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> line{rows[r].model};
    for (std::size_t c = 0; c < metrics.size(); ++c) {
      auto it = rows[r].scores.find(metrics[c]);
      line.push_back(it == rows[r].scores.end() ? "-" : fmt(it->second, marks[r][c]));
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(metrics.size() + 1, 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

  RenderedTable out;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) out.text += "  ";
      out.text += line[c];
      if (c + 1 < line.size()) out.text += std::string(width[c] - line[c].size(), ' ');
    }
    out.text += '\n';
  }

  out.json = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    nlohmann::ordered_json row;
    row["model"] = rows[r].model;
    for (std::size_t c = 0; c < metrics.size(); ++c) {
      auto it = rows[r].scores.find(metrics[c]);
      if (it == rows[r].scores.end()) continue;
      row[metrics[c]] = {{"value", it->second},
                         {"mark", marks[r][c] == Mark::Best ? "best" : marks[r][c] == Mark::Second ? "second" : ""}};
    }
    out.json.push_back(std::move(row));
  }
  return out;
}

}  // namespace xrprobe::cli
