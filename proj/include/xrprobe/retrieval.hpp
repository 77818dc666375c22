#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xrprobe/bundle.hpp"
#include "xrprobe/error.hpp"
#include "xrprobe/manifest.hpp"

namespace xrprobe {

struct RetrievalItem {
  std::string id;
  std::span<const float> embedding;
  std::string label;  // opaque equality class
};

struct RetrievalTask {
  std::vector<RetrievalItem> queries;
  std::vector<RetrievalItem> candidates;
  std::vector<int> k_values;
};

struct RankedCandidate {
  std::size_t index;
  double score;
};

inline double l2_norm(std::span<const float> v) {
  double s = 0;
  for (float x : v) s += double{x} * x;
  return std::sqrt(s);
}

/// Candidates sorted by descending cosine similarity to the query. Exactly
/// equal scores are ordered by ascending candidate id.
inline std::vector<RankedCandidate> cosine_rank(const RetrievalItem& query, std::span<const RetrievalItem> candidates) {
  const double qn = l2_norm(query.embedding);
  if (!(qn > 0)) throw DataError("degenerate embedding: zero norm for '" + query.id + "'");
  std::vector<RankedCandidate> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.embedding.size() != query.embedding.size())
      throw DataError("dimension mismatch between '" + query.id + "' and '" + c.id + "'");
    const double cn = l2_norm(c.embedding);
    if (!(cn > 0)) throw DataError("degenerate embedding: zero norm for '" + c.id + "'");
    double dot = 0;
    for (std::size_t j = 0; j < c.embedding.size(); ++j) dot += double{query.embedding[j]} * c.embedding[j];
    out.push_back({i, dot / (qn * cn)});
  }
  std::sort(out.begin(), out.end(), [&](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return candidates[a.index].id < candidates[b.index].id;
  });
  return out;
}

/// Mean over queries of (relevant among top-k) / k, one value per k.
inline std::vector<double> precision_at_ks(const RetrievalTask& task, std::span<const int> ks) {
  for (int k : ks)
    if (k < 1 || static_cast<std::size_t>(k) > task.candidates.size())
      throw std::invalid_argument("k=" + std::to_string(k) + " outside [1, " + std::to_string(task.candidates.size()) + "]");
  if (task.queries.empty()) throw DataError("retrieval task has no queries");
  std::vector<double> sums(ks.size(), 0.0);
  for (const auto& q : task.queries) {
    const auto ranked = cosine_rank(q, task.candidates);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      int hits = 0;
      for (int r = 0; r < ks[i]; ++r) hits += task.candidates[ranked[r].index].label == q.label;
      sums[i] += static_cast<double>(hits) / ks[i];
    }
  }
  for (auto& s : sums) s /= static_cast<double>(task.queries.size());
  return sums;
}

inline double precision_at_k(const RetrievalTask& task, int k) {
  const int ks[] = {k};
  return precision_at_ks(task, ks)[0];
}

/// Resolves ids against a bundle and manifest; query and candidate sets must be disjoint.
inline RetrievalTask make_retrieval_task(const EmbeddingBundle& bundle, const DatasetManifest& manifest,
                                         const std::vector<std::string>& query_ids,
                                         const std::vector<std::string>& candidate_ids, std::vector<int> ks) {
  std::unordered_map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : manifest.entries) by_id.emplace(e.image_id, &e);
  const std::set<std::string> qset(query_ids.begin(), query_ids.end());
  auto resolve = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("retrieval id '" + id + "' not in manifest");
    return RetrievalItem{id, bundle.at(id).cls, stratum_of(it->second->label)};
  };
  RetrievalTask t;
  t.k_values = std::move(ks);
  for (const auto& id : query_ids) t.queries.push_back(resolve(id));
  for (const auto& id : candidate_ids) {
    if (qset.contains(id)) throw DataError("id '" + id + "' is both a query and a candidate");
    t.candidates.push_back(resolve(id));
  }
  return t;
}

}  // namespace xrprobe
