#pragma once

// Text-generation metrics over externally produced reports.
//
// Tokenization (shared by all metrics): ASCII letters are lowercased, every
// ASCII punctuation byte becomes a space, and the result is split on ASCII
// whitespace. Bytes >= 0x80 are kept verbatim.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xrprobe/error.hpp"

namespace xrprobe::metrics {

using Tokens = std::vector<std::string>;

inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 0x80 && (std::isspace(u) || std::ispunct(u))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

using NgramCounts = std::map<Tokens, int>;

inline NgramCounts ngram_counts(const Tokens& t, std::size_t n) {
  NgramCounts c;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++c[Tokens(t.begin() + i, t.begin() + i + n)];
  return c;
}

/// Corpus BLEU-n: clipped n-gram precisions pooled over the corpus, uniform
/// weights over orders 1..n, brevity penalty exp(1 - r/c) when c < r. The
/// effective reference length per candidate is the closest reference length
/// (shorter wins ties). No smoothing.
inline double bleu(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references, int n) {
  if (n < 1 || n > 4) throw std::invalid_argument("bleu: n must be in 1..4");
  if (candidates.size() != references.size()) throw std::invalid_argument("bleu: candidate/reference count mismatch");
  std::vector<double> matched(n, 0), total(n, 0);
  double c_len = 0, r_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    const auto& refs = references[i];
    if (refs.empty()) throw std::invalid_argument("bleu: candidate without reference");
    c_len += static_cast<double>(cand.size());
    std::size_t best = refs[0].size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    r_len += static_cast<double>(best);
    for (int k = 1; k <= n; ++k) {
      const auto cc = ngram_counts(cand, k);
      std::map<Tokens, int> max_ref;
      for (const auto& r : refs)
        for (const auto& [g, cnt] : ngram_counts(r, k)) max_ref[g] = std::max(max_ref[g], cnt);
      for (const auto& [g, cnt] : cc) {
        auto it = max_ref.find(g);
        matched[k - 1] += std::min(cnt, it == max_ref.end() ? 0 : it->second);
        total[k - 1] += cnt;
      }
    }
  }
  if (c_len == 0) return 0.0;
  double log_sum = 0;
  for (int k = 0; k < n; ++k) {
    if (matched[k] == 0 || total[k] == 0) return 0.0;
    log_sum += std::log(matched[k] / total[k]);
  }
  const double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  return bp * std::exp(log_sum / n);
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// ROUGE-L F-measure with beta = 1.2. With several references, precision and
/// recall are each maximized over the references before combining.
inline double rouge_l(const Tokens& candidate, std::span<const Tokens> references, double beta = 1.2) {
  if (candidate.empty()) return 0.0;
  double p = 0, r = 0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(candidate, ref));
    p = std::max(p, lcs / static_cast<double>(candidate.size()));
    r = std::max(r, lcs / static_cast<double>(ref.size()));
  }
  if (p == 0 || r == 0) return 0.0;
  const double b2 = beta * beta;
  return (1 + b2) * p * r / (r + b2 * p);
}

inline double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.2) {
  return rouge_l(candidate, std::span<const Tokens>(&reference, 1), beta);
}

/// Mean per-pair ROUGE-L over a corpus.
inline double rouge_l_corpus(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  if (candidates.size() != references.size() || candidates.empty())
    throw std::invalid_argument("rouge_l: candidate/reference count mismatch or empty corpus");
  double sum = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) sum += rouge_l(candidates[i], references[i]);
  return sum / static_cast<double>(candidates.size());
}

/// Plain CIDEr (no length penalty, no count clipping) scaled by 10.
/// Each candidate's reference set is one document; idf(g) = log(N) - log(max(1, df(g)))
/// with df counted over the N reference documents. Per order n = 1..4 the
/// score is the cosine between tf-idf vectors averaged over references, then
/// averaged over n. A zero vector has cosine 0 with anything.
/// Returns per-candidate scores; the corpus value is their mean.
inline std::vector<double> cider_scores(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  constexpr int kMaxN = 4;
  if (candidates.size() != references.size() || candidates.empty())
    throw std::invalid_argument("cider: candidate/reference count mismatch or empty corpus");
  const double n_docs = static_cast<double>(references.size());

  std::map<Tokens, double> df;
  for (const auto& refs : references) {
    std::set<Tokens> seen;
    for (const auto& r : refs)
      for (int k = 1; k <= kMaxN; ++k)
        for (const auto& [g, cnt] : ngram_counts(r, k)) seen.insert(g);
    for (const auto& g : seen) df[g] += 1;
  }
  const auto idf = [&](const Tokens& g) {
    auto it = df.find(g);
    return std::log(n_docs) - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
  };
  const auto tfidf = [&](const Tokens& t, int k) {
    std::map<Tokens, double> v;
    for (const auto& [g, cnt] : ngram_counts(t, k)) v[g] = cnt * idf(g);
    return v;
  };
  const auto cosine = [](const std::map<Tokens, double>& a, const std::map<Tokens, double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (const auto& [g, x] : a) {
      na += x * x;
      auto it = b.find(g);
      if (it != b.end()) dot += x * it->second;
    }
    for (const auto& [g, y] : b) nb += y * y;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  std::vector<double> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& refs = references[i];
    if (refs.empty()) throw std::invalid_argument("cider: candidate without reference");
    double total = 0;
    for (int k = 1; k <= kMaxN; ++k) {
      const auto vc = tfidf(candidates[i], k);
      double s = 0;
      for (const auto& r : refs) s += cosine(vc, tfidf(r, k));
      total += s / static_cast<double>(refs.size());
    }
    out.push_back(10.0 * total / kMaxN);
  }
  return out;
}

inline double cider(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  const auto s = cider_scores(candidates, references);
  double sum = 0;
  for (double v : s) sum += v;
  return sum / static_cast<double>(s.size());
}

}  // namespace xrprobe::metrics
