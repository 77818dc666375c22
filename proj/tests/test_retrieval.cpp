#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xrprobe/retrieval.hpp"
#include "xrprobe/rng.hpp"

using namespace xrprobe;

namespace {

struct Pool {
  std::vector<std::vector<float>> store;
  std::vector<RetrievalItem> items;

  void add(std::string id, std::vector<float> v, std::string label) {
    store.push_back(std::move(v));
    ids.push_back(std::move(id));
    labels.push_back(std::move(label));
  }
  // Spans are bound after all vectors are stored so they stay valid.
  std::vector<RetrievalItem>& finish() {
    items.clear();
    for (std::size_t i = 0; i < store.size(); ++i) items.push_back({ids[i], store[i], labels[i]});
    return items;
  }
  std::vector<std::string> ids, labels;
};

}  // namespace

TEST(CosineRank, HandComputedExample) {
  Pool q, c;
  q.add("q", {1, 0}, "a");
  c.add("c1", {0.9f, 0.1f}, "a");
  c.add("c2", {0, 1}, "b");
  c.add("c3", {0.8f, 0.2f}, "b");
  const auto r = cosine_rank(q.finish()[0], c.finish());
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].index, 0u);
  EXPECT_EQ(r[1].index, 2u);
  EXPECT_EQ(r[2].index, 1u);
  EXPECT_NEAR(r[0].score, 0.9 / std::sqrt(0.82), 1e-7);
  EXPECT_NEAR(r[1].score, 0.8 / std::sqrt(0.68), 1e-7);
  EXPECT_EQ(r[2].score, 0.0);

  RetrievalTask t{q.items, c.items, {2}};
  EXPECT_DOUBLE_EQ(precision_at_k(t, 2), 0.5);
}

TEST(CosineRank, IdentityAndOrthogonalTies) {
  Pool q, c;
  q.add("q", {1, 2, 3}, "a");
  c.add("z", {0, 3, -2}, "a");
  c.add("b", {1, 2, 3}, "a");
  c.add("a", {-3, 0, 1}, "a");
  const auto r = cosine_rank(q.finish()[0], c.finish());
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_NEAR(r[0].score, 1.0, 1e-15);
  Pool q2, c2;
  q2.add("q", {1, 0, 0}, "x");
  c2.add("c", {0, 1, 0}, "x");
  c2.add("a", {0, 0, 1}, "x");
  c2.add("b", {0, -1, 0}, "x");
  const auto r2 = cosine_rank(q2.finish()[0], c2.finish());
  EXPECT_EQ(r2[0].index, 1u);  // "a"
  EXPECT_EQ(r2[1].index, 2u);  // "b"
  EXPECT_EQ(r2[2].index, 0u);  // "c"
}

TEST(CosineRank, ZeroNormNamesTheId) {
  Pool q, c;
  q.add("q", {1, 0}, "a");
  c.add("dead", {0, 0}, "a");
  try {
    cosine_rank(q.finish()[0], c.finish());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dead"), std::string::npos);
  }
}

TEST(PrecisionAtK, SaturationAndRangeErrors) {
  Pool q, c;
  q.add("q", {1, 1}, "a");
  for (int i = 0; i < 5; ++i) c.add("c" + std::to_string(i), {float(i + 1), 1}, "a");
  RetrievalTask t{q.finish(), c.finish(), {}};
  for (int k = 1; k <= 5; ++k) EXPECT_EQ(precision_at_k(t, k), 1.0);
  EXPECT_THROW(precision_at_k(t, 6), std::invalid_argument);
  EXPECT_THROW(precision_at_k(t, 0), std::invalid_argument);
}

TEST(PrecisionAtK, MatchesExhaustiveRankingAndScaleInvariance) {
  CounterRng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.below(6), nq = 1 + rng.below(5), nc = 2 + rng.below(49);
    Pool q, c, cs;
    std::vector<std::vector<double>> oq, oc;
    std::vector<std::string> qlab, cid, clab;
    auto vec = [&] {
      std::vector<float> v(d);
      // small integer coordinates so that exact cosine ties occur
      for (auto& x : v) x = static_cast<float>(static_cast<int>(rng.below(5)) - 2);
      if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0; })) v[0] = 1;
      return v;
    };
    for (std::size_t i = 0; i < nq; ++i) {
      auto v = vec();
      const std::string lab(1, static_cast<char>('a' + rng.below(3)));
      oq.emplace_back(v.begin(), v.end());
      qlab.push_back(lab);
      q.add("q" + std::to_string(i), v, lab);
    }
    for (std::size_t i = 0; i < nc; ++i) {
      auto v = vec();
      const std::string lab(1, static_cast<char>('a' + rng.below(3)));
      char id[16];
      std::snprintf(id, sizeof id, "c%03zu", (i * 37) % 101);  // storage order differs from id order
      oc.emplace_back(v.begin(), v.end());
      cid.push_back(id);
      clab.push_back(lab);
      c.add(id, v, lab);
      const float scale = static_cast<float>(std::ldexp(1.0, static_cast<int>(rng.below(7)) - 3));
      for (auto& x : v) x *= scale;  // power-of-two scaling keeps float rounding exact
      cs.add(id, v, lab);
    }
    RetrievalTask t{q.finish(), c.finish(), {}}, ts{q.items, cs.finish(), {}};
    for (int k : {1, 2, 5, 10, 50}) {
      if (static_cast<std::size_t>(k) > nc) continue;
      const double got = precision_at_k(t, k);
      EXPECT_NEAR(got, oracle::precision_at_k(oq, qlab, oc, cid, clab, k), 1e-12);
      EXPECT_EQ(precision_at_k(ts, k), got);
    }
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const auto a = cosine_rank(t.queries[qi], t.candidates), b = cosine_rank(ts.queries[qi], ts.candidates);
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].index, b[i].index);
    }
  }
}

TEST(PrecisionAtK, RandomEmbeddingsOnEightByTwoHundredNullModel) {
  CounterRng rng(1234);
  Pool q, c;
  for (int cls = 0; cls < 8; ++cls) {
    for (int i = 0; i < 10; ++i) {
      std::vector<float> v(32);
      for (auto& x : v) x = static_cast<float>(rng.normal());
      q.add("q" + std::to_string(cls) + "_" + std::to_string(i), v, std::to_string(cls));
    }
    for (int i = 0; i < 200; ++i) {
      std::vector<float> v(32);
      for (auto& x : v) x = static_cast<float>(rng.normal());
      char id[24];
      std::snprintf(id, sizeof id, "c%d_%03d", cls, i);
      c.add(id, v, std::to_string(cls));
    }
  }
  RetrievalTask t{q.finish(), c.finish(), {}};
  for (int k : {5, 10, 100}) {
    const double p = precision_at_k(t, k);
    const double sigma = std::sqrt(0.125 * 0.875 / (80.0 * k));
    EXPECT_NEAR(p, 0.125, 3 * sigma) << "k=" << k;
  }
}
