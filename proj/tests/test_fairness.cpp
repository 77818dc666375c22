#include <cmath>
#include <map>
#include <tuple>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xrprobe/fairness.hpp"
#include "xrprobe/manifest.hpp"

using namespace xrprobe;
using namespace xrprobe::fairness;

namespace {

nlohmann::json demographic_manifest(bool with_demographics) {
  nlohmann::json entries = nlohmann::json::array();
  const char* splits[] = {"train", "val", "test"};
  const double ages[] = {20, 34.9, 35, 59.9, 60, 88};
  int k = 0;
  for (const char* split : splits)
    for (const char* sex : {"M", "F"})
      for (double age : ages) {
        char id[16];
        std::snprintf(id, sizeof id, "d%03d", k);
        nlohmann::json e = {{"image_id", id}, {"split", split}, {"label", k % 2}};
        if (with_demographics) {
          e["sex"] = sex;
          e["age_years"] = age;
        }
        entries.push_back(e);
        ++k;
      }
  return {{"version", 1}, {"label_kind", "binary"}, {"num_classes", 2}, {"entries", entries}};
}

}  // namespace

TEST(MannWhitney, WorkedExample) {
  const auto r = mann_whitney({1, 2}, {3, 4});
  EXPECT_EQ(r.u, 0.0);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p, 2.0 / 6.0);
}

TEST(MannWhitney, IdenticalSamplesWithTies) {
  const std::vector<double> a{0.1, 0.2, 0.2, 0.3, 0.4, 0.4, 0.5, 0.6, 0.7, 0.7};
  const auto r = mann_whitney(a, a);
  EXPECT_FALSE(r.exact);
  EXPECT_NEAR(r.p, 1.0, 1e-12);
}

TEST(MannWhitney, ShiftedLargeSamples) {
  CounterRng rng(5);
  std::vector<double> b(200), a(200);
  for (std::size_t i = 0; i < 200; ++i) {
    b[i] = rng.normal();
    a[i] = b[i] + 100;
  }
  const auto r = mann_whitney(a, b);
  EXPECT_LT(r.p, 1e-10);
  EXPECT_EQ(r.u, 200.0 * 200.0);
}

TEST(MannWhitney, ExactPathEqualsEnumerationForAllSmallInstances) {
  std::map<std::tuple<std::size_t, std::size_t, double>, double> oracle_p;
  std::size_t instances = 0;
  for (std::size_t N = 2; N <= 10; ++N)
    for (std::uint32_t mask = 1; mask + 1 < (1u << N); ++mask) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < N; ++i) ((mask >> i) & 1u ? a : b).push_back(static_cast<double>(i));
      const auto r = mann_whitney(a, b);
      ASSERT_TRUE(r.exact);
      double u = 0;
      for (double x : a)
        for (double y : b) u += x > y;
      const auto key = std::make_tuple(a.size(), b.size(), u);
      if (!oracle_p.count(key)) oracle_p[key] = oracle::mann_whitney_enumerate(a, b);
      EXPECT_EQ(r.u, u);
      EXPECT_EQ(r.p, oracle_p[key]) << "n=" << a.size() << " m=" << b.size() << " U=" << u;
      ++instances;
    }
  EXPECT_EQ(instances, 2026u);  // sum over N of 2^N - 2
}

TEST(MannWhitney, USymmetryAndPSymmetry) {
  CounterRng rng(17);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(1 + rng.below(30)), b(1 + rng.below(30));
    for (auto& v : a) v = rng.uniform();  // continuous draws: no ties
    for (auto& v : b) v = rng.uniform() + 0.1 * rng.normal();
    const auto ab = mann_whitney(a, b), ba = mann_whitney(b, a);
    EXPECT_EQ(ab.u + ba.u, static_cast<double>(a.size() * b.size()));
    EXPECT_NEAR(ab.p, ba.p, 1e-12);
  }
}

TEST(MannWhitney, RejectsEmptySamples) { EXPECT_THROW(mann_whitney({}, {1.0}), std::invalid_argument); }

TEST(Bootstrap, SeparatedScoresAlwaysOne) {
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    s.push_back(i);
    y.push_back(i >= 20);
  }
  const auto r = bootstrap_auc(s, y, 200, 1);
  ASSERT_EQ(r.values.size(), 200u);
  for (double v : r.values) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(r.median, 1.0);
}

TEST(Bootstrap, SeedDeterministicBitwise) {
  CounterRng rng(3);
  std::vector<double> s(100);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    y[i] = static_cast<int>(i % 2);
    s[i] = rng.normal() + 0.5 * y[i];
  }
  const auto a = bootstrap_auc(s, y, 200, 42), b = bootstrap_auc(s, y, 200, 42), c = bootstrap_auc(s, y, 200, 43);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  for (double v : a.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_GE(a.median, *std::min_element(a.values.begin(), a.values.end()));
  EXPECT_LE(a.median, *std::max_element(a.values.begin(), a.values.end()));
  EXPECT_LE(a.lo, a.median);
  EXPECT_GE(a.hi, a.median);
}

TEST(Bootstrap, SpreadMatchesAnalyticStandardError) {
  CounterRng rng(8);
  std::vector<double> s(100);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    y[i] = static_cast<int>(i % 2);
    s[i] = rng.uniform();
  }
  const auto r = bootstrap_auc(s, y, 200, 0);
  double mean = 0, var = 0;
  for (double v : r.values) mean += v / 200;
  for (double v : r.values) var += (v - mean) * (v - mean) / 199;
  // Hanley-McNeil approximation.
  const double A = metrics::auroc<double, int>(s, y), np = 50, nn = 50;
  const double q1 = A / (2 - A), q2 = 2 * A * A / (1 + A);
  const double se = std::sqrt((A * (1 - A) + (np - 1) * (q1 - A * A) + (nn - 1) * (q2 - A * A)) / (np * nn));
  const double ratio = std::sqrt(var) / se;
  EXPECT_GT(ratio, 1.0 / 3);
  EXPECT_LT(ratio, 3.0);
}

TEST(Bootstrap, PersistentSingleClassResamplesFail) {
  int calls = 0;
  auto undefined = [&](std::span<const std::size_t>) -> double {
    ++calls;
    throw UndefinedMetric("single class");
  };
  EXPECT_THROW(bootstrap(10, undefined, 200, 0), DataError);
  EXPECT_EQ(calls, 100);
  EXPECT_THROW(bootstrap_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), UndefinedMetric);
}

TEST(Subgroups, SexAxisHasSixCells) {
  const auto m = parse_manifest(demographic_manifest(true));
  const auto sm = subgroup_matrix(m, Axis::Sex);
  EXPECT_TRUE(sm.skipped.empty());
  ASSERT_EQ(sm.cells.size(), 6u);
  for (const auto& c : sm.cells) {
    EXPECT_EQ(c.test.size(), 6u);
    EXPECT_EQ(c.train.size(), c.train_group == "all" ? 12u : 6u);
    for (auto i : c.test) EXPECT_EQ(*group_of(m.entries[i], Axis::Sex), c.eval_group);
  }
}

TEST(Subgroups, AgeAxisHasNineCellsAndBinsPartition) {
  const auto m = parse_manifest(demographic_manifest(true));
  const auto sm = subgroup_matrix(m, Axis::Age);
  ASSERT_EQ(sm.cells.size(), 9u);
  for (const auto& c : sm.cells) EXPECT_EQ(c.test.size(), 4u);
  EXPECT_EQ(age_group(0), "young");
  EXPECT_EQ(age_group(34.999), "young");
  EXPECT_EQ(age_group(35), "middle");
  EXPECT_EQ(age_group(59.999), "middle");
  EXPECT_EQ(age_group(60), "elderly");
}

TEST(Subgroups, MissingDemographicsSkips) {
  const auto sm = subgroup_matrix(parse_manifest(demographic_manifest(false)), Axis::Sex);
  EXPECT_TRUE(sm.cells.empty());
  ASSERT_EQ(sm.skipped.size(), 1u);
  EXPECT_NE(sm.skipped[0].find("sex"), std::string::npos);
}

TEST(Subgroups, EmptyGroupIsSkippedWithReason) {
  auto j = demographic_manifest(true);
  for (auto& e : j["entries"])
    if (e["split"] == "test" && e["age_years"].get<double>() >= 60) e["age_years"] = 40;
  const auto sm = subgroup_matrix(parse_manifest(j), Axis::Age);
  EXPECT_EQ(sm.cells.size(), 6u);
  ASSERT_EQ(sm.skipped.size(), 3u);
  EXPECT_NE(sm.skipped[0].find("elderly"), std::string::npos);
}

TEST(FairnessReport, FlagsAndTabulation) {
  auto cell = [](std::string tg, std::string eg, double centre, double spread, std::uint64_t seed) {
    CounterRng rng(seed);
    CellResult c{std::move(tg), std::move(eg), {}, 10};
    for (int i = 0; i < 200; ++i) c.bootstrap.values.push_back(centre + spread * rng.uniform());
    return c;
  };
  std::vector<CellResult> cells;
  std::uint64_t seed = 0;
  const double centres[3][3] = {{0.8, 0.8, 0.9}, {0.7, 0.7, 0.7}, {0.6, 0.9, 0.6}};
  const auto groups = train_groups(Axis::Age);
  for (std::size_t e = 0; e < 3; ++e)
    for (std::size_t t = 0; t < 3; ++t) cells.push_back(cell(groups[t], groups[e], centres[e][t], 0.05, ++seed));
  const auto rep = fairness_report(Axis::Age, cells, {}, 0.05);
  ASSERT_EQ(rep.pairs.size(), 9u);
  std::size_t non_sig = 0;
  for (const auto& p : rep.pairs) {
    const CellResult *a = nullptr, *b = nullptr;
    for (const auto& c : cells) {
      if (c.eval_group != p.eval_group) continue;
      if (c.train_group == p.train_a) a = &c;
      if (c.train_group == p.train_b) b = &c;
    }
    const auto mw = mann_whitney(a->bootstrap.values, b->bootstrap.values);
    EXPECT_EQ(p.test.p, mw.p);
    EXPECT_EQ(p.significant, mw.p < 0.05);
    non_sig += !(mw.p < 0.05);
  }
  EXPECT_EQ(rep.non_significant(), non_sig);
  // Disjoint centres are flagged; same-centre draws are not expected to be.
  EXPECT_TRUE(rep.pairs[1].significant);  // young eval: young vs elderly
  EXPECT_TRUE(rep.pairs[3].significant || rep.pairs[4].significant || rep.pairs[5].significant || non_sig > 0);

  std::vector<CellResult> flat;
  for (const auto& g : train_groups(Axis::Sex))
    for (const auto& e : eval_groups(Axis::Sex)) {
      CellResult c{g, e, {std::vector<double>(200, 0.75), 0.75, 0.75, 0.75}, 10};
      flat.push_back(c);
    }
  const auto none = fairness_report(Axis::Sex, flat, {});
  EXPECT_EQ(none.pairs.size(), 6u);
  EXPECT_EQ(none.non_significant(), 6u);
  const auto j = to_json(none);
  EXPECT_EQ(j["non_significant_pairs"], 6);
  EXPECT_EQ(j["cells"].size(), 6u);
}
