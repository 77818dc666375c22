#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "xrprobe/metrics/classification.hpp"
#include "xrprobe/metrics/detection.hpp"
#include "xrprobe/metrics/nlg.hpp"
#include "xrprobe/metrics/report.hpp"
#include "xrprobe/metrics/segmentation.hpp"
#include "xrprobe/rng.hpp"

using namespace xrprobe;
using namespace xrprobe::metrics;

namespace {

double auc(const std::vector<double>& s, const std::vector<int>& y) { return auroc<double, int>(s, y); }

}  // namespace

// ---------------------------------------------------------------- AUROC

TEST(Auroc, WorkedExample) { EXPECT_EQ(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75); }

TEST(Auroc, SeparatedAndAllTied) {
  EXPECT_EQ(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc({0.5, 0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1, 1}), 0.5);
}

TEST(Auroc, SingleClassIsUndefined) {
  EXPECT_THROW(auc({0.1, 0.2}, {1, 1}), UndefinedMetric);
  EXPECT_THROW(auc({0.1, 0.2}, {0, 0}), UndefinedMetric);
}

TEST(Auroc, MatchesPairCountingWithTies) {
  CounterRng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(63);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 2 ? static_cast<double>(rng.below(5)) : rng.uniform();  // odd trials are tie-heavy
      y[i] = rng.bernoulli(0.4);
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(auc(s, y), oracle::auroc_pairs(s, y), 1e-12);
  }
}

TEST(Auroc, MonotoneTransformAndNegation) {
  CounterRng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(30), e(30), neg(30);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      s[i] = rng.uniform(-2, 2);
      e[i] = std::exp(3 * s[i]) + 1;
      neg[i] = -s[i];
      y[i] = i % 3 == 0;
    }
    EXPECT_DOUBLE_EQ(auc(s, y), auc(e, y));
    EXPECT_NEAR(auc(neg, y), 1 - auc(s, y), 1e-12);
  }
}

// ---------------------------------------------------------------- MCC

TEST(Mcc, Examples) {
  EXPECT_EQ(mcc({{5, 0, 0}, {0, 3, 0}, {0, 0, 7}}), 1.0);
  EXPECT_NEAR(mcc({{2, 1}, {1, 2}}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(mcc({{4, 0}, {6, 0}}), 0.0);  // predictor says class 0 only
  EXPECT_THROW(mcc({}), std::invalid_argument);
}

TEST(Mcc, MatchesDirectFormulas) {
  CounterRng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t c = 2 + rng.below(4);
    ConfusionMatrix cm(c, std::vector<std::uint64_t>(c));
    for (auto& row : cm)
      for (auto& v : row) v = rng.below(rng.bernoulli(0.2) ? 1 : 12);
    EXPECT_NEAR(mcc(cm), oracle::mcc_pearson(cm), 1e-12);
    if (c == 2) {
      EXPECT_NEAR(mcc(cm), oracle::mcc_binary(cm[1][1], cm[0][0], cm[0][1], cm[1][0]), 1e-12);
    }
  }
}

TEST(Mcc, InvariantUnderClassRelabeling) {
  CounterRng rng(6);
  for (int t = 0; t < 50; ++t) {
    ConfusionMatrix cm(4, std::vector<std::uint64_t>(4));
    for (auto& row : cm)
      for (auto& v : row) v = rng.below(10);
    std::vector<std::size_t> perm{0, 1, 2, 3};
    shuffle(perm, rng);
    ConfusionMatrix pm(4, std::vector<std::uint64_t>(4));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) pm[perm[i]][perm[j]] = cm[i][j];
    EXPECT_NEAR(mcc(cm), mcc(pm), 1e-12);
  }
}

// ---------------------------------------------------------------- Dice

TEST(Dsc, Examples) {
  const std::vector<int> a{1, 1, 0, 0}, b{1, 1, 1, 1, 0, 0, 0, 0}, c{0, 0, 1, 1, 1, 1, 0, 0}, z(4, 0);
  EXPECT_EQ((dsc<int, int>(a, a)), 1.0);
  EXPECT_EQ((dsc<int, int>(b, c, 0.0)), 0.5);
  EXPECT_EQ((dsc<int, int>(z, z)), 1.0);
  EXPECT_THROW((dsc<int, int>(z, z, 0.0)), UndefinedMetric);
}

TEST(Dsc, Symmetric) {
  CounterRng rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> p(40), q(40);
    for (std::size_t i = 0; i < 40; ++i) {
      p[i] = rng.bernoulli(0.3);
      q[i] = rng.bernoulli(0.5);
    }
    EXPECT_EQ((dsc<int, int>(p, q)), (dsc<int, int>(q, p)));
  }
}

TEST(Dsc, MulticlassAveragesForegroundClasses) {
  const std::vector<int> p{0, 1, 2, 2}, t{0, 1, 1, 2};
  // class 1: inter 1, |p|=1, |t|=2 -> 3/4 ; class 2: inter 1, |p|=2, |t|=1 -> 3/4 (smooth 1)
  EXPECT_DOUBLE_EQ(dsc_multiclass(p, t, 3), 0.75);
}

TEST(DicePos, Examples) {
  const std::vector<double> d{0.4, 0.8, 1.0};
  EXPECT_NEAR(dice_pos(d, std::vector<std::uint8_t>{1, 1, 0}), 0.6, 1e-15);
  EXPECT_THROW(dice_pos(d, std::vector<std::uint8_t>{0, 0, 0}), UndefinedMetric);
  EXPECT_EQ(dice_pos(std::vector<double>{1.0}, std::vector<std::uint8_t>{1}), 1.0);
}

// ---------------------------------------------------------------- boxes

namespace {
Box bx(double x0, double y0, double x1, double y1, int c = 0, std::optional<double> conf = std::nullopt) {
  return Box{x0, y0, x1, y1, c, conf};
}
}  // namespace

TEST(Iou, Examples) {
  EXPECT_EQ(iou(bx(0, 0, 10, 10), bx(0, 0, 10, 10)), 1.0);
  EXPECT_DOUBLE_EQ(iou(bx(0, 0, 10, 10), bx(5, 0, 15, 10)), 1.0 / 3.0);
  EXPECT_EQ(iou(bx(0, 0, 1, 1), bx(2, 2, 3, 3)), 0.0);
}

TEST(Map50, Examples) {
  const std::vector<ImageBoxes> truth{{bx(0, 0, 10, 10)}};
  // IoU 0.6: [0,0,10,10] vs [0,0,10,6] -> 60/100
  EXPECT_EQ(map50(std::vector<ImageBoxes>{{bx(0, 0, 10, 6, 0, 0.9)}}, truth), 1.0);
  // high-conf IoU 0.3 miss, low-conf IoU 0.7 hit -> PR points (0,0), (0.5, 1.0) -> AP 0.5
  const std::vector<ImageBoxes> two{{bx(0, 0, 10, 3, 0, 0.9), bx(0, 0, 10, 7, 0, 0.4)}};
  EXPECT_EQ(map50(two, truth), 0.5);
  // predictions equal to truths, several images and classes
  std::vector<ImageBoxes> t2{{bx(0, 0, 5, 5, 0), bx(5, 5, 9, 9, 1)}, {bx(1, 1, 4, 8, 1)}}, p2 = t2;
  for (auto& img : p2)
    for (auto& b : img) b.confidence = 1.0;
  EXPECT_EQ(map50(p2, t2), 1.0);
  // a class with predictions but no truth contributes AP 0
  p2[1].push_back(bx(0, 0, 1, 1, 2, 0.5));
  EXPECT_DOUBLE_EQ(map50(p2, t2), 2.0 / 3.0);
  EXPECT_THROW(map50(std::vector<ImageBoxes>{{bx(0, 0, 1, 1)}}, truth), DataError);
}

TEST(Map50, MatchesExhaustiveOracle) {
  CounterRng rng(12);
  auto rbox = [&](bool with_conf) {
    const double x = rng.uniform(0, 8), y = rng.uniform(0, 8);
    Box b = bx(x, y, x + rng.uniform(1, 4), y + rng.uniform(1, 4), static_cast<int>(rng.below(2)));
    if (with_conf) b.confidence = static_cast<double>(rng.below(6)) / 5.0;  // coarse grid forces ties
    return b;
  };
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n_img = 1 + rng.below(3);
    std::vector<ImageBoxes> P(n_img), T(n_img);
    std::vector<std::vector<oracle::OBox>> oP(n_img), oT(n_img);
    for (std::size_t i = 0; i < n_img; ++i) {
      for (std::size_t k = rng.below(5); k > 0; --k) T[i].push_back(rbox(false));
      for (std::size_t k = rng.below(5); k > 0; --k) {
        // half of the predictions are jittered copies of truths
        Box b = rbox(true);
        if (!T[i].empty() && rng.bernoulli(0.5)) {
          const Box& g = T[i][rng.below(T[i].size())];
          const double j = rng.uniform(-0.8, 0.8);
          b = bx(g.x_min + j, g.y_min, g.x_max + j, g.y_max, g.cls, b.confidence);
        }
        P[i].push_back(b);
      }
      for (const auto& b : P[i]) oP[i].push_back({b.x_min, b.y_min, b.x_max, b.y_max, b.cls, *b.confidence});
      for (const auto& b : T[i]) oT[i].push_back({b.x_min, b.y_min, b.x_max, b.y_max, b.cls, 0});
    }
    bool any = false;
    for (std::size_t i = 0; i < n_img; ++i) any |= !P[i].empty() || !T[i].empty();
    if (!any) continue;
    ++checked;
    ASSERT_NEAR(map50(P, T), oracle::map_at(oP, oT), 1e-12) << "case " << t;
  }
  EXPECT_GT(checked, 900);
}

TEST(DetectionMiou, BestSameClassOverlapPerTruth) {
  const std::vector<ImageBoxes> t{{bx(0, 0, 10, 10, 0), bx(20, 20, 30, 30, 1)}};
  const std::vector<ImageBoxes> p{{bx(5, 0, 15, 10, 0, 0.5), bx(0, 0, 10, 10, 1, 0.9)}};
  EXPECT_DOUBLE_EQ(detection_miou(p, t), (1.0 / 3.0 + 0.0) / 2);
}

TEST(Grounding, AccuracyIsStrict) {
  const std::vector<Box> t{bx(0, 0, 10, 10), bx(0, 0, 10, 10), bx(0, 0, 10, 10)};
  const std::vector<Box> p{bx(0, 0, 10, 10), bx(5, 0, 15, 10), bx(0, 0, 10, 5)};  // IoU 1, 1/3, 0.5
  EXPECT_DOUBLE_EQ(grounding_accuracy(p, t), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(grounding_miou(p, t), (1.0 + 1.0 / 3.0 + 0.5) / 3.0);
}

// ---------------------------------------------------------------- NLG

namespace {
std::vector<Tokens> toks(std::initializer_list<const char*> xs) {
  std::vector<Tokens> out;
  for (const char* x : xs) out.push_back(tokenize(x));
  return out;
}
std::vector<std::vector<Tokens>> single_refs(std::initializer_list<const char*> xs) {
  std::vector<std::vector<Tokens>> out;
  for (const char* x : xs) out.push_back({tokenize(x)});
  return out;
}
}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("No  pleural-effusion.\tHeart: OK!"), (Tokens{"no", "pleural", "effusion", "heart", "ok"}));
  EXPECT_TRUE(tokenize(" ... ").empty());
}

TEST(Bleu, Examples) {
  const auto same = toks({"the heart is normal"});
  EXPECT_DOUBLE_EQ(bleu(same, single_refs({"the heart is normal"}), 4), 1.0);
  EXPECT_NEAR(bleu(toks({"the cat"}), single_refs({"the cat sat"}), 1), std::exp(1.0 - 1.5), 1e-15);
  EXPECT_EQ(bleu(toks({"alpha beta"}), single_refs({"gamma delta"}), 1), 0.0);
}

TEST(RougeL, Examples) {
  EXPECT_DOUBLE_EQ(rouge_l(tokenize("a b c"), tokenize("a b c")), 1.0);
  EXPECT_EQ(rouge_l(tokenize("a b"), tokenize("c d")), 0.0);
  const double p = 2.0 / 3, r = 2.0 / 4, b2 = 1.44;
  EXPECT_DOUBLE_EQ(rouge_l(tokenize("a b c"), tokenize("a x b y")), (1 + b2) * p * r / (r + b2 * p));
}

TEST(Cider, Examples) {
  const auto c = toks({"the heart is normal", "lungs are clear today"});
  const auto s = cider_scores(c, single_refs({"the heart is normal", "lungs are clear today"}));
  EXPECT_DOUBLE_EQ(s[0], 10.0);
  EXPECT_DOUBLE_EQ(s[1], 10.0);
  // Two-token texts have no 3- or 4-grams; those orders contribute cosine(0,0) = 0.
  const auto short_s = cider_scores(toks({"heart normal", "lungs clear"}), single_refs({"heart normal", "lungs clear"}));
  EXPECT_DOUBLE_EQ(short_s[0], 5.0);
  EXPECT_EQ(cider(toks({"heart normal", "x y"}), single_refs({"heart normal", "lungs clear"})) < 10.0, true);
  EXPECT_EQ(cider_scores(toks({"x y", "lungs clear"}), single_refs({"heart normal", "lungs clear"}))[0], 0.0);
  EXPECT_EQ(cider(toks({"heart normal"}), single_refs({"heart normal"})), 0.0);  // one document: idf 0
}

TEST(NlgGolden, TenPairCorpus) {
  std::vector<Tokens> cands;
  std::vector<std::vector<Tokens>> refs;
  fixtures::nlg_tokens(cands, refs);
  const fixtures::NlgExpected want;
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(bleu(cands, refs, n), want.bleu[n - 1], 1e-9) << n;
  EXPECT_NEAR(rouge_l_corpus(cands, refs), want.rouge_l, 1e-9);
  EXPECT_NEAR(cider(cands, refs), want.cider, 1e-9);
  const auto cs = cider_scores(cands, refs);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    EXPECT_NEAR(rouge_l(cands[i], refs[i]), want.rouge_pairs[i], 1e-9) << i;
    EXPECT_NEAR(cs[i], want.cider_pairs[i], 1e-9) << i;
  }
}

TEST(NlgGolden, CorpusOrderDoesNotMatter) {
  auto c = toks({"heart is normal", "lungs are clear", "no effusion seen", "mild cardiomegaly"});
  auto r = single_refs({"the heart is normal", "lungs clear", "no effusion", "cardiomegaly is mild"});
  const double b = bleu(c, r, 2), rl = rouge_l_corpus(c, r), ci = cider(c, r);
  std::reverse(c.begin(), c.end());
  std::reverse(r.begin(), r.end());
  EXPECT_NEAR(bleu(c, r, 2), b, 1e-15);
  EXPECT_NEAR(rouge_l_corpus(c, r), rl, 1e-15);
  EXPECT_NEAR(cider(c, r), ci, 1e-12);
}

// ---------------------------------------------------------------- aggregation / report

TEST(Aggregate, MeanPerGroup) {
  const std::vector<double> s{0.2, 0.9, 0.8};
  const std::vector<int> y{0, 1, 1};
  const std::vector<std::string> g{"a", "b", "a"};
  const auto out = aggregate_per_group(s, y, g);
  ASSERT_EQ(out.group_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(out.scores[0], 0.5);
  EXPECT_DOUBLE_EQ(out.scores[1], 0.9);
  EXPECT_EQ(out.labels[0], 1);
  const std::vector<double> s2{0.8, 0.9, 0.2};
  const std::vector<std::string> g2{"a", "b", "a"};
  EXPECT_DOUBLE_EQ(aggregate_per_group(s2, y, g2).scores[0], 0.5);  // member order irrelevant
  const std::vector<std::string> solo{"x", "y", "z"};
  EXPECT_EQ(aggregate_per_group(s, y, solo).scores, s);
}

TEST(MetricReport, MeanAndJsonRoundTrip) {
  auto r = MetricReport::from_values("auroc", {0.7, 0.8, 0.9}, 120);
  EXPECT_DOUBLE_EQ(r.mean, 0.8);
  r.bootstrap = std::vector<double>{0.5, 0.6};
  const nlohmann::json j = r;
  const auto back = j.get<MetricReport>();
  EXPECT_EQ(back.name, "auroc");
  EXPECT_EQ(back.per_seed, r.per_seed);
  EXPECT_EQ(back.mean, r.mean);
  EXPECT_EQ(*back.bootstrap, *r.bootstrap);
  EXPECT_EQ(back.n, 120u);
}
