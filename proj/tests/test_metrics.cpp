// Tests for the evaluation suite against independent brute-force oracles:
// NRMSE hand cases, FMS set counting, PR-AUC threshold enumeration, direct
// Pearson formulas, KNN linear scan, and the report round trip.
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "abm/metrics.hpp"
#include "abm/report.hpp"
#include "abm/rng.hpp"

using namespace abm;

namespace {

RgbImage gray_image(int h, int w, std::uint8_t v) {
  RgbImage img(h, w, 3, v);
  return img;
}

RgbImage random_image(int h, int w, CounterRng& rng) {
  RgbImage img(h, w, 3);
  for (auto& v : img.values) v = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

BinaryPattern pattern_from_bits(int h, int w, const std::vector<int>& bits) {
  BinaryPattern p;
  p.height = h;
  p.width = w;
  p.pattern.assign(bits.begin(), bits.end());
  return p;
}

// Exhaustive threshold-enumeration oracle for average precision: for every
// threshold, re-count TP/FP from scratch over all pixels.
double ap_oracle(const BinaryPattern& truth, const RgbImage& pred) {
  const std::size_t n = truth.pattern.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = 1.0 - gray_value(pred, i) / 255.0;
  std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
  const double positives = static_cast<double>(truth.count());
  double ap = 0, prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (scores[i] >= t) {
        predicted += 1;
        tp += truth.pattern[i];
      }
    const double precision = tp / predicted;
    const double recall = tp / positives;
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

}  // namespace

TEST(Nrmse, HandCases) {
  EXPECT_DOUBLE_EQ(nrmse_values({3, 4}, {0, 4}), 60.0);
  RgbImage truth = gray_image(2, 2, 100);
  EXPECT_DOUBLE_EQ(nrmse(truth, truth), 0.0);
  EXPECT_DOUBLE_EQ(nrmse(truth, gray_image(2, 2, 0)), 100.0);
}

TEST(Nrmse, ZeroNormTruthRejected) {
  EXPECT_THROW(nrmse(gray_image(2, 2, 0), gray_image(2, 2, 1)), std::invalid_argument);
  EXPECT_THROW(nrmse(gray_image(2, 2, 1), gray_image(2, 3, 1)), std::invalid_argument);
}

TEST(Nrmse, TruthItselfIsTheUniqueMinimizer) {
  CounterRng rng(3);
  const RgbImage truth = random_image(4, 4, rng);
  for (int trial = 0; trial < 20; ++trial) {
    RgbImage pred = random_image(4, 4, rng);
    if (pred.values == truth.values) continue;
    EXPECT_GT(nrmse(truth, pred), 0.0);
  }
}

TEST(Pattern, ThresholdRule) {
  RgbImage img(1, 3, 3);
  // white background pixel
  img.at(0, 0, 0) = img.at(0, 0, 1) = img.at(0, 0, 2) = 255;
  // black pixel
  img.at(0, 1, 0) = img.at(0, 1, 1) = img.at(0, 1, 2) = 0;
  // gray mean exactly 240: (250 + 230 + 240) / 3
  img.at(0, 2, 0) = 250;
  img.at(0, 2, 1) = 230;
  img.at(0, 2, 2) = 240;
  const BinaryPattern p = extract_pattern(img);
  EXPECT_EQ(p.pattern[0], 0);  // excluded
  EXPECT_EQ(p.pattern[1], 1);
  EXPECT_EQ(p.pattern[2], 1);  // boundary is inclusive
}

TEST(Fms, HandCases) {
  const auto a = pattern_from_bits(1, 4, {1, 1, 0, 0});
  const auto b = pattern_from_bits(1, 4, {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(fms(a, a), 100.0);
  EXPECT_DOUBLE_EQ(fms(a, b), 0.0);
  // |∩| = 2, |∪| = 8 on a 4x4 grid
  const auto c = pattern_from_bits(4, 4, {1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto d = pattern_from_bits(4, 4, {1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(fms(c, d), 25.0);
}

TEST(Fms, SymmetricBoundedAndEmptyUnion) {
  CounterRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> xb(12), yb(12);
    for (auto& v : xb) v = static_cast<int>(rng.index(2));
    for (auto& v : yb) v = static_cast<int>(rng.index(2));
    const auto x = pattern_from_bits(3, 4, xb);
    const auto y = pattern_from_bits(3, 4, yb);
    const double f = fms(x, y);
    EXPECT_DOUBLE_EQ(f, fms(y, x));
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 100.0);
  }
  const auto empty = pattern_from_bits(2, 2, {0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(fms(empty, empty), 100.0);
}

TEST(PrAuc, PerfectSeparationIsOne) {
  RgbImage pred(1, 4, 3);
  for (int x = 0; x < 2; ++x)
    for (int c = 0; c < 3; ++c) pred.at(0, x, c) = 0;  // dark = high score
  for (int x = 2; x < 4; ++x)
    for (int c = 0; c < 3; ++c) pred.at(0, x, c) = 255;
  const auto truth = pattern_from_bits(1, 4, {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(pr_auc(truth, pred), 1.0);
}

TEST(PrAuc, ConstantScoreGivesPositiveFraction) {
  const RgbImage pred = gray_image(5, 5, 77);
  std::vector<int> bits(25, 0);
  for (int i = 0; i < 5; ++i) bits[i * 3] = 1;
  const auto truth = pattern_from_bits(5, 5, bits);
  EXPECT_DOUBLE_EQ(pr_auc(truth, pred), 5.0 / 25.0);
}

TEST(PrAuc, MatchesExhaustiveOracle) {
  CounterRng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const RgbImage pred = random_image(5, 5, rng);
    std::vector<int> bits(25);
    bool any = false;
    for (auto& b : bits) {
      b = static_cast<int>(rng.index(2));
      any |= b;
    }
    if (!any) bits[0] = 1;
    const auto truth = pattern_from_bits(5, 5, bits);
    EXPECT_NEAR(pr_auc(truth, pred), ap_oracle(truth, pred), 1e-12) << "trial " << trial;
  }
}

TEST(PrAuc, InvariantUnderMonotoneScoreTransform) {
  // Gray levels drawn from the even bytes, remapped by v -> v/2 + 64: a
  // strictly increasing transform on that level set, so the score ranking
  // and hence the average precision are unchanged.
  CounterRng rng(41);
  RgbImage pred(6, 6, 3);
  for (int p = 0; p < 36; ++p) {
    const std::uint8_t g = static_cast<std::uint8_t>(2 * rng.index(128));
    for (int c = 0; c < 3; ++c) pred.values[p * 3 + c] = g;
  }
  RgbImage mapped = pred;
  for (auto& b : mapped.values) b = static_cast<std::uint8_t>(b / 2 + 64);
  std::vector<int> bits(36);
  for (auto& b : bits) b = static_cast<int>(rng.index(2));
  bits[1] = 1;
  const auto truth = pattern_from_bits(6, 6, bits);
  EXPECT_NEAR(pr_auc(truth, pred), pr_auc(truth, mapped), 1e-12);
}

TEST(Correlation, PerfectAndAnticorrelated) {
  CounterRng rng(8);
  std::vector<RgbImage> truths;
  for (int k = 0; k < 4; ++k) truths.push_back(random_image(3, 3, rng));
  const auto ones = pixel_correlation_map(truths, truths);
  for (double v : ones) EXPECT_NEAR(v, 1.0, 1e-12);

  // Mirror each pixel around the case mean: same variance, opposite sign.
  std::vector<RgbImage> flipped = truths;
  const std::size_t n = truths[0].values.size();
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0;
    for (const auto& t : truths) mean += t.values[i];
    mean /= truths.size();
    for (std::size_t k = 0; k < truths.size(); ++k) {
      const double v = 2 * mean - truths[k].values[i];
      flipped[k].values[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  // Only assert where the flip stayed in byte range (unclipped pixels).
  const auto anti = pixel_correlation_map(truths, flipped);
  int checked = 0;
  for (std::size_t p = 0; p < anti.size(); ++p) {
    bool clipped = false;
    for (int c = 0; c < 3; ++c) {
      double mean = 0;
      for (const auto& t : truths) mean += t.values[p * 3 + c];
      mean /= truths.size();
      for (const auto& t : truths) {
        const double v = 2 * mean - t.values[p * 3 + c];
        if (v < 0 || v > 255 || v != std::floor(v)) clipped = true;
      }
    }
    if (!clipped) {
      EXPECT_NEAR(anti[p], -1.0, 1e-12);
      ++checked;
    }
  }
  (void)checked;
}

TEST(Correlation, MatchesDirectFormulaOracle) {
  CounterRng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RgbImage> truths, preds;
    for (int k = 0; k < 3; ++k) {
      truths.push_back(random_image(2, 2, rng));
      preds.push_back(random_image(2, 2, rng));
    }
    const auto got = pixel_correlation_map(truths, preds);
    for (int p = 0; p < 4; ++p) {
      double sum = 0;
      for (int c = 0; c < 3; ++c) {
        double mt = 0, mp = 0;
        for (int k = 0; k < 3; ++k) {
          mt += truths[k].values[p * 3 + c];
          mp += preds[k].values[p * 3 + c];
        }
        mt /= 3;
        mp /= 3;
        double cov = 0, vt = 0, vp = 0;
        for (int k = 0; k < 3; ++k) {
          cov += (truths[k].values[p * 3 + c] - mt) * (preds[k].values[p * 3 + c] - mp);
          vt += (truths[k].values[p * 3 + c] - mt) * (truths[k].values[p * 3 + c] - mt);
          vp += (preds[k].values[p * 3 + c] - mp) * (preds[k].values[p * 3 + c] - mp);
        }
        if (vt > 0 && vp > 0) sum += cov / std::sqrt(vt * vp);
      }
      EXPECT_NEAR(got[p], sum / 3.0, 1e-12);
    }
  }
}

TEST(Correlation, NeedsTwoCases) {
  CounterRng rng(1);
  std::vector<RgbImage> one{random_image(2, 2, rng)};
  EXPECT_THROW(pixel_correlation_map(one, one), std::invalid_argument);
}

TEST(R2, HandCases) {
  EXPECT_DOUBLE_EQ(r2_score({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(r2_score({1, 2, 3}, {2, 2, 2}), 0.0);  // predicting the mean
  EXPECT_DOUBLE_EQ(r2_score({1, 2, 3}, {1, 2, 5}), -1.0);
  EXPECT_THROW(r2_score({2, 2, 2}, {1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(r2_score({1}, {1}), std::invalid_argument);
}

TEST(R2, MultiOutputAveragesUniformly) {
  const std::vector<std::vector<double>> t{{1, 10}, {2, 20}, {3, 30}};
  const std::vector<std::vector<double>> p{{1, 20}, {2, 20}, {3, 20}};
  // first output perfect (1.0), second predicts the mean (0.0)
  EXPECT_DOUBLE_EQ(r2_score_multi(t, p), 0.5);
}

TEST(Knn, ExactAndTwoPointCases) {
  std::vector<ScenarioInput> train{make_scenario(1000, 1000, 5, 0),
                                   make_scenario(4000, 4000, 10, 180)};
  const auto st = Standardizer::fit(train);
  EXPECT_EQ(knn_select(train[0], train, st), 0u);
  EXPECT_EQ(knn_select(train[1], train, st), 1u);
  EXPECT_EQ(knn_select(make_scenario(3900, 4100, 9.5, 175), train, st), 1u);
}

TEST(Knn, TiesBreakToLowestIndex) {
  std::vector<ScenarioInput> train{make_scenario(1000, 1000, 5, 10),
                                   make_scenario(1000, 1000, 5, 10),
                                   make_scenario(3000, 2000, 8, 90)};
  const auto st = Standardizer::fit(train);
  EXPECT_EQ(knn_select(train[1], train, st), 0u);
}

TEST(Knn, MatchesLinearScanOracle) {
  CounterRng rng(55);
  std::vector<ScenarioInput> train;
  for (int i = 0; i < 60; ++i)
    train.push_back(make_scenario(rng.uniform(0, 5000), rng.uniform(0, 5000),
                                  rng.uniform(0.5, 15), rng.uniform(0, 360)));
  const auto st = Standardizer::fit(train);

  // Independent oracle: recompute the standardization from definitions and
  // scan all points.
  double mean[4] = {0, 0, 0, 0}, sd[4] = {0, 0, 0, 0};
  for (const auto& sc : train) {
    const double f[4] = {sc.s_x, sc.s_y, sc.w_u, sc.w_v};
    for (int d = 0; d < 4; ++d) mean[d] += f[d] / train.size();
  }
  for (const auto& sc : train) {
    const double f[4] = {sc.s_x, sc.s_y, sc.w_u, sc.w_v};
    for (int d = 0; d < 4; ++d) sd[d] += (f[d] - mean[d]) * (f[d] - mean[d]) / train.size();
  }
  for (double& v : sd) v = std::sqrt(v);

  for (int q = 0; q < 100; ++q) {
    const auto query = make_scenario(rng.uniform(0, 5000), rng.uniform(0, 5000),
                                     rng.uniform(0.5, 15), rng.uniform(0, 360));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double qf[4] = {query.s_x, query.s_y, query.w_u, query.w_v};
      const double tf[4] = {train[i].s_x, train[i].s_y, train[i].w_u, train[i].w_v};
      double d2 = 0;
      for (int d = 0; d < 4; ++d) {
        const double dq = (qf[d] - mean[d]) / sd[d] - (tf[d] - mean[d]) / sd[d];
        d2 += dq * dq;
      }
      if (d2 < best_d) {
        best_d = d2;
        best = i;
      }
    }
    EXPECT_EQ(knn_select(query, train, st), best) << "query " << q;
  }
}

TEST(Knn, EmptyTrainingSetRejected) {
  std::vector<ScenarioInput> empty;
  EXPECT_THROW(Standardizer::fit(empty), std::invalid_argument);
  Standardizer st;
  st.std = {1, 1, 1, 1};
  EXPECT_THROW(knn_select(make_scenario(0, 0, 1, 0), empty, st), std::invalid_argument);
}

TEST(Standardizer, TrainStatisticsAreZeroMeanUnitStd) {
  CounterRng rng(66);
  std::vector<ScenarioInput> train;
  for (int i = 0; i < 40; ++i)
    train.push_back(make_scenario(rng.uniform(0, 5000), rng.uniform(0, 5000),
                                  rng.uniform(0.5, 15), rng.uniform(0, 360)));
  const auto st = Standardizer::fit(train);
  double mean[4] = {}, var[4] = {};
  for (const auto& sc : train) {
    const auto z = st.apply(sc);
    for (int d = 0; d < 4; ++d) mean[d] += z[d] / train.size();
  }
  for (const auto& sc : train) {
    const auto z = st.apply(sc);
    for (int d = 0; d < 4; ++d) var[d] += (z[d] - mean[d]) * (z[d] - mean[d]) / train.size();
  }
  for (int d = 0; d < 4; ++d) {
    EXPECT_NEAR(mean[d], 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(var[d]), 1.0, 1e-9);
  }
}

TEST(Standardizer, ZeroVarianceFeatureRejected) {
  std::vector<ScenarioInput> train{make_scenario(1000, 1, 5, 0), make_scenario(1000, 2, 6, 10),
                                   make_scenario(1000, 3, 7, 20)};
  EXPECT_THROW(Standardizer::fit(train), std::invalid_argument);
}

TEST(Reference, SingleImageAndSeededSequence) {
  CounterRng a(123, rng_stream::kReference), b(123, rng_stream::kReference);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(reference_select(1, a), 0u);
  for (int i = 0; i < 20; ++i) reference_select(1, b);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(reference_select(10, a), reference_select(10, b));
  EXPECT_THROW(reference_select(0, a), std::invalid_argument);
}

TEST(Reference, DrawsAreRoughlyUniform) {
  CounterRng rng(7, rng_stream::kReference);
  std::array<int, 10> counts{};
  for (int i = 0; i < 10000; ++i) counts[reference_select(10, rng)] += 1;
  for (int k = 0; k < 10; ++k) {
    EXPECT_GE(counts[k], 800) << "bucket " << k;
    EXPECT_LE(counts[k], 1200) << "bucket " << k;
  }
}

TEST(Suite, TruthAgainstItselfIsPerfect) {
  CounterRng rng(2);
  std::vector<RgbImage> truths;
  for (int i = 0; i < 3; ++i) {
    RgbImage img = gray_image(4, 4, 255);
    img.at(i, i, 0) = img.at(i, i, 1) = img.at(i, i, 2) = 0;
    truths.push_back(img);
  }
  const auto report = evaluate_suite({"abm"}, {truths}, truths);
  ASSERT_EQ(report.models.size(), 1u);
  EXPECT_DOUBLE_EQ(report.models[0].mean_nrmse, 0.0);
  EXPECT_DOUBLE_EQ(report.models[0].mean_fms, 100.0);
  EXPECT_DOUBLE_EQ(report.models[0].mean_pr_auc, 1.0);
}

TEST(Suite, HistogramCountsSumToCaseCount) {
  CounterRng rng(12);
  std::vector<RgbImage> truths, preds;
  for (int i = 0; i < 7; ++i) {
    RgbImage t = random_image(4, 4, rng);
    t.at(0, 0, 0) = t.at(0, 0, 1) = t.at(0, 0, 2) = 0;  // guarantee a pattern cell
    truths.push_back(t);
    preds.push_back(random_image(4, 4, rng));
  }
  const auto report = evaluate_suite({"a", "b"}, {preds, truths}, truths);
  for (const auto& m : report.models) {
    for (const auto* h : {&m.hist_nrmse, &m.hist_fms, &m.hist_pr_auc}) {
      int total = 0;
      for (int v : *h) total += v;
      EXPECT_EQ(total, 7);
    }
  }
}

TEST(Suite, MisalignedListsRejected) {
  CounterRng rng(13);
  std::vector<RgbImage> truths{random_image(2, 2, rng), random_image(2, 2, rng)};
  std::vector<RgbImage> preds{random_image(2, 2, rng)};
  EXPECT_THROW(evaluate_suite({"a"}, {preds}, truths), std::invalid_argument);
}

TEST(Report, CsvRoundTripIsLossless) {
  CounterRng rng(14);
  std::vector<RgbImage> truths, preds;
  for (int i = 0; i < 5; ++i) {
    RgbImage t = random_image(3, 3, rng);
    t.at(0, 0, 0) = t.at(0, 0, 1) = t.at(0, 0, 2) = 0;
    truths.push_back(t);
    preds.push_back(random_image(3, 3, rng));
  }
  const auto report = evaluate_suite({"abm", "knn"}, {preds, truths}, truths);
  const auto back = report_from_csv(report_to_csv(report));
  ASSERT_EQ(back.models.size(), report.models.size());
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    ASSERT_EQ(back.models[m].cases.size(), report.models[m].cases.size());
    for (std::size_t i = 0; i < report.models[m].cases.size(); ++i) {
      EXPECT_EQ(back.models[m].cases[i].nrmse, report.models[m].cases[i].nrmse);
      EXPECT_EQ(back.models[m].cases[i].fms, report.models[m].cases[i].fms);
      EXPECT_EQ(back.models[m].cases[i].pr_auc, report.models[m].cases[i].pr_auc);
    }
    EXPECT_EQ(back.models[m].hist_fms, report.models[m].hist_fms);
  }
}

TEST(Report, SummaryJsonHasExactlyTheGivenModels) {
  CounterRng rng(15);
  std::vector<RgbImage> truths{random_image(2, 2, rng), random_image(2, 2, rng)};
  for (auto& t : truths) t.at(0, 0, 0) = t.at(0, 0, 1) = t.at(0, 0, 2) = 0;
  const auto report =
      evaluate_suite({"abm", "knn", "reference"}, {truths, truths, truths}, truths);
  const auto j = report_summary_json(report);
  ASSERT_TRUE(j.contains("models"));
  EXPECT_EQ(j["models"].size(), 3u);
  for (const char* name : {"abm", "knn", "reference"}) {
    ASSERT_TRUE(j["models"].contains(name));
    EXPECT_TRUE(j["models"][name].contains("mean_nrmse"));
  }
}
