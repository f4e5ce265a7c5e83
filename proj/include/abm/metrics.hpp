#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "abm/colormap.hpp"
#include "abm/rng.hpp"
#include "abm/scenario.hpp"
#include "abm/tensor.hpp"

namespace abm {

// ---------------------------------------------------------------------------
// NRMSE: 100 * ||truth - pred||_2 / ||truth||_2 over raw byte values.
// ---------------------------------------------------------------------------

inline double nrmse_values(const std::vector<double>& truth, const std::vector<double>& pred) {
  if (truth.size() != pred.size())
    throw std::invalid_argument("nrmse: size mismatch");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den == 0) throw std::invalid_argument("nrmse: truth has zero norm");
  return 100.0 * std::sqrt(num) / std::sqrt(den);
}

inline double nrmse(const RgbImage& truth, const RgbImage& pred) {
  if (truth.shape() != pred.shape())
    throw std::invalid_argument("nrmse: shape mismatch " + truth.shape().str() + " vs " +
                                pred.shape().str());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    const double t = truth.values[i];
    const double d = t - static_cast<double>(pred.values[i]);
    num += d * d;
    den += t * t;
  }
  if (den == 0) throw std::invalid_argument("nrmse: truth has zero norm");
  return 100.0 * std::sqrt(num) / std::sqrt(den);
}

// ---------------------------------------------------------------------------
// Binary spatial patterns and the figure of merit in space (Jaccard index).
// ---------------------------------------------------------------------------

// Cell state per pixel: pattern (deposition present) or excluded (white).
struct BinaryPattern {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pattern;  // 1 = pattern, 0 = excluded

  std::size_t count() const {
    return std::accumulate(pattern.begin(), pattern.end(), std::size_t{0});
  }
};

inline double gray_value(const RgbImage& img, std::size_t pixel) {
  const std::size_t i = pixel * 3;
  return (static_cast<double>(img.values[i]) + img.values[i + 1] + img.values[i + 2]) / 3.0;
}

// Grayscale = channel mean; gray above the threshold is background (excluded),
// gray at or below it is pattern.
inline BinaryPattern extract_pattern(const RgbImage& img, double threshold = 240.0) {
  BinaryPattern bp;
  bp.height = img.height;
  bp.width = img.width;
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  bp.pattern.resize(n);
  for (std::size_t i = 0; i < n; ++i) bp.pattern[i] = gray_value(img, i) <= threshold ? 1 : 0;
  return bp;
}

// 100 * |a ∩ b| / |a ∪ b| over pattern cells. Two empty patterns agree
// perfectly by convention (100).
inline double fms(const BinaryPattern& a, const BinaryPattern& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("fms: pattern shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.pattern.size(); ++i) {
    inter += a.pattern[i] & b.pattern[i];
    uni += a.pattern[i] | b.pattern[i];
  }
  if (uni == 0) return 100.0;
  return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// PR-AUC: average precision of per-pixel pattern classification, scoring each
// pixel by darkness, 1 - gray/255.
// ---------------------------------------------------------------------------

inline double pr_auc(const BinaryPattern& truth, const RgbImage& pred) {
  if (truth.height != pred.height || truth.width != pred.width)
    throw std::invalid_argument("pr_auc: shape mismatch");
  const std::size_t n = truth.pattern.size();
  const std::size_t positives = truth.count();
  if (positives == 0) throw std::invalid_argument("pr_auc: truth pattern is empty");

  std::vector<std::pair<double, std::uint8_t>> scored(n);
  for (std::size_t i = 0; i < n; ++i)
    scored[i] = {1.0 - gray_value(pred, i) / 255.0, truth.pattern[i]};
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Step over descending unique scores; AP = sum (R_k - R_{k-1}) * P_k.
  double ap = 0;
  double prev_recall = 0;
  std::size_t tp = 0, predicted = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scored[j].first == scored[i].first) {
      tp += scored[j].second;
      ++predicted;
      ++j;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

// ---------------------------------------------------------------------------
// Pixel-level Pearson correlation across cases, channel-averaged per pixel.
// ---------------------------------------------------------------------------

inline std::vector<double> pixel_correlation_map(const std::vector<RgbImage>& truths,
                                                 const std::vector<RgbImage>& preds) {
  if (truths.size() != preds.size())
    throw std::invalid_argument("pixel_correlation_map: case lists differ in length");
  if (truths.size() < 2)
    throw std::invalid_argument("pixel_correlation_map: needs at least 2 cases");
  const Shape shape = truths[0].shape();
  for (std::size_t k = 0; k < truths.size(); ++k)
    if (truths[k].shape() != shape || preds[k].shape() != shape)
      throw std::invalid_argument("pixel_correlation_map: inconsistent shapes");

  const std::size_t cases = truths.size();
  const std::size_t pixels = static_cast<std::size_t>(shape.height) * shape.width;
  std::vector<double> map(pixels, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    double channel_sum = 0;
    for (int c = 0; c < 3; ++c) {
      const std::size_t vi = p * 3 + c;
      double st = 0, sp = 0;
      for (std::size_t k = 0; k < cases; ++k) {
        st += truths[k].values[vi];
        sp += preds[k].values[vi];
      }
      const double mt = st / cases, mp = sp / cases;
      double cov = 0, vt = 0, vp = 0;
      for (std::size_t k = 0; k < cases; ++k) {
        const double dt = truths[k].values[vi] - mt;
        const double dp = preds[k].values[vi] - mp;
        cov += dt * dp;
        vt += dt * dt;
        vp += dp * dp;
      }
      // Constant pixels carry no signal; count them as zero correlation.
      if (vt > 0 && vp > 0) channel_sum += cov / std::sqrt(vt * vp);
    }
    map[p] = channel_sum / 3.0;
  }
  return map;
}

// ---------------------------------------------------------------------------
// R^2, averaged uniformly over outputs for multi-output targets.
// ---------------------------------------------------------------------------

inline double r2_score(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("r2_score: size mismatch");
  if (y_true.size() < 2) throw std::invalid_argument("r2_score: needs at least 2 samples");
  const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / y_true.size();
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (ss_tot == 0) throw std::invalid_argument("r2_score: target has zero variance");
  return 1.0 - ss_res / ss_tot;
}

// Column-wise R^2 over samples, averaged across outputs; zero-variance
// columns are skipped (they carry no signal to explain).
inline double r2_score_multi(const std::vector<std::vector<double>>& y_true,
                             const std::vector<std::vector<double>>& y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty())
    throw std::invalid_argument("r2_score_multi: bad inputs");
  const std::size_t outputs = y_true[0].size();
  double sum = 0;
  std::size_t used = 0;
  std::vector<double> col_t(y_true.size()), col_p(y_true.size());
  for (std::size_t o = 0; o < outputs; ++o) {
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      col_t[i] = y_true[i][o];
      col_p[i] = y_pred[i][o];
    }
    const double mean = std::accumulate(col_t.begin(), col_t.end(), 0.0) / col_t.size();
    double ss_tot = 0;
    for (double v : col_t) ss_tot += (v - mean) * (v - mean);
    if (ss_tot == 0) continue;
    sum += r2_score(col_t, col_p);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("r2_score_multi: all outputs have zero variance");
  return sum / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// Baselines: 1-nearest-neighbor on standardized inputs, and a random-pattern
// reference that ignores its input.
// ---------------------------------------------------------------------------

inline std::array<double, 4> scenario_features(const ScenarioInput& sc) {
  return {sc.s_x, sc.s_y, sc.w_u, sc.w_v};
}

// Per-feature z-scoring with training-set statistics.
struct Standardizer {
  std::array<double, 4> mean{};
  std::array<double, 4> std{};

  static Standardizer fit(const std::vector<ScenarioInput>& train) {
    if (train.empty()) throw std::invalid_argument("Standardizer: empty training set");
    Standardizer s;
    for (const auto& sc : train) {
      const auto f = scenario_features(sc);
      for (int d = 0; d < 4; ++d) s.mean[d] += f[d];
    }
    for (int d = 0; d < 4; ++d) s.mean[d] /= static_cast<double>(train.size());
    for (const auto& sc : train) {
      const auto f = scenario_features(sc);
      for (int d = 0; d < 4; ++d) s.std[d] += (f[d] - s.mean[d]) * (f[d] - s.mean[d]);
    }
    for (int d = 0; d < 4; ++d) {
      s.std[d] = std::sqrt(s.std[d] / static_cast<double>(train.size()));
      if (s.std[d] <= 0)
        throw std::invalid_argument("Standardizer: feature " + std::to_string(d) +
                                    " has zero variance");
    }
    return s;
  }

  std::array<double, 4> apply(const ScenarioInput& sc) const {
    const auto f = scenario_features(sc);
    std::array<double, 4> out;
    for (int d = 0; d < 4; ++d) out[d] = (f[d] - mean[d]) / std[d];
    return out;
  }
};

// Index of the Euclidean-nearest standardized training input (K = 1);
// ties break toward the lowest index.
inline std::size_t knn_select(const ScenarioInput& query,
                              const std::vector<ScenarioInput>& train,
                              const Standardizer& standardizer) {
  if (train.empty()) throw std::invalid_argument("knn_select: empty training set");
  const auto q = standardizer.apply(query);
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto f = standardizer.apply(train[i]);
    double d2 = 0;
    for (int d = 0; d < 4; ++d) d2 += (q[d] - f[d]) * (q[d] - f[d]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

// Uniformly random training index, independent of the query.
inline std::size_t reference_select(std::size_t train_size, CounterRng& rng) {
  if (train_size == 0) throw std::invalid_argument("reference_select: empty training set");
  return rng.index(train_size);
}

// ---------------------------------------------------------------------------
// Whole-suite evaluation with fixed-range 20-bin histograms.
// ---------------------------------------------------------------------------

struct CaseMetrics {
  double nrmse = 0;
  double fms = 0;
  double pr_auc = 0;
};

constexpr int kHistogramBins = 20;

struct ModelEval {
  std::string name;
  std::vector<CaseMetrics> cases;
  double mean_nrmse = 0;
  double mean_fms = 0;
  double mean_pr_auc = 0;
  std::array<int, kHistogramBins> hist_nrmse{};   // over [0, 100]
  std::array<int, kHistogramBins> hist_fms{};     // over [0, 100]
  std::array<int, kHistogramBins> hist_pr_auc{};  // over [0, 1]
};

struct EvalReport {
  std::vector<ModelEval> models;
};

inline int histogram_bin(double v, double range) {
  const int bin = static_cast<int>(v / range * kHistogramBins);
  return std::clamp(bin, 0, kHistogramBins - 1);
}

inline ModelEval evaluate_model(const std::string& name,
                                const std::vector<RgbImage>& predictions,
                                const std::vector<RgbImage>& truths,
                                const std::vector<BinaryPattern>& truth_patterns) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("evaluate_model: prediction/truth lists misaligned");
  ModelEval ev;
  ev.name = name;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    CaseMetrics m;
    m.nrmse = nrmse(truths[i], predictions[i]);
    m.fms = fms(truth_patterns[i], extract_pattern(predictions[i]));
    m.pr_auc = pr_auc(truth_patterns[i], predictions[i]);
    ev.cases.push_back(m);
    ev.mean_nrmse += m.nrmse;
    ev.mean_fms += m.fms;
    ev.mean_pr_auc += m.pr_auc;
    ev.hist_nrmse[histogram_bin(m.nrmse, 100.0)] += 1;
    ev.hist_fms[histogram_bin(m.fms, 100.0)] += 1;
    ev.hist_pr_auc[histogram_bin(m.pr_auc, 1.0)] += 1;
  }
  const double n = static_cast<double>(ev.cases.size());
  ev.mean_nrmse /= n;
  ev.mean_fms /= n;
  ev.mean_pr_auc /= n;
  return ev;
}

inline EvalReport evaluate_suite(const std::vector<std::string>& names,
                                 const std::vector<std::vector<RgbImage>>& predictions,
                                 const std::vector<RgbImage>& truths) {
  if (names.size() != predictions.size())
    throw std::invalid_argument("evaluate_suite: names/predictions misaligned");
  if (truths.empty()) throw std::invalid_argument("evaluate_suite: no test cases");
  std::vector<BinaryPattern> truth_patterns;
  truth_patterns.reserve(truths.size());
  for (const auto& t : truths) truth_patterns.push_back(extract_pattern(t));
  EvalReport report;
  for (std::size_t m = 0; m < names.size(); ++m)
    report.models.push_back(evaluate_model(names[m], predictions[m], truths, truth_patterns));
  return report;
}

}  // namespace abm
