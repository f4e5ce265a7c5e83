#pragma once

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abm/adam.hpp"
#include "abm/engine.hpp"
#include "abm/loss.hpp"
#include "abm/metrics.hpp"
#include "abm/models.hpp"
#include "abm/parallel.hpp"
#include "abm/rng.hpp"

namespace abm {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double best_val = 0;
  double learning_rate = 0;
};

inline std::string epoch_log_to_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_loss,best_val,learning_rate\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss,
                  e.val_loss, e.best_val, e.learning_rate);
    out += buf;
  }
  return out;
}

struct TrainStageConfig {
  LossKind loss = LossKind::mse;
  double learning_rate = 1e-3;
  int batch = 32;
  int max_epochs = 50;
  int patience = 10;      // epochs without validation improvement before stopping
  int lr_plateau = 5;     // halve the learning rate after this many flat epochs
  double l2_alpha = 0;    // penalty on kernel weights (not biases)
  std::uint64_t seed = 7;
  std::uint64_t shuffle_stream = 0;  // disambiguates stages under one seed
  bool verbose = false;
  std::string stage_name;
  // Observation hook, called with the current (not best) weights each epoch.
  std::function<void(const EpochLog&, const std::vector<WeightStore<float>>&)> epoch_callback;
};

struct ChainTrainResult {
  std::vector<WeightStore<float>> weights;  // best-validation checkpoint
  std::vector<EpochLog> log;
  double best_val = 0;
};

namespace detail {

template <typename T>
Tensor3<T> chain_forward(const std::vector<NetworkSpec>& nets,
                         const std::vector<WeightStore<T>>& weights, const Tensor3<T>& x,
                         std::vector<ForwardCache<T>>* caches) {
  Tensor3<T> cur = x;
  for (std::size_t n = 0; n < nets.size(); ++n) {
    if (caches)
      cur = forward(nets[n], weights[n], cur, (*caches)[n]);
    else
      cur = forward(nets[n], weights[n], cur);
  }
  return cur;
}

}  // namespace detail

// Minibatch Adam over a chain of networks evaluated end to end (the
// autoencoder trains encoder+decoder as a two-element chain). Per-sample
// gradients are computed in parallel and reduced in sample order, so results
// do not depend on the thread count; identical seeds give identical weights.
inline ChainTrainResult train_chain(const std::vector<NetworkSpec>& nets,
                                    std::vector<WeightStore<float>> weights,
                                    const std::vector<Tensor3f>& inputs,
                                    const std::vector<Tensor3f>& targets,
                                    const std::vector<int>& train_idx,
                                    const std::vector<int>& val_idx,
                                    const TrainStageConfig& tc) {
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train_chain: empty train or validation split");
  if (inputs.size() != targets.size())
    throw std::invalid_argument("train_chain: inputs/targets misaligned");

  std::vector<AdamState<float>> adam;
  for (const auto& w : weights) adam.push_back(adam_init(w, tc.learning_rate));

  const auto evaluate_split = [&](const std::vector<int>& idx) {
    std::vector<double> losses(idx.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(idx.size()); ++k) {
      const Tensor3f pred = detail::chain_forward<float>(
          nets, weights, inputs[idx[k]], static_cast<std::vector<ForwardCache<float>>*>(nullptr));
      losses[k] = compute_loss(tc.loss, pred, targets[idx[k]]).value;
    }
    double sum = 0;
    for (double v : losses) sum += v;  // fixed reduction order
    return sum / static_cast<double>(idx.size());
  };

  ChainTrainResult result;
  result.weights = weights;
  result.best_val = std::numeric_limits<double>::infinity();
  int flat_epochs = 0;
  int plateau_epochs = 0;

  std::vector<int> order(train_idx);
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    CounterRng shuffle_rng(tc.seed, rng_stream::sub(rng_stream::kShuffle,
                                                    (tc.shuffle_stream << 20) |
                                                        static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);

    double train_loss_sum = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const int bsz = static_cast<int>(std::min<std::size_t>(tc.batch, order.size() - start));
      std::vector<std::vector<WeightStore<float>>> sample_grads(bsz);
      std::vector<double> sample_loss(bsz);
      // Per-sample gradients in parallel; the engine's inner parallel loops
      // stay serial inside this region.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
      for (int k = 0; k < bsz; ++k) {
        const int i = order[start + k];
        std::vector<ForwardCache<float>> caches(nets.size());
        const Tensor3f pred = detail::chain_forward(nets, weights, inputs[i], &caches);
        const LossResult<float> loss = compute_loss(tc.loss, pred, targets[i]);
        sample_loss[k] = loss.value;
        sample_grads[k].resize(nets.size());
        Tensor3f dcur = loss.grad;
        for (std::size_t n = nets.size(); n-- > 0;) {
          BackwardOptions opts;
          opts.input_grad = n > 0;
          auto res = backward(nets[n], weights[n], caches[n], dcur, opts);
          sample_grads[k][n] = std::move(res.grads);
          dcur = std::move(res.input_grad);
        }
      }

      // Fixed-order reduction: mean gradient over the batch, sample 0 first.
      std::vector<WeightStore<float>> grads = std::move(sample_grads[0]);
      for (int k = 1; k < bsz; ++k)
        for (std::size_t n = 0; n < nets.size(); ++n)
          for (std::size_t ti = 0; ti < grads[n].tensors.size(); ++ti) {
            auto& acc = grads[n].tensors[ti].values;
            const auto& add = sample_grads[k][n].tensors[ti].values;
            for (std::size_t v = 0; v < acc.size(); ++v) acc[v] += add[v];
          }
      const float scale = 1.0f / static_cast<float>(bsz);
      for (std::size_t n = 0; n < nets.size(); ++n)
        for (auto& t : grads[n].tensors)
          for (float& v : t.values) v *= scale;

      if (tc.l2_alpha > 0) {
        const float penalty = static_cast<float>(tc.l2_alpha) / static_cast<float>(bsz);
        for (std::size_t n = 0; n < nets.size(); ++n)
          for (std::size_t ti = 0; ti < grads[n].tensors.size(); ti += 2) {
            const auto& wt = weights[n].tensors[ti].values;  // kernels only
            auto& gt = grads[n].tensors[ti].values;
            for (std::size_t v = 0; v < gt.size(); ++v) gt[v] += penalty * wt[v];
          }
      }

      for (std::size_t n = 0; n < nets.size(); ++n) adam_step(adam[n], weights[n], grads[n]);
      for (double v : sample_loss) train_loss_sum += v;
      ++batches;
      (void)batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = train_loss_sum / static_cast<double>(order.size());
    log.val_loss = evaluate_split(val_idx);
    log.learning_rate = adam[0].learning_rate;

    if (log.val_loss < result.best_val) {
      result.best_val = log.val_loss;
      result.weights = weights;
      flat_epochs = 0;
      plateau_epochs = 0;
    } else {
      ++flat_epochs;
      ++plateau_epochs;
    }
    log.best_val = result.best_val;
    result.log.push_back(log);
    if (tc.epoch_callback) tc.epoch_callback(log, weights);
    if (tc.verbose)
      std::fprintf(stderr, "[%s] epoch %d train %.6f val %.6f best %.6f lr %.2g\n",
                   tc.stage_name.c_str(), epoch, log.train_loss, log.val_loss, log.best_val,
                   log.learning_rate);

    if (plateau_epochs >= tc.lr_plateau) {
      for (auto& a : adam) a.learning_rate *= 0.5;  // adaptive learning rate
      plateau_epochs = 0;
    }
    if (flat_epochs >= tc.patience) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Stage wrappers.
// ---------------------------------------------------------------------------

struct AutoencoderResult {
  WeightStore<float> encoder_w, decoder_w;
  std::vector<EpochLog> log;
  double best_val = 0;
};

// Binary cross entropy between the decoded image and the (normalized) input
// image; best-validation weights are returned.
inline AutoencoderResult train_autoencoder(const std::vector<Tensor3f>& images01,
                                           const std::vector<int>& train_idx,
                                           const std::vector<int>& val_idx,
                                           const AbmConfig& cfg, bool verbose = false) {
  const NetworkSpec enc = build_encoder(cfg);
  const NetworkSpec dec = build_decoder(cfg);
  std::vector<WeightStore<float>> init{init_weights<float>(enc, cfg.seed),
                                       init_weights<float>(dec, cfg.seed + 1)};
  TrainStageConfig tc;
  tc.loss = LossKind::bce;
  tc.learning_rate = cfg.learning_rate;
  tc.batch = cfg.autoencoder_batch;
  tc.max_epochs = cfg.autoencoder_epochs;
  tc.patience = cfg.autoencoder_patience;
  tc.lr_plateau = cfg.lr_plateau;
  tc.seed = cfg.seed;
  tc.shuffle_stream = 1;
  tc.verbose = verbose;
  tc.stage_name = "autoencoder";
  auto res = train_chain({enc, dec}, std::move(init), images01, images01, train_idx, val_idx, tc);
  return {std::move(res.weights[0]), std::move(res.weights[1]), std::move(res.log),
          res.best_val};
}

struct BottleneckResult {
  WeightStore<float> weights;
  Standardizer standardizer;
  std::vector<EpochLog> log;
  double best_val = 0;
};

// MLP from standardized scalars to the flattened encoder latents (squared
// error, L2 penalty on kernels, early stop on flat validation).
inline BottleneckResult train_bottleneck(const std::vector<ScenarioInput>& scenarios,
                                         const std::vector<Tensor3f>& latents_flat,
                                         const std::vector<int>& train_idx,
                                         const std::vector<int>& val_idx, const AbmConfig& cfg,
                                         bool verbose = false) {
  std::vector<ScenarioInput> train_scenarios;
  for (int i : train_idx) train_scenarios.push_back(scenarios[i]);
  BottleneckResult out;
  out.standardizer = Standardizer::fit(train_scenarios);

  std::vector<Tensor3f> inputs;
  inputs.reserve(scenarios.size());
  for (const auto& sc : scenarios) {
    const auto f = out.standardizer.apply(sc);
    Tensor3f x(1, 1, 4);
    for (int d = 0; d < 4; ++d) x.values[d] = static_cast<float>(f[d]);
    inputs.push_back(std::move(x));
  }

  const NetworkSpec net = build_bottleneck(cfg);
  TrainStageConfig tc;
  tc.loss = LossKind::mse;
  tc.learning_rate = cfg.learning_rate;
  tc.batch = cfg.bottleneck_batch;
  tc.max_epochs = cfg.bottleneck_epochs;
  tc.patience = cfg.bottleneck_patience;
  tc.lr_plateau = cfg.lr_plateau;
  tc.l2_alpha = cfg.bottleneck_l2_alpha;
  tc.seed = cfg.seed;
  tc.shuffle_stream = 2;
  tc.verbose = verbose;
  tc.stage_name = "bottleneck";
  auto res = train_chain({net}, {init_weights<float>(net, cfg.seed + 2)}, inputs, latents_flat,
                         train_idx, val_idx, tc);
  out.weights = std::move(res.weights[0]);
  out.log = std::move(res.log);
  out.best_val = res.best_val;
  return out;
}

struct CorrectorResult {
  WeightStore<float> weights;
  std::vector<EpochLog> log;
  double best_val = 0;
};

// Denoiser from the bottleneck's noisy latent maps to the encoder's latents.
inline CorrectorResult train_corrector(const std::vector<Tensor3f>& noisy_latents,
                                       const std::vector<Tensor3f>& clean_latents,
                                       const std::vector<int>& train_idx,
                                       const std::vector<int>& val_idx, const AbmConfig& cfg,
                                       bool verbose = false) {
  const NetworkSpec net = build_corrector(cfg);
  TrainStageConfig tc;
  tc.loss = LossKind::mse;
  tc.learning_rate = cfg.learning_rate;
  tc.batch = cfg.corrector_batch;
  tc.max_epochs = cfg.corrector_epochs;
  tc.patience = cfg.corrector_patience;
  tc.lr_plateau = cfg.lr_plateau;
  tc.seed = cfg.seed;
  tc.shuffle_stream = 3;
  tc.verbose = verbose;
  tc.stage_name = "corrector";
  auto res = train_chain({net}, {init_weights<float>(net, cfg.seed + 3)}, noisy_latents,
                         clean_latents, train_idx, val_idx, tc);
  return {std::move(res.weights[0]), std::move(res.log), res.best_val};
}

}  // namespace abm
