#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "abm/engine.hpp"
#include "abm/loss.hpp"
#include "abm/rng.hpp"

namespace abm {

struct GradCheckOptions {
  double h = 1e-6;        // central-difference step
  std::size_t stride = 1; // check every stride-th parameter of each tensor
};

// Max over checked parameters of |analytic - fd| / max(|analytic|, |fd|, 1e-12),
// where fd is the central difference (f(w+h) - f(w-h)) / 2h of the scalar loss.
// f64 only; restores the weights bitwise.
inline double grad_check(const NetworkSpec& net, WeightStore<double>& w, LossKind loss,
                         const Tensor3d& x, const Tensor3d& target,
                         GradCheckOptions opts = {}) {
  ForwardCache<double> cache;
  const Tensor3d pred = forward(net, w, x, cache);
  const LossResult<double> base = compute_loss(loss, pred, target);
  const BackwardResult<double> analytic = backward(net, w, cache, base.grad);

  auto eval = [&]() {
    return compute_loss(loss, forward(net, w, x), target).value;
  };

  double max_rel = 0;
  const std::size_t stride = std::max<std::size_t>(1, opts.stride);
  for (std::size_t ti = 0; ti < w.tensors.size(); ++ti) {
    auto& values = w.tensors[ti].values;
    const auto& grads = analytic.grads.tensors[ti].values;
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      values[i] = saved + opts.h;
      const double up = eval();
      values[i] = saved - opts.h;
      const double down = eval();
      values[i] = saved;
      const double fd = (up - down) / (2.0 * opts.h);
      const double a = grads[i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

struct GradCheckInstance {
  WeightStore<double> weights;
  Tensor3d input;
  Tensor3d target;
};

// Random (weights, input, target) for finite-difference checks. Instances
// are re-sampled until every ReLU pre-activation satisfies |z| > margin and
// every max-pool window has a top-2 margin above it, so the loss is smooth
// within the FD step; margin defaults to 10h.
inline GradCheckInstance draw_kink_safe_instance(const NetworkSpec& net, LossKind loss,
                                                 std::uint64_t seed, double h = 1e-6,
                                                 double margin = 0.0,
                                                 int max_attempts = 200) {
  if (margin <= 0) margin = 10.0 * h;
  const Shape out = output_shape(net);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint64_t attempt_seed =
        CounterRng::mix(seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(attempt));
    GradCheckInstance inst;
    inst.weights = init_weights<double>(net, attempt_seed);
    CounterRng rng(attempt_seed, rng_stream::kGradCheck);
    inst.input = Tensor3d(net.input_shape.height, net.input_shape.width,
                          net.input_shape.channels);
    for (double& v : inst.input.values) v = rng.uniform(-1.0, 1.0);
    inst.target = Tensor3d(out.height, out.width, out.channels);
    for (double& v : inst.target.values)
      v = loss == LossKind::bce ? rng.uniform(0.05, 0.95) : rng.uniform(-1.0, 1.0);

    ForwardCache<double> cache;
    ForwardOptions<double> fopts;
    fopts.record_preact = true;
    const Tensor3d pred = forward(net, inst.weights, inst.input, cache, fopts);

    bool ok = true;
    for (std::size_t i = 0; i < net.layers.size() && ok; ++i) {
      if (net.layers[i].activation == Activation::relu && !cache.preacts[i].values.empty())
        for (double z : cache.preacts[i].values)
          if (std::abs(z) <= margin) {
            ok = false;
            break;
          }
      if (net.layers[i].kind == LayerKind::maxpool2d &&
          cache.pool_margins[i] <= margin)
        ok = false;
    }
    if (ok && loss == LossKind::bce)
      for (double p : pred.values)
        if (p < 1e-6 || p > 1.0 - 1e-6) {
          ok = false;
          break;
        }
    if (ok) return inst;
  }
  throw std::runtime_error("draw_kink_safe_instance: no smooth instance found");
}

}  // namespace abm
