#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "abm/tensor.hpp"

namespace abm {

enum class LossKind { bce, mse };

template <typename T>
struct LossResult {
  double value = 0;
  Tensor3<T> grad;
};

// Binary cross entropy, -mean[t ln p + (1-t) ln(1-p)], with predictions
// clipped to [eps, 1-eps] so the loss stays finite; the gradient is the
// analytic form evaluated at the clipped values.
template <typename T>
LossResult<T> bce_loss(const Tensor3<T>& pred, const Tensor3<T>& target,
                       double eps = 1e-7) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("bce_loss: shape mismatch " + pred.shape().str() +
                                " vs " + target.shape().str());
  const std::size_t n = pred.size();
  LossResult<T> r;
  r.grad = Tensor3<T>(pred.height, pred.width, pred.channels);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(target.values[i]);
    if (t < 0.0 || t > 1.0)
      throw std::invalid_argument("bce_loss: target outside [0,1]");
    const double p = std::clamp(static_cast<double>(pred.values[i]), eps, 1.0 - eps);
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    r.grad.values[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / static_cast<double>(n));
  }
  r.value = sum / static_cast<double>(n);
  return r;
}

// Mean squared error, mean (p-t)^2, gradient 2(p-t)/N.
template <typename T>
LossResult<T> mse_loss(const Tensor3<T>& pred, const Tensor3<T>& target) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("mse_loss: shape mismatch " + pred.shape().str() +
                                " vs " + target.shape().str());
  const std::size_t n = pred.size();
  LossResult<T> r;
  r.grad = Tensor3<T>(pred.height, pred.width, pred.channels);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.values[i]) - static_cast<double>(target.values[i]);
    sum += d * d;
    r.grad.values[i] = static_cast<T>(2.0 * d / static_cast<double>(n));
  }
  r.value = sum / static_cast<double>(n);
  return r;
}

template <typename T>
LossResult<T> compute_loss(LossKind kind, const Tensor3<T>& pred, const Tensor3<T>& target) {
  return kind == LossKind::bce ? bce_loss(pred, target) : mse_loss(pred, target);
}

}  // namespace abm
