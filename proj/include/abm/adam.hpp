#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "abm/parallel.hpp"
#include "abm/weights.hpp"

namespace abm {

// Bias-corrected Adam (Kingma & Ba). Moment tensors mirror the weight layout.
template <typename T>
struct AdamState {
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  WeightStore<T> m;
  WeightStore<T> v;
};

template <typename T>
AdamState<T> adam_init(const WeightStore<T>& weights, double learning_rate = 1e-3,
                       double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8) {
  if (learning_rate <= 0) throw std::invalid_argument("adam: learning rate must be positive");
  if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
    throw std::invalid_argument("adam: betas must lie in (0,1)");
  AdamState<T> s;
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.m = weights;
  s.v = weights;
  for (auto& t : s.m.tensors) std::fill(t.values.begin(), t.values.end(), T(0));
  for (auto& t : s.v.tensors) std::fill(t.values.begin(), t.values.end(), T(0));
  return s;
}

template <typename T>
void adam_step(AdamState<T>& state, WeightStore<T>& weights, const WeightStore<T>& grads) {
  if (!weights.same_layout(grads) || !weights.same_layout(state.m))
    throw std::invalid_argument("adam: gradient/moment layout does not match weights");
  for (const auto& t : grads.tensors)
    for (const T& g : t.values)
      if (!std::isfinite(static_cast<double>(g)))
        throw std::runtime_error("adam: non-finite gradient in tensor '" + t.name +
                                 "', halting training");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T lr = static_cast<T>(state.learning_rate);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T eps = static_cast<T>(state.epsilon);
  const T ibc1 = static_cast<T>(1.0 / bc1);
  const T ibc2 = static_cast<T>(1.0 / bc2);

  for (std::size_t ti = 0; ti < weights.tensors.size(); ++ti) {
    T* wv = weights.tensors[ti].values.data();
    T* mv = state.m.tensors[ti].values.data();
    T* vv = state.v.tensors[ti].values.data();
    const T* gv = grads.tensors[ti].values.data();
    const std::int64_t n = static_cast<std::int64_t>(weights.tensors[ti].values.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
      const T g = gv[i];
      mv[i] = b1 * mv[i] + (T(1) - b1) * g;
      vv[i] = b2 * vv[i] + (T(1) - b2) * g * g;
      const T mhat = mv[i] * ibc1;
      const T vhat = vv[i] * ibc2;
      wv[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  weights.revision += 1;
}

}  // namespace abm
