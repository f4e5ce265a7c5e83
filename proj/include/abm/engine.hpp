#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "abm/network.hpp"
#include "abm/parallel.hpp"
#include "abm/tensor.hpp"
#include "abm/weights.hpp"

namespace abm {

template <typename T>
inline T apply_activation(Activation a, T v) {
  switch (a) {
    case Activation::relu: return v > T(0) ? v : T(0);
    case Activation::sigmoid: return T(1) / (T(1) + std::exp(-v));
    case Activation::none: return v;
  }
  return v;
}

// Derivative expressed through the post-activation output.
template <typename T>
inline T activation_derivative_from_output(Activation a, T y) {
  switch (a) {
    case Activation::relu: return y > T(0) ? T(1) : T(0);
    case Activation::sigmoid: return y * (T(1) - y);
    case Activation::none: return T(1);
  }
  return T(1);
}

// Everything backward() needs from a forward() call. Layer i's input is
// outputs[i-1] (or `input` for i = 0); outputs are post-activation.
template <typename T>
struct ForwardCache {
  std::uint64_t spec_fp = 0;
  std::uint64_t weights_revision = 0;
  Tensor3<T> input;
  std::vector<Tensor3<T>> outputs;
  std::vector<std::vector<std::int32_t>> pool_argmax;  // -1: padding won the max
  bool record_preact = false;
  std::vector<Tensor3<T>> preacts;      // conv/dense layers, when recorded
  std::vector<double> pool_margins;     // min top-2 window margin per pool layer

  const Tensor3<T>& layer_input(std::size_t i) const {
    return i == 0 ? input : outputs[i - 1];
  }
};

namespace detail {

constexpr int kMaxChannels = 256;

// Dot product vectorized via omp simd. The reduction order is fixed at
// compile time, so for a given binary the result is bit-reproducible and
// independent of the thread count.
template <typename T>
inline T chunked_dot(const T* a, const T* b, int n) {
  T sum = T(0);
#ifdef _OPENMP
#pragma omp simd reduction(+ : sum)
#endif
  for (int i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

// Kernels are stored [oc][ky][kx][ic]; the repacked [ky][kx][ic][oc] layout
// makes the output channel contiguous for oc-vectorized loops.
template <typename T>
std::vector<T> repack_kernel_oc_inner(const NamedTensor<T>& kernel) {
  const int OC = static_cast<int>(kernel.dims[0]);
  const int K = static_cast<int>(kernel.dims[1]);
  const int IC = static_cast<int>(kernel.dims[3]);
  std::vector<T> packed(kernel.values.size());
  for (int oc = 0; oc < OC; ++oc)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx)
        for (int ic = 0; ic < IC; ++ic)
          packed[(((static_cast<std::size_t>(ky) * K + kx) * IC + ic) * OC) + oc] =
              kernel.values[(((static_cast<std::size_t>(oc) * K + ky) * K + kx) * IC) + ic];
  return packed;
}

template <typename T>
void conv2d_forward(const Tensor3<T>& in, const NamedTensor<T>& kernel,
                    const NamedTensor<T>& bias, Activation act, Tensor3<T>& out,
                    Tensor3<T>* preact) {
  const int H = in.height, W = in.width, IC = in.channels;
  const int OC = static_cast<int>(kernel.dims[0]);
  const int K = static_cast<int>(kernel.dims[1]);
  const int pad = K / 2;
  const T* wv = kernel.values.data();
  const T* bv = bias.values.data();

  // Wide output: accumulate whole output-channel rows (vector per oc).
  // Narrow output: per-channel dots over the contiguous (kx, ic) run.
  const bool oc_inner = OC >= 8;
  std::vector<T> packed;
  if (oc_inner) packed = repack_kernel_oc_inner(kernel);
  const T* wp = packed.data();

  // Interior columns where every kernel tap is in bounds; the blocked path
  // sweeps the kernel once per 4 output pixels.
  const int xi0 = std::min(pad, W);
  const int xi1 = std::max(xi0, W - pad);
  constexpr int Bx = 4;

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int y = 0; y < H; ++y) {
    const int ky0 = std::max(0, pad - y);
    const int ky1 = std::min(K, H + pad - y);
    T acc[kMaxChannels];
    T accb[Bx][kMaxChannels];

    auto emit = [&](int x, const T* vals) {
      T* orow = out.row(y, x);
      if (preact) {
        T* prow = preact->row(y, x);
        for (int oc = 0; oc < OC; ++oc) prow[oc] = vals[oc];
      }
      for (int oc = 0; oc < OC; ++oc) orow[oc] = apply_activation(act, vals[oc]);
    };

    auto single = [&](int x) {
      const int kx0 = std::max(0, pad - x);
      const int kx1 = std::min(K, W + pad - x);
      if (oc_inner) {
        for (int oc = 0; oc < OC; ++oc) acc[oc] = bv[oc];
        for (int ky = ky0; ky < ky1; ++ky) {
          const T* xrow = in.row(y + ky - pad, x + kx0 - pad);
          for (int kx = kx0; kx < kx1; ++kx) {
            const T* wrow = wp + (static_cast<std::size_t>(ky) * K + kx) * IC * OC;
            for (int ic = 0; ic < IC; ++ic) {
              const T v = xrow[ic];
              const T* ws = wrow + static_cast<std::size_t>(ic) * OC;
              for (int oc = 0; oc < OC; ++oc) acc[oc] += v * ws[oc];
            }
            xrow += IC;
          }
        }
      } else {
        const int run = (kx1 - kx0) * IC;
        for (int oc = 0; oc < OC; ++oc) {
          T sum = bv[oc];
          for (int ky = ky0; ky < ky1; ++ky)
            sum += chunked_dot(
                in.row(y + ky - pad, x + kx0 - pad),
                wv + ((static_cast<std::size_t>(oc) * K + ky) * K + kx0) * IC, run);
          acc[oc] = sum;
        }
      }
      emit(x, acc);
    };

    int x = 0;
    for (; x < xi0; ++x) single(x);
    if (oc_inner) {
      for (; x + Bx <= xi1; x += Bx) {
        for (int p = 0; p < Bx; ++p)
          for (int oc = 0; oc < OC; ++oc) accb[p][oc] = bv[oc];
        for (int ky = ky0; ky < ky1; ++ky) {
          const T* xbase = in.row(y + ky - pad, x - pad);
          const T* wrow = wp + static_cast<std::size_t>(ky) * K * IC * OC;
          for (int kx = 0; kx < K; ++kx) {
            for (int ic = 0; ic < IC; ++ic) {
              const T* __restrict ws = wrow + static_cast<std::size_t>(ic) * OC;
              const T v0 = xbase[(kx + 0) * IC + ic];
              const T v1 = xbase[(kx + 1) * IC + ic];
              const T v2 = xbase[(kx + 2) * IC + ic];
              const T v3 = xbase[(kx + 3) * IC + ic];
              for (int oc = 0; oc < OC; ++oc) {
                accb[0][oc] += v0 * ws[oc];
                accb[1][oc] += v1 * ws[oc];
                accb[2][oc] += v2 * ws[oc];
                accb[3][oc] += v3 * ws[oc];
              }
            }
            wrow += static_cast<std::size_t>(IC) * OC;
          }
        }
        for (int p = 0; p < Bx; ++p) emit(x + p, accb[p]);
      }
    }
    for (; x < W; ++x) single(x);
  }
}

// dZ is the loss gradient at the pre-activation values.
template <typename T>
void conv2d_backward(const Tensor3<T>& in, const NamedTensor<T>& kernel,
                     const Tensor3<T>& dz, NamedTensor<T>& dkernel,
                     NamedTensor<T>& dbias, Tensor3<T>* din) {
  const int H = in.height, W = in.width, IC = in.channels;
  const int OC = static_cast<int>(kernel.dims[0]);
  const int K = static_cast<int>(kernel.dims[1]);
  const int pad = K / 2;
  const T* wv = kernel.values.data();

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int oc = 0; oc < OC; ++oc) {
    T sum = T(0);
    for (int y = 0; y < H; ++y) {
      const T* dzrow = dz.row(y, 0) + oc;
      for (int x = 0; x < W; ++x) sum += dzrow[static_cast<std::size_t>(x) * OC];
    }
    dbias.values[oc] = sum;
  }

  // dW[oc][ky][kx][ic] = sum_{y,x} dZ[y][x][oc] * X[y+ky-pad][x+kx-pad][ic],
  // accumulated as per-(ky,kx) outer products of the input row and the whole
  // dZ channel row so each image is streamed once per kernel offset; one
  // thread owns each offset. Unpacked into the canonical layout afterwards.
  // Even and odd columns accumulate into separate halves (merged at unpack
  // time, in a fixed order) to break the store-to-load chain on the slab.
  const std::size_t slab_len = static_cast<std::size_t>(K) * K * IC * OC;
  std::vector<T> slab(2 * slab_len, T(0));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int kk = 0; kk < K * K; ++kk) {
    const int ky = kk / K;
    const int kx = kk % K;
    const int y0 = std::max(0, pad - ky);
    const int y1 = std::min(H, H + pad - ky);
    const int x0 = std::max(0, pad - kx);
    const int x1 = std::min(W, W + pad - kx);
    T* sa = slab.data() + static_cast<std::size_t>(kk) * IC * OC;
    T* sb = sa + slab_len;
    for (int y = y0; y < y1; ++y) {
      const T* xrow = in.row(y + ky - pad, x0 + kx - pad);
      const T* dzrow = dz.row(y, x0);
      int x = x0;
      if (OC >= 8) {
        // slab layout [ic][oc], vectorized over oc
        for (; x + 2 <= x1; x += 2) {
          for (int ic = 0; ic < IC; ++ic) {
            const T va = xrow[ic];
            const T vb = xrow[IC + ic];
            T* __restrict ra = sa + static_cast<std::size_t>(ic) * OC;
            T* __restrict rb = sb + static_cast<std::size_t>(ic) * OC;
            for (int oc = 0; oc < OC; ++oc) {
              ra[oc] += va * dzrow[oc];
              rb[oc] += vb * dzrow[OC + oc];
            }
          }
          xrow += 2 * IC;
          dzrow += 2 * OC;
        }
        for (; x < x1; ++x) {
          for (int ic = 0; ic < IC; ++ic) {
            const T v = xrow[ic];
            T* __restrict ra = sa + static_cast<std::size_t>(ic) * OC;
            for (int oc = 0; oc < OC; ++oc) ra[oc] += v * dzrow[oc];
          }
          xrow += IC;
          dzrow += OC;
        }
      } else {
        // slab layout [oc][ic], vectorized over ic
        for (; x + 2 <= x1; x += 2) {
          for (int oc = 0; oc < OC; ++oc) {
            const T va = dzrow[oc];
            const T vb = dzrow[OC + oc];
            T* __restrict ra = sa + static_cast<std::size_t>(oc) * IC;
            T* __restrict rb = sb + static_cast<std::size_t>(oc) * IC;
            for (int ic = 0; ic < IC; ++ic) {
              ra[ic] += va * xrow[ic];
              rb[ic] += vb * xrow[IC + ic];
            }
          }
          xrow += 2 * IC;
          dzrow += 2 * OC;
        }
        for (; x < x1; ++x) {
          for (int oc = 0; oc < OC; ++oc) {
            const T v = dzrow[oc];
            T* __restrict ra = sa + static_cast<std::size_t>(oc) * IC;
            for (int ic = 0; ic < IC; ++ic) ra[ic] += v * xrow[ic];
          }
          xrow += IC;
          dzrow += OC;
        }
      }
    }
  }
  for (int oc = 0; oc < OC; ++oc)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx)
        for (int ic = 0; ic < IC; ++ic) {
          const std::size_t kbase = (static_cast<std::size_t>(ky) * K + kx) * IC * OC;
          const std::size_t si = OC >= 8 ? kbase + static_cast<std::size_t>(ic) * OC + oc
                                         : kbase + static_cast<std::size_t>(oc) * IC + ic;
          dkernel.values[((static_cast<std::size_t>(oc) * K + ky) * K + kx) * IC + ic] =
              slab[si] + slab[si + slab_len];
        }

  if (!din) return;
  // The input gradient is itself a same-padded convolution of dZ with the
  // kernel flipped in (ky, kx) and transposed in (oc, ic); reuse the
  // optimized forward path on that kernel.
  NamedTensor<T> flipped;
  flipped.dims = {static_cast<std::uint32_t>(IC), static_cast<std::uint32_t>(K),
                  static_cast<std::uint32_t>(K), static_cast<std::uint32_t>(OC)};
  flipped.values.resize(kernel.values.size());
  for (int oc = 0; oc < OC; ++oc)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx)
        for (int ic = 0; ic < IC; ++ic)
          flipped.values[((static_cast<std::size_t>(ic) * K + (K - 1 - ky)) * K +
                          (K - 1 - kx)) * OC + oc] =
              wv[((static_cast<std::size_t>(oc) * K + ky) * K + kx) * IC + ic];
  NamedTensor<T> zero_bias;
  zero_bias.dims = {static_cast<std::uint32_t>(IC)};
  zero_bias.values.assign(IC, T(0));
  conv2d_forward(dz, flipped, zero_bias, Activation::none, *din,
                 static_cast<Tensor3<T>*>(nullptr));
}

// Windows are non-overlapping; cells hanging over the right/bottom edge
// compare against the zero padding, and if the padding wins no input cell
// receives gradient (argmax -1).
template <typename T>
void maxpool_forward(const Tensor3<T>& in, int factor, Activation act,
                     Tensor3<T>& out, std::vector<std::int32_t>& argmax,
                     double* min_margin) {
  const int OH = out.height, OW = out.width, C = in.channels;
  argmax.assign(out.size(), -1);
  double margin = std::numeric_limits<double>::infinity();

#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(min : margin)
#endif
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      for (int c = 0; c < C; ++c) {
        const bool overhang = (oy + 1) * factor > in.height || (ox + 1) * factor > in.width;
        T best = overhang ? T(0) : std::numeric_limits<T>::lowest();
        T second = std::numeric_limits<T>::lowest();
        std::int32_t best_idx = -1;
        for (int dy = 0; dy < factor; ++dy) {
          const int iy = oy * factor + dy;
          if (iy >= in.height) break;
          for (int dx = 0; dx < factor; ++dx) {
            const int ix = ox * factor + dx;
            if (ix >= in.width) break;
            const T v = in.at(iy, ix, c);
            if (v > best) {
              second = best;
              best = v;
              best_idx = static_cast<std::int32_t>(in.idx(iy, ix, c));
            } else if (v > second) {
              second = v;
            }
          }
        }
        out.at(oy, ox, c) = apply_activation(act, best);
        argmax[out.idx(oy, ox, c)] = best_idx;
        // A window whose max is 0 (ReLU zeros tying the padding) is locally
        // flat, not a kink; only positive runners-up can overtake.
        if (min_margin && best > T(0) && second > std::numeric_limits<T>::lowest())
          margin = std::min(margin, static_cast<double>(best) - static_cast<double>(second));
      }
    }
  }
  if (min_margin) *min_margin = margin;
}

template <typename T>
void maxpool_backward(const Tensor3<T>& dz, const std::vector<std::int32_t>& argmax,
                      Tensor3<T>& din) {
  std::fill(din.values.begin(), din.values.end(), T(0));
  // Distinct output cells map to distinct input cells, so the scatter is safe.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(dz.size()); ++i) {
    const std::int32_t src = argmax[static_cast<std::size_t>(i)];
    if (src >= 0) din.values[static_cast<std::size_t>(src)] = dz.values[static_cast<std::size_t>(i)];
  }
}

template <typename T>
void upsample_forward(const Tensor3<T>& in, int factor, Activation act, Tensor3<T>& out) {
  const int C = in.channels;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int y = 0; y < out.height; ++y) {
    const int iy = y / factor;
    for (int x = 0; x < out.width; ++x) {
      const T* src = in.row(iy, x / factor);
      T* dst = out.row(y, x);
      for (int c = 0; c < C; ++c) dst[c] = apply_activation(act, src[c]);
    }
  }
}

template <typename T>
void upsample_backward(const Tensor3<T>& dz, int factor, Tensor3<T>& din) {
  const int C = din.channels;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int y = 0; y < din.height; ++y) {
    for (int x = 0; x < din.width; ++x) {
      T* acc = din.row(y, x);
      for (int c = 0; c < C; ++c) acc[c] = T(0);
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          const T* src = dz.row(y * factor + dy, x * factor + dx);
          for (int c = 0; c < C; ++c) acc[c] += src[c];
        }
    }
  }
}

template <typename T>
void dense_forward(const Tensor3<T>& in, const NamedTensor<T>& kernel,
                   const NamedTensor<T>& bias, Activation act, Tensor3<T>& out,
                   Tensor3<T>* preact) {
  const std::size_t N = in.size();
  const int units = static_cast<int>(kernel.dims[0]);
  const T* xv = in.values.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int o = 0; o < units; ++o) {
    const T* wrow = kernel.values.data() + static_cast<std::size_t>(o) * N;
    T sum = bias.values[o];
    for (std::size_t i = 0; i < N; ++i) sum += wrow[i] * xv[i];
    if (preact) preact->values[o] = sum;
    out.values[o] = apply_activation(act, sum);
  }
}

template <typename T>
void dense_backward(const Tensor3<T>& in, const NamedTensor<T>& kernel,
                    const Tensor3<T>& dz, NamedTensor<T>& dkernel,
                    NamedTensor<T>& dbias, Tensor3<T>* din) {
  const std::size_t N = in.size();
  const int units = static_cast<int>(kernel.dims[0]);
  const T* xv = in.values.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int o = 0; o < units; ++o) {
    const T g = dz.values[o];
    dbias.values[o] = g;
    T* dwrow = dkernel.values.data() + static_cast<std::size_t>(o) * N;
    for (std::size_t i = 0; i < N; ++i) dwrow[i] = g * xv[i];
  }
  if (!din) return;
  T* dx = din->values.data();
  std::fill(dx, dx + N, T(0));
  for (int o = 0; o < units; ++o) {
    const T g = dz.values[o];
    if (g == T(0)) continue;
    const T* wrow = kernel.values.data() + static_cast<std::size_t>(o) * N;
    for (std::size_t i = 0; i < N; ++i) dx[i] += g * wrow[i];
  }
}

// Tensor indices of a layer's kernel/bias inside the WeightStore, or -1.
inline std::vector<int> layer_tensor_index(const NetworkSpec& net) {
  std::vector<int> index(net.layers.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::conv2d || net.layers[i].kind == LayerKind::dense) {
      index[i] = next;
      next += 2;
    }
  return index;
}

}  // namespace detail

template <typename T>
struct ForwardOptions {
  bool record_preact = false;
};

// Runs the network on x, filling `cache` for a later backward() call.
template <typename T>
Tensor3<T> forward(const NetworkSpec& net, const WeightStore<T>& w, const Tensor3<T>& x,
                   ForwardCache<T>& cache, ForwardOptions<T> opts = {}) {
  const std::vector<Shape> chain = shape_chain(net);
  if (x.shape() != net.input_shape)
    throw std::invalid_argument("forward: input shape " + x.shape().str() +
                                " does not match network input " +
                                net.input_shape.str());
  const std::vector<int> tensor_index = detail::layer_tensor_index(net);

  cache.spec_fp = spec_fingerprint(net);
  cache.weights_revision = w.revision;
  cache.input = x;
  cache.outputs.clear();
  cache.outputs.reserve(net.layers.size());
  cache.pool_argmax.assign(net.layers.size(), {});
  cache.record_preact = opts.record_preact;
  cache.preacts.clear();
  if (opts.record_preact) cache.preacts.resize(net.layers.size());
  cache.pool_margins.assign(net.layers.size(),
                            std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const Tensor3<T>& in = cache.layer_input(i);
    Tensor3<T> out(chain[i + 1].height, chain[i + 1].width, chain[i + 1].channels);
    Tensor3<T>* preact = nullptr;
    if (opts.record_preact &&
        (l.kind == LayerKind::conv2d || l.kind == LayerKind::dense)) {
      cache.preacts[i] = Tensor3<T>(out.height, out.width, out.channels);
      preact = &cache.preacts[i];
    }
    switch (l.kind) {
      case LayerKind::conv2d: {
        const NamedTensor<T>& kernel = w.tensors[tensor_index[i]];
        const NamedTensor<T>& bias = w.tensors[tensor_index[i] + 1];
        if (static_cast<int>(kernel.dims[3]) != in.channels)
          detail::layer_error(i, "kernel expects " + std::to_string(kernel.dims[3]) +
                                     " input channels, got " +
                                     std::to_string(in.channels));
        detail::conv2d_forward(in, kernel, bias, l.activation, out, preact);
        break;
      }
      case LayerKind::maxpool2d:
        detail::maxpool_forward(in, l.pool_factor, l.activation, out,
                                cache.pool_argmax[i],
                                opts.record_preact ? &cache.pool_margins[i] : nullptr);
        break;
      case LayerKind::upsample2d:
        detail::upsample_forward(in, l.pool_factor, l.activation, out);
        break;
      case LayerKind::dense: {
        const NamedTensor<T>& kernel = w.tensors[tensor_index[i]];
        const NamedTensor<T>& bias = w.tensors[tensor_index[i] + 1];
        if (kernel.dims[1] != in.size())
          detail::layer_error(i, "dense kernel expects " + std::to_string(kernel.dims[1]) +
                                     " inputs, got " + std::to_string(in.size()));
        detail::dense_forward(in, kernel, bias, l.activation, out, preact);
        break;
      }
    }
    cache.outputs.push_back(std::move(out));
  }
  return cache.outputs.empty() ? x : cache.outputs.back();
}

template <typename T>
Tensor3<T> forward(const NetworkSpec& net, const WeightStore<T>& w, const Tensor3<T>& x) {
  ForwardCache<T> cache;
  return forward(net, w, x, cache);
}

template <typename T>
struct BackwardResult {
  WeightStore<T> grads;
  Tensor3<T> input_grad;  // empty when skipped via options
};

struct BackwardOptions {
  bool input_grad = true;  // the first layer's input gradient is often unused
};

// Exact gradients of a scalar loss given dLoss/dOutput. The cache must come
// from a forward() call with the same spec and weight revision.
template <typename T>
BackwardResult<T> backward(const NetworkSpec& net, const WeightStore<T>& w,
                           const ForwardCache<T>& cache, const Tensor3<T>& dout,
                           BackwardOptions opts = {}) {
  if (cache.spec_fp != spec_fingerprint(net))
    throw std::invalid_argument("backward: cache was produced by a different network");
  if (cache.weights_revision != w.revision)
    throw std::invalid_argument("backward: stale cache (weights were updated after forward)");
  if (cache.outputs.size() != net.layers.size())
    throw std::invalid_argument("backward: incomplete cache");
  const Shape out_shape = cache.outputs.empty() ? cache.input.shape()
                                                : cache.outputs.back().shape();
  if (dout.shape() != out_shape)
    throw std::invalid_argument("backward: output gradient shape " + dout.shape().str() +
                                " does not match network output " + out_shape.str());

  const std::vector<int> tensor_index = detail::layer_tensor_index(net);
  BackwardResult<T> result;
  result.grads = make_weights<T>(net);

  Tensor3<T> dcur = dout;
  for (std::size_t ri = net.layers.size(); ri-- > 0;) {
    const LayerSpec& l = net.layers[ri];
    const Tensor3<T>& in = cache.layer_input(ri);
    const Tensor3<T>& out = cache.outputs[ri];

    // Through the activation: dZ = dOut ⊙ act'(out).
    if (l.activation != Activation::none) {
      T* dv = dcur.values.data();
      const T* ov = out.values.data();
      const std::size_t n = dcur.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
        dv[i] *= activation_derivative_from_output(l.activation, ov[i]);
    }

    const bool need_din = ri > 0 || opts.input_grad;
    Tensor3<T> din;
    if (need_din) din = Tensor3<T>(in.height, in.width, in.channels);
    switch (l.kind) {
      case LayerKind::conv2d:
        detail::conv2d_backward(in, w.tensors[tensor_index[ri]], dcur,
                                result.grads.tensors[tensor_index[ri]],
                                result.grads.tensors[tensor_index[ri] + 1],
                                need_din ? &din : nullptr);
        break;
      case LayerKind::maxpool2d:
        if (need_din) detail::maxpool_backward(dcur, cache.pool_argmax[ri], din);
        break;
      case LayerKind::upsample2d:
        if (need_din) detail::upsample_backward(dcur, l.pool_factor, din);
        break;
      case LayerKind::dense:
        detail::dense_backward(in, w.tensors[tensor_index[ri]], dcur,
                               result.grads.tensors[tensor_index[ri]],
                               result.grads.tensors[tensor_index[ri] + 1],
                               need_din ? &din : nullptr);
        break;
    }
    dcur = std::move(din);
  }
  result.input_grad = std::move(dcur);
  return result;
}

}  // namespace abm
