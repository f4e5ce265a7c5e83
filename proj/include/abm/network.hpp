#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "abm/tensor.hpp"

namespace abm {

enum class LayerKind { conv2d, maxpool2d, upsample2d, dense };
enum class Activation { relu, sigmoid, none };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::upsample2d: return "upsample2d";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::none: return "none";
  }
  return "?";
}

// One layer. Convolutions are stride 1 with zero "same" padding (odd square
// kernels), pooling uses ceil division with zero padding on the right/bottom
// edge, upsampling is nearest-neighbor replication, dense flattens its input.
struct LayerSpec {
  LayerKind kind = LayerKind::conv2d;
  int kernel_count = 0;  // conv/dense
  int kernel_size = 0;   // conv, square
  int pool_factor = 0;   // pool/upsample
  Activation activation = Activation::none;

  static LayerSpec conv(int kernels, int size, Activation act) {
    return {LayerKind::conv2d, kernels, size, 0, act};
  }
  static LayerSpec maxpool(int factor) {
    return {LayerKind::maxpool2d, 0, 0, factor, Activation::none};
  }
  static LayerSpec upsample(int factor) {
    return {LayerKind::upsample2d, 0, 0, factor, Activation::none};
  }
  static LayerSpec dense(int units, Activation act) {
    return {LayerKind::dense, units, 0, 0, act};
  }
};

struct NetworkSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
};

namespace detail {
inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

[[noreturn]] inline void layer_error(std::size_t index, const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(index) + ": " + what);
}
}  // namespace detail

// Shape produced by one layer; throws (with the layer index) on invalid specs.
inline Shape layer_output_shape(const LayerSpec& l, Shape in, std::size_t index) {
  switch (l.kind) {
    case LayerKind::conv2d:
      if (l.kernel_count <= 0) detail::layer_error(index, "conv2d needs kernel_count > 0");
      if (l.kernel_size <= 0 || l.kernel_size % 2 == 0)
        detail::layer_error(index, "conv2d needs an odd kernel_size for even zero padding");
      return {in.height, in.width, l.kernel_count};
    case LayerKind::maxpool2d:
      if (l.pool_factor <= 0) detail::layer_error(index, "maxpool2d needs pool_factor > 0");
      return {detail::ceil_div(in.height, l.pool_factor),
              detail::ceil_div(in.width, l.pool_factor), in.channels};
    case LayerKind::upsample2d:
      if (l.pool_factor <= 0) detail::layer_error(index, "upsample2d needs pool_factor > 0");
      return {in.height * l.pool_factor, in.width * l.pool_factor, in.channels};
    case LayerKind::dense:
      if (l.kernel_count <= 0) detail::layer_error(index, "dense needs kernel_count > 0");
      return {1, 1, l.kernel_count};
  }
  detail::layer_error(index, "unknown layer kind");
}

// Per-layer shape chain: element i is the input of layer i, the last element
// is the network output shape.
inline std::vector<Shape> shape_chain(const NetworkSpec& net) {
  if (net.input_shape.height <= 0 || net.input_shape.width <= 0 ||
      net.input_shape.channels <= 0)
    throw std::invalid_argument("network input shape must be positive, got " +
                                net.input_shape.str());
  std::vector<Shape> chain;
  chain.reserve(net.layers.size() + 1);
  chain.push_back(net.input_shape);
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    chain.push_back(layer_output_shape(net.layers[i], chain.back(), i));
  return chain;
}

inline Shape output_shape(const NetworkSpec& net) { return shape_chain(net).back(); }

// Number of trainable parameters: conv contributes
// kernel_count * (kernel_size^2 * in_channels) + kernel_count, dense
// contributes units * flattened_input + units, pooling and upsampling none.
inline std::int64_t count_params(const NetworkSpec& net) {
  std::vector<Shape> chain = shape_chain(net);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const Shape& in = chain[i];
    if (l.kind == LayerKind::conv2d) {
      total += static_cast<std::int64_t>(l.kernel_count) *
                   (static_cast<std::int64_t>(l.kernel_size) * l.kernel_size *
                    in.channels) +
               l.kernel_count;
    } else if (l.kind == LayerKind::dense) {
      total += static_cast<std::int64_t>(l.kernel_count) *
                   static_cast<std::int64_t>(in.count()) +
               l.kernel_count;
    }
  }
  return total;
}

// Structural fingerprint used to match forward caches to backward calls.
inline std::uint64_t spec_fingerprint(const NetworkSpec& net) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  feed(static_cast<std::uint64_t>(net.input_shape.height));
  feed(static_cast<std::uint64_t>(net.input_shape.width));
  feed(static_cast<std::uint64_t>(net.input_shape.channels));
  for (const LayerSpec& l : net.layers) {
    feed(static_cast<std::uint64_t>(l.kind));
    feed(static_cast<std::uint64_t>(l.kernel_count));
    feed(static_cast<std::uint64_t>(l.kernel_size));
    feed(static_cast<std::uint64_t>(l.pool_factor));
    feed(static_cast<std::uint64_t>(l.activation));
  }
  return h;
}

}  // namespace abm
