#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "abm/network.hpp"
#include "abm/rng.hpp"
#include "abm/tensor.hpp"

namespace abm {

template <typename T>
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<T> values;

  std::size_t count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
  }
};

// Ordered collection of named parameter tensors. Convolution kernels are
// stored as [kernel_count, kernel_size, kernel_size, in_channels] with the
// input channel contiguous, dense kernels as [units, inputs]; biases as
// [kernel_count]. `revision` counts optimizer updates so stale forward
// caches can be detected.
template <typename T>
struct WeightStore {
  std::vector<NamedTensor<T>> tensors;
  std::uint64_t revision = 0;

  NamedTensor<T>& add(const std::string& name, std::vector<std::uint32_t> dims) {
    NamedTensor<T> t;
    t.name = name;
    t.dims = std::move(dims);
    t.values.assign(t.count(), T(0));
    tensors.push_back(std::move(t));
    return tensors.back();
  }

  const NamedTensor<T>* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  NamedTensor<T>* find(const std::string& name) {
    for (auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& t : tensors)
      for (const T& v : t.values)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_layout(const WeightStore& o) const {
    if (tensors.size() != o.tensors.size()) return false;
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].name != o.tensors[i].name || tensors[i].dims != o.tensors[i].dims)
        return false;
    return true;
  }

  template <typename U>
  WeightStore<U> cast() const {
    WeightStore<U> out;
    out.revision = revision;
    for (const auto& t : tensors) {
      auto& n = out.add(t.name, t.dims);
      for (std::size_t i = 0; i < t.values.size(); ++i)
        n.values[i] = static_cast<U>(t.values[i]);
    }
    return out;
  }
};

// Parameter tensors for a network, zero-initialized, named layer<i>/kernel
// and layer<i>/bias in layer order.
template <typename T>
WeightStore<T> make_weights(const NetworkSpec& net) {
  std::vector<Shape> chain = shape_chain(net);
  WeightStore<T> w;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const std::string prefix = "layer" + std::to_string(i);
    if (l.kind == LayerKind::conv2d) {
      w.add(prefix + "/kernel",
            {static_cast<std::uint32_t>(l.kernel_count),
             static_cast<std::uint32_t>(l.kernel_size),
             static_cast<std::uint32_t>(l.kernel_size),
             static_cast<std::uint32_t>(chain[i].channels)});
      w.add(prefix + "/bias", {static_cast<std::uint32_t>(l.kernel_count)});
    } else if (l.kind == LayerKind::dense) {
      w.add(prefix + "/kernel",
            {static_cast<std::uint32_t>(l.kernel_count),
             static_cast<std::uint32_t>(chain[i].count())});
      w.add(prefix + "/bias", {static_cast<std::uint32_t>(l.kernel_count)});
    }
  }
  return w;
}

// Glorot-uniform kernels, zero biases. Each tensor draws from its own RNG
// stream so the values do not depend on iteration order.
template <typename T>
WeightStore<T> init_weights(const NetworkSpec& net, std::uint64_t seed) {
  WeightStore<T> w = make_weights<T>(net);
  std::vector<Shape> chain = shape_chain(net);
  std::size_t tensor_ordinal = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind != LayerKind::conv2d && l.kind != LayerKind::dense) continue;
    double fan_in, fan_out;
    if (l.kind == LayerKind::conv2d) {
      fan_in = static_cast<double>(l.kernel_size) * l.kernel_size * chain[i].channels;
      fan_out = static_cast<double>(l.kernel_size) * l.kernel_size * l.kernel_count;
    } else {
      fan_in = static_cast<double>(chain[i].count());
      fan_out = static_cast<double>(l.kernel_count);
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    NamedTensor<T>& kernel = w.tensors[tensor_ordinal];
    CounterRng rng(seed, rng_stream::sub(rng_stream::kWeightInit, tensor_ordinal));
    for (T& v : kernel.values) v = static_cast<T>(rng.uniform(-limit, limit));
    tensor_ordinal += 2;  // skip the bias, which stays zero
  }
  return w;
}

// ---------------------------------------------------------------------------
// WeightStore file format ("ABMW"), all integers little-endian:
//   magic "ABMW" | u32 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u32 dims[rank]
//               | f32 payload
// ---------------------------------------------------------------------------

constexpr std::uint32_t kWeightFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("weight store: truncated file (expected u32)");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

inline float get_f32(std::istream& is) {
  std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

template <typename T>
void save_weights(std::ostream& os, const WeightStore<T>& w) {
  os.write("ABMW", 4);
  detail::put_u32(os, kWeightFormatVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(w.tensors.size()));
  for (const auto& t : w.tensors) {
    detail::put_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) detail::put_u32(os, d);
    for (const T& v : t.values) detail::put_f32(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("weight store: write failed");
}

template <typename T>
WeightStore<T> load_weights(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "ABMW", 4) != 0)
    throw std::runtime_error("weight store: bad magic, not an ABMW file");
  const std::uint32_t version = detail::get_u32(is);
  if (version != kWeightFormatVersion)
    throw std::runtime_error("weight store: unsupported version " +
                             std::to_string(version));
  const std::uint32_t count = detail::get_u32(is);
  WeightStore<T> w;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = detail::get_u32(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw std::runtime_error("weight store: truncated tensor name");
    const std::uint32_t rank = detail::get_u32(is);
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = detail::get_u32(is);
    NamedTensor<T>& t = w.add(name, dims);
    for (T& v : t.values) v = static_cast<T>(detail::get_f32(is));
  }
  return w;
}

template <typename T>
void save_weights_file(const std::string& path, const WeightStore<T>& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  save_weights(os, w);
}

template <typename T>
WeightStore<T> load_weights_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return load_weights<T>(is);
}

}  // namespace abm
