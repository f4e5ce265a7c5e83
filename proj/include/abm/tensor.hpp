#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace abm {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  bool operator==(const Shape& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    return "[" + std::to_string(height) + "," + std::to_string(width) + "," +
           std::to_string(channels) + "]";
  }
};

// Dense H x W x C grid in row-major (height, width, channel) order.
template <typename T>
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> values;

  Tensor3() = default;
  Tensor3(int h, int w, int c, T fill = T(0))
      : height(h), width(w), channels(c) {
    if (h <= 0 || w <= 0 || c <= 0)
      throw std::invalid_argument("Tensor3: dimensions must be positive, got " +
                                  Shape{h, w, c}.str());
    values.assign(static_cast<std::size_t>(h) * w * c, fill);
  }

  Shape shape() const { return {height, width, channels}; }
  std::size_t size() const { return values.size(); }

  std::size_t idx(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int y, int x, int c) { return values[idx(y, x, c)]; }
  const T& at(int y, int x, int c) const { return values[idx(y, x, c)]; }

  T* row(int y, int x) { return values.data() + idx(y, x, 0); }
  const T* row(int y, int x) const { return values.data() + idx(y, x, 0); }

  bool all_finite() const {
    for (const T& v : values)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor3<U> cast() const {
    Tensor3<U> out(height, width, channels);
    for (std::size_t i = 0; i < values.size(); ++i)
      out.values[i] = static_cast<U>(values[i]);
    return out;
  }
};

using Tensor3f = Tensor3<float>;
using Tensor3d = Tensor3<double>;

}  // namespace abm
