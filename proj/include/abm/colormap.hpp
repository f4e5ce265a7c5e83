#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "abm/plume.hpp"
#include "abm/tensor.hpp"

namespace abm {

using RgbImage = Tensor3<std::uint8_t>;

inline constexpr std::array<std::uint8_t, 3> kWhite = {255, 255, 255};

// Rendering window: pixels span the `decades` orders of magnitude below the
// per-field maximum; anything at or below that floor is background white.
struct ColormapConfig {
  double decades = 6.0;
};

// Analytic rainbow ramp (purple at 0 through green to red at 1):
//   r = clamp(|2u - 0.5|, 0, 1), g = sin(πu), b = cos(πu/2)
// scaled by 255 and rounded half away from zero.
inline std::array<std::uint8_t, 3> colormap_rgb(double u) {
  if (!(u >= 0.0 && u <= 1.0))
    throw std::invalid_argument("colormap_rgb: u must lie in [0,1]");
  const double r = std::clamp(std::abs(2.0 * u - 0.5), 0.0, 1.0);
  const double g = std::sin(std::numbers::pi * u);
  const double b = std::cos(std::numbers::pi * u / 2.0);
  auto byte = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
  return {byte(r), byte(g), byte(b)};
}

// Log-scaled rendering of a deposition field. With floor = max * 10^-decades:
// cells with D > floor map to u = (log10 D - (log10 max - decades)) / decades
// clamped to [0,1]; cells at or below the floor, and zero cells, are white.
inline RgbImage render_image(const DepositionField& f, const ColormapConfig& cm = {}) {
  if (cm.decades <= 0) throw std::invalid_argument("render_image: decades must be positive");
  double dmax = 0;
  for (double v : f.values) dmax = std::max(dmax, v);
  if (dmax <= 0) throw std::invalid_argument("render_image: field has no positive cell");

  const double log_max = std::log10(dmax);
  const double floor_value = dmax * std::pow(10.0, -cm.decades);
  RgbImage img(f.height, f.width, 3);
  for (int r = 0; r < f.height; ++r)
    for (int c = 0; c < f.width; ++c) {
      const double d = f.at(r, c);
      std::array<std::uint8_t, 3> px = kWhite;
      if (d > floor_value) {
        const double u =
            std::clamp((std::log10(d) - (log_max - cm.decades)) / cm.decades, 0.0, 1.0);
        px = colormap_rgb(u);
      }
      img.at(r, c, 0) = px[0];
      img.at(r, c, 1) = px[1];
      img.at(r, c, 2) = px[2];
    }
  return img;
}

inline bool is_white(const RgbImage& img, int r, int c) {
  return img.at(r, c, 0) == 255 && img.at(r, c, 1) == 255 && img.at(r, c, 2) == 255;
}

inline double white_fraction(const RgbImage& img) {
  std::size_t white = 0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) white += is_white(img, r, c);
  return static_cast<double>(white) / (static_cast<double>(img.height) * img.width);
}

}  // namespace abm
