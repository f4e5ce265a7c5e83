#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "abm/colormap.hpp"
#include "abm/metrics.hpp"

namespace abm {

namespace detail {

// 5x7 bitmap glyphs (one byte per row, low 5 bits used) for chart labels.
inline const std::uint8_t* glyph5x7(char c) {
  static const struct {
    char ch;
    std::uint8_t rows[7];
  } table[] = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0E, 0x11, 0x10, 0x0E, 0x01, 0x11, 0x0E}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
  };
  for (const auto& g : table)
    if (g.ch == c) return g.rows;
  return table[13].rows;  // unknown -> space
}

inline void draw_text(RgbImage& img, int x, int y, const std::string& text,
                      std::array<std::uint8_t, 3> color) {
  for (char raw : text) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    const std::uint8_t* rows = glyph5x7(c);
    for (int ry = 0; ry < 7; ++ry)
      for (int rx = 0; rx < 5; ++rx)
        if (rows[ry] & (1 << (4 - rx))) {
          const int px = x + rx, py = y + ry;
          if (px >= 0 && px < img.width && py >= 0 && py < img.height)
            for (int ch = 0; ch < 3; ++ch) img.at(py, px, ch) = color[ch];
        }
    x += 6;
  }
}

inline void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1,
                      std::array<std::uint8_t, 3> color) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(img.width, x1);
  y1 = std::min(img.height, y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[ch];
}

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace detail

// Bar chart of one metric histogram with the mean marked in red.
inline RgbImage render_histogram(const std::array<int, kHistogramBins>& counts, double range_lo,
                                 double range_hi, double mean_value, const std::string& title) {
  const int width = 440, height = 300;
  const int left = 20, right = 20, top = 34, bottom = 30;
  RgbImage img(height, width, 3);
  std::fill(img.values.begin(), img.values.end(), std::uint8_t{255});

  const std::array<std::uint8_t, 3> black{0, 0, 0};
  const std::array<std::uint8_t, 3> bar{70, 110, 180};
  const std::array<std::uint8_t, 3> red{220, 40, 40};

  detail::draw_text(img, left, 12, title, black);
  const int plot_w = width - left - right;
  const int plot_h = height - top - bottom;
  const int max_count = std::max(1, *std::max_element(counts.begin(), counts.end()));

  for (int b = 0; b < kHistogramBins; ++b) {
    const int x0 = left + b * plot_w / kHistogramBins;
    const int x1 = left + (b + 1) * plot_w / kHistogramBins - 1;
    const int h = counts[b] * plot_h / max_count;
    detail::fill_rect(img, x0, top + plot_h - h, x1, top + plot_h, bar);
  }
  // axes
  detail::fill_rect(img, left, top + plot_h, left + plot_w, top + plot_h + 1, black);
  detail::fill_rect(img, left - 1, top, left, top + plot_h + 1, black);
  // mean marker
  const double rel = std::clamp((mean_value - range_lo) / (range_hi - range_lo), 0.0, 1.0);
  const int mean_x = left + static_cast<int>(rel * plot_w);
  detail::fill_rect(img, mean_x, top, mean_x + 1, top + plot_h, red);
  detail::draw_text(img, std::min(mean_x + 4, width - 60), top + 2,
                    "MEAN " + detail::short_number(mean_value), red);
  // range labels
  detail::draw_text(img, left, height - 18, detail::short_number(range_lo), black);
  const std::string hi = detail::short_number(range_hi);
  detail::draw_text(img, left + plot_w - 6 * static_cast<int>(hi.size()), height - 18, hi,
                    black);
  return img;
}

// Correlation map in [-1, 1] rendered through the rainbow ramp (u = (v+1)/2).
inline RgbImage render_correlation_map(const std::vector<double>& map, int height, int width) {
  if (static_cast<std::size_t>(height) * width != map.size())
    throw std::invalid_argument("render_correlation_map: size mismatch");
  RgbImage img(height, width, 3);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double v = map[static_cast<std::size_t>(r) * width + c];
      const auto px = colormap_rgb(std::clamp((v + 1.0) / 2.0, 0.0, 1.0));
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = px[ch];
    }
  return img;
}

}  // namespace abm
