#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "abm/scenario.hpp"

namespace abm {

// Gaussian plume surrogate for the deposition field of a unit release:
//
//   D(s, c) = (M λ / w_s) exp(-λ s / w_s) exp(-c² / 2σ(s)²) / (√(2π) σ(s))
//   σ(s) = σ0 + a·s,  D = 0 upwind (s < 0)
//
// where s is the downwind and c the crosswind distance from the source. The
// double integral over the (s, c) plane equals the released mass M, so grid
// sums converge to M as the domain grows.
struct PlumeParams {
  double mass = 1.0;          // M
  double decay = 2e-4;        // λ, deposition rate [1/s]
  double sigma0 = 20.0;       // σ0, initial crosswind spread [m]
  double sigma_growth = 0.15; // a, spread per meter downwind
};

// Nonnegative H x W grid of surface deposition (mass per area); cell (r, c)
// is centered at x = (c + 0.5) * cell_size, y = (r + 0.5) * cell_size.
struct DepositionField {
  int height = 0;
  int width = 0;
  double cell_size = 25.0;  // meters per cell
  std::vector<double> values;

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  double total_mass() const {
    double sum = 0;
    for (double v : values) sum += v;
    return sum * cell_size * cell_size;
  }
};

inline DepositionField simulate_deposition(const ScenarioInput& sc, int height, int width,
                                           double cell_size,
                                           const PlumeParams& p = {}) {
  if (sc.w_s < 0.5)
    throw std::invalid_argument("simulate_deposition: w_s below the 0.5 m/s lower bound");
  if (p.sigma0 <= 0 || p.sigma_growth <= 0)
    throw std::invalid_argument("simulate_deposition: sigma0 and sigma_growth must be positive");
  if (height <= 0 || width <= 0 || cell_size <= 0)
    throw std::invalid_argument("simulate_deposition: grid must be positive");

  DepositionField f;
  f.height = height;
  f.width = width;
  f.cell_size = cell_size;
  f.values.assign(static_cast<std::size_t>(height) * width, 0.0);

  const double ux = sc.w_u / sc.w_s;
  const double uy = sc.w_v / sc.w_s;
  const double rate = p.decay / sc.w_s;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (int r = 0; r < height; ++r) {
    const double dy = (r + 0.5) * cell_size - sc.s_y;
    for (int c = 0; c < width; ++c) {
      const double dx = (c + 0.5) * cell_size - sc.s_x;
      const double s = dx * ux + dy * uy;
      if (s < 0) continue;
      const double cross = -dx * uy + dy * ux;
      const double sigma = p.sigma0 + p.sigma_growth * s;
      f.at(r, c) = p.mass * rate * std::exp(-rate * s) *
                   std::exp(-cross * cross / (2.0 * sigma * sigma)) * norm / sigma;
    }
  }
  return f;
}

}  // namespace abm
