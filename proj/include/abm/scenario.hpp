#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace abm {

// Release location in meters and wind as speed/direction with the derived
// velocity components w_u = w_s cos(w_d), w_v = w_s sin(w_d), w_d in degrees
// following the mathematical convention.
struct ScenarioInput {
  double s_x = 0;
  double s_y = 0;
  double w_s = 0;
  double w_d = 0;
  double w_u = 0;
  double w_v = 0;
};

inline std::pair<double, double> wind_components(double w_s, double w_d_degrees) {
  if (w_s < 0) throw std::invalid_argument("wind_components: w_s must be >= 0");
  const double rad = w_d_degrees * std::numbers::pi / 180.0;
  return {w_s * std::cos(rad), w_s * std::sin(rad)};
}

inline ScenarioInput make_scenario(double s_x, double s_y, double w_s, double w_d) {
  ScenarioInput sc;
  sc.s_x = s_x;
  sc.s_y = s_y;
  sc.w_s = w_s;
  sc.w_d = w_d;
  const auto [u, v] = wind_components(w_s, w_d);
  sc.w_u = u;
  sc.w_v = v;
  return sc;
}

inline ScenarioInput scenario_from_velocity(double s_x, double s_y, double w_u, double w_v) {
  ScenarioInput sc;
  sc.s_x = s_x;
  sc.s_y = s_y;
  sc.w_u = w_u;
  sc.w_v = w_v;
  sc.w_s = std::hypot(w_u, w_v);
  double deg = std::atan2(w_v, w_u) * 180.0 / std::numbers::pi;
  if (deg < 0) deg += 360.0;
  sc.w_d = deg;
  return sc;
}

// Sampling box for (s_x, s_y, w_s, w_d).
struct ScenarioBounds {
  double s_min = 0.0;
  double s_max = 5000.0;
  double ws_min = 0.5;
  double ws_max = 15.0;
  double wd_min = 0.0;
  double wd_max = 360.0;
};

// First violated bound as "name=value outside [lo, hi]", or nothing.
inline std::optional<std::string> violated_bound(const ScenarioInput& sc,
                                                 const ScenarioBounds& b) {
  auto msg = [](const char* name, double v, double lo, double hi) {
    return std::string(name) + "=" + std::to_string(v) + " outside [" +
           std::to_string(lo) + ", " + std::to_string(hi) + "]";
  };
  if (sc.s_x < b.s_min || sc.s_x > b.s_max) return msg("s_x", sc.s_x, b.s_min, b.s_max);
  if (sc.s_y < b.s_min || sc.s_y > b.s_max) return msg("s_y", sc.s_y, b.s_min, b.s_max);
  if (sc.w_s < b.ws_min || sc.w_s > b.ws_max) return msg("w_s", sc.w_s, b.ws_min, b.ws_max);
  if (sc.w_d < b.wd_min || sc.w_d >= b.wd_max) return msg("w_d", sc.w_d, b.wd_min, b.wd_max);
  return std::nullopt;
}

}  // namespace abm
