#pragma once

#include <numeric>
#include <stdexcept>
#include <vector>

#include "abm/rng.hpp"
#include "abm/scenario.hpp"

namespace abm {

// Latin hypercube sample over (s_x, s_y, w_s, w_d): every dimension is split
// into n equal strata and each stratum is hit exactly once, with a uniform
// jitter inside the stratum. w_u/w_v are derived per scenario.
inline std::vector<ScenarioInput> lhs_sample(int n, const ScenarioBounds& bounds,
                                             std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("lhs_sample: n must be >= 1");
  CounterRng rng(seed, rng_stream::kLhs);

  const int dims = 4;
  std::vector<std::vector<int>> strata(dims);
  for (auto& p : strata) {
    p.resize(n);
    std::iota(p.begin(), p.end(), 0);
    shuffle(p, rng);
  }
  std::vector<std::vector<double>> unit(dims, std::vector<double>(n));
  for (int d = 0; d < dims; ++d)
    for (int i = 0; i < n; ++i)
      unit[d][i] = (strata[d][i] + rng.next_unit()) / n;

  const double lo[dims] = {bounds.s_min, bounds.s_min, bounds.ws_min, bounds.wd_min};
  const double hi[dims] = {bounds.s_max, bounds.s_max, bounds.ws_max, bounds.wd_max};
  std::vector<ScenarioInput> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i)
    out.push_back(make_scenario(lo[0] + (hi[0] - lo[0]) * unit[0][i],
                                lo[1] + (hi[1] - lo[1]) * unit[1][i],
                                lo[2] + (hi[2] - lo[2]) * unit[2][i],
                                lo[3] + (hi[3] - lo[3]) * unit[3][i]));
  return out;
}

}  // namespace abm
