#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "abm/colormap.hpp"
#include "abm/dataset.hpp"
#include "abm/models.hpp"
#include "abm/plume.hpp"
#include "abm/scenario.hpp"

namespace abm {

// Resolved run configuration: the desk-scale profile by default, the paper
// profile (1000x1000, 12000 cases) on request. JSON config files may set any
// subset of keys; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 7;
  int threads = 0;  // 0 = hardware concurrency; 1 = deterministic sequential
  DatasetGridConfig grid;
  ScenarioBounds bounds;
  PlumeParams physics;
  ColormapConfig colormap;
  int dataset_count = 690;
  SplitSpec split;
  AbmConfig model;

  static RunConfig desk() { return {}; }

  static RunConfig paper_scale() {
    RunConfig c;
    c.grid = {1000, 5.0};
    c.dataset_count = 12000;
    c.split = {10530, 1170, 300};
    c.model = AbmConfig::paper_scale();
    return c;
  }

  void validate() const {
    if (grid.side != model.image_side)
      throw std::invalid_argument("config: grid.side must equal model.image_side");
    if (grid.cell_size <= 0) throw std::invalid_argument("config: cell_size must be positive");
    if (dataset_count < 1) throw std::invalid_argument("config: dataset count must be >= 1");
    if (bounds.ws_min < 0.5)
      throw std::invalid_argument("config: ws_min below the 0.5 m/s surrogate lower bound");
    if (bounds.ws_max <= bounds.ws_min || bounds.s_max <= bounds.s_min ||
        bounds.wd_max <= bounds.wd_min)
      throw std::invalid_argument("config: empty sampling box");
    if (physics.sigma0 <= 0 || physics.sigma_growth <= 0 || physics.mass <= 0 ||
        physics.decay <= 0)
      throw std::invalid_argument("config: physics parameters must be positive");
    if (colormap.decades <= 0) throw std::invalid_argument("config: decades must be positive");
    model.validate();
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

}  // namespace detail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  return nlohmann::json{
      {"seed", c.seed},
      {"threads", c.threads},
      {"grid", {{"side", c.grid.side}, {"cell_size_m", c.grid.cell_size}}},
      {"bounds",
       {{"s_min", c.bounds.s_min},
        {"s_max", c.bounds.s_max},
        {"ws_min", c.bounds.ws_min},
        {"ws_max", c.bounds.ws_max},
        {"wd_min", c.bounds.wd_min},
        {"wd_max", c.bounds.wd_max}}},
      {"physics",
       {{"mass", c.physics.mass},
        {"decay", c.physics.decay},
        {"sigma0_m", c.physics.sigma0},
        {"sigma_growth", c.physics.sigma_growth}}},
      {"colormap", {{"decades", c.colormap.decades}}},
      {"dataset",
       {{"count", c.dataset_count},
        {"train", c.split.train},
        {"val", c.split.val},
        {"test", c.split.test}}},
      {"model", abm_config_to_json(c.model)},
  };
}

// Applies a JSON config on top of `base`. Every key is optional; "profile"
// (when present) switches the base before the other keys apply.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("profile")) {
    const std::string profile = j.at("profile").get<std::string>();
    if (profile == "desk")
      c = RunConfig::desk();
    else if (profile == "paper")
      c = RunConfig::paper_scale();
    else
      throw std::invalid_argument("config: unknown profile '" + profile + "'");
  }
  detail::reject_unknown_keys(j,
                              {"profile", "seed", "threads", "grid", "bounds", "physics",
                               "colormap", "dataset", "model"},
                              "top level");
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::reject_unknown_keys(g, {"side", "cell_size_m"}, "grid");
    if (g.contains("side")) c.grid.side = g.at("side").get<int>();
    if (g.contains("cell_size_m")) c.grid.cell_size = g.at("cell_size_m").get<double>();
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    detail::reject_unknown_keys(b, {"s_min", "s_max", "ws_min", "ws_max", "wd_min", "wd_max"},
                                "bounds");
    if (b.contains("s_min")) c.bounds.s_min = b.at("s_min").get<double>();
    if (b.contains("s_max")) c.bounds.s_max = b.at("s_max").get<double>();
    if (b.contains("ws_min")) c.bounds.ws_min = b.at("ws_min").get<double>();
    if (b.contains("ws_max")) c.bounds.ws_max = b.at("ws_max").get<double>();
    if (b.contains("wd_min")) c.bounds.wd_min = b.at("wd_min").get<double>();
    if (b.contains("wd_max")) c.bounds.wd_max = b.at("wd_max").get<double>();
  }
  if (j.contains("physics")) {
    const auto& p = j.at("physics");
    detail::reject_unknown_keys(p, {"mass", "decay", "sigma0_m", "sigma_growth"}, "physics");
    if (p.contains("mass")) c.physics.mass = p.at("mass").get<double>();
    if (p.contains("decay")) c.physics.decay = p.at("decay").get<double>();
    if (p.contains("sigma0_m")) c.physics.sigma0 = p.at("sigma0_m").get<double>();
    if (p.contains("sigma_growth"))
      c.physics.sigma_growth = p.at("sigma_growth").get<double>();
  }
  if (j.contains("colormap")) {
    const auto& cm = j.at("colormap");
    detail::reject_unknown_keys(cm, {"decades"}, "colormap");
    if (cm.contains("decades")) c.colormap.decades = cm.at("decades").get<double>();
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::reject_unknown_keys(d, {"count", "train", "val", "test"}, "dataset");
    if (d.contains("count")) c.dataset_count = d.at("count").get<int>();
    if (d.contains("train")) c.split.train = d.at("train").get<int>();
    if (d.contains("val")) c.split.val = d.at("val").get<int>();
    if (d.contains("test")) c.split.test = d.at("test").get<int>();
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    const nlohmann::json defaults = abm_config_to_json(c.model);
    std::set<std::string> allowed;
    for (const auto& [key, value] : defaults.items()) allowed.insert(key);
    detail::reject_unknown_keys(m, allowed, "model");
    nlohmann::json merged = defaults;
    merged.update(m);
    c.model = abm_config_from_json(merged);
  }
  c.model.seed = c.seed;
  if (!j.contains("model") || !j.at("model").contains("image_side"))
    c.model.image_side = c.grid.side;
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace abm
