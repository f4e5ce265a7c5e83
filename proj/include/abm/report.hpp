#pragma once

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "abm/metrics.hpp"

namespace abm {

// Per-case rows, one line per (model, case), doubles at full precision so
// parsing back reproduces the values exactly.
inline std::string report_to_csv(const EvalReport& report) {
  std::string out = "model,case,nrmse,fms,pr_auc\n";
  char buf[128];
  for (const auto& m : report.models)
    for (std::size_t i = 0; i < m.cases.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g,%.17g,%.17g\n", m.name.c_str(), i,
                    m.cases[i].nrmse, m.cases[i].fms, m.cases[i].pr_auc);
      out += buf;
    }
  return out;
}

inline EvalReport report_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) || line != "model,case,nrmse,fms,pr_auc")
    throw std::runtime_error("report: bad or missing CSV header");
  EvalReport report;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string model, case_idx, a, b, c;
    if (!std::getline(ls, model, ',') || !std::getline(ls, case_idx, ',') ||
        !std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw std::runtime_error("report: malformed row: " + line);
    if (report.models.empty() || report.models.back().name != model) {
      ModelEval ev;
      ev.name = model;
      report.models.push_back(ev);
    }
    CaseMetrics m{std::stod(a), std::stod(b), std::stod(c)};
    auto& ev = report.models.back();
    ev.cases.push_back(m);
  }
  // Rebuild the derived fields.
  for (auto& ev : report.models) {
    ev.mean_nrmse = ev.mean_fms = ev.mean_pr_auc = 0;
    ev.hist_nrmse.fill(0);
    ev.hist_fms.fill(0);
    ev.hist_pr_auc.fill(0);
    for (const auto& m : ev.cases) {
      ev.mean_nrmse += m.nrmse;
      ev.mean_fms += m.fms;
      ev.mean_pr_auc += m.pr_auc;
      ev.hist_nrmse[histogram_bin(m.nrmse, 100.0)] += 1;
      ev.hist_fms[histogram_bin(m.fms, 100.0)] += 1;
      ev.hist_pr_auc[histogram_bin(m.pr_auc, 1.0)] += 1;
    }
    const double n = static_cast<double>(ev.cases.size());
    ev.mean_nrmse /= n;
    ev.mean_fms /= n;
    ev.mean_pr_auc /= n;
  }
  return report;
}

inline nlohmann::json report_summary_json(const EvalReport& report) {
  nlohmann::json models = nlohmann::json::object();
  for (const auto& m : report.models) {
    models[m.name] = {
        {"cases", m.cases.size()},
        {"mean_nrmse", m.mean_nrmse},
        {"mean_fms", m.mean_fms},
        {"mean_pr_auc", m.mean_pr_auc},
        {"hist_nrmse", m.hist_nrmse},
        {"hist_fms", m.hist_fms},
        {"hist_pr_auc", m.hist_pr_auc},
    };
  }
  return nlohmann::json{
      {"models", models},
      {"histogram_bins", kHistogramBins},
      {"histogram_ranges",
       {{"nrmse", {0.0, 100.0}}, {"fms", {0.0, 100.0}}, {"pr_auc", {0.0, 1.0}}}},
  };
}

}  // namespace abm
