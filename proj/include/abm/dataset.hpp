#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "abm/colormap.hpp"
#include "abm/image.hpp"
#include "abm/lhs.hpp"
#include "abm/parallel.hpp"
#include "abm/plume.hpp"
#include "abm/scenario.hpp"

namespace abm {

struct ManifestRow {
  long id = 0;
  ScenarioInput scenario;
  std::string image_path;  // relative to the manifest's directory
};

inline const char* kManifestHeader = "id,s_x,s_y,w_s,w_d,w_u,w_v,image_path";

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string manifest_to_csv(const std::vector<ManifestRow>& rows) {
  std::string out = kManifestHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.id);
    for (double v : {r.scenario.s_x, r.scenario.s_y, r.scenario.w_s, r.scenario.w_d,
                     r.scenario.w_u, r.scenario.w_v}) {
      out += ',';
      out += detail::format_double(v);
    }
    out += ',';
    out += r.image_path;
    out += '\n';
  }
  return out;
}

inline std::vector<ManifestRow> manifest_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader)
    throw std::runtime_error("manifest: bad or missing header");
  std::vector<ManifestRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 8) throw std::runtime_error("manifest: malformed row: " + line);
    ManifestRow r;
    r.id = std::stol(fields[0]);
    r.scenario.s_x = std::stod(fields[1]);
    r.scenario.s_y = std::stod(fields[2]);
    r.scenario.w_s = std::stod(fields[3]);
    r.scenario.w_d = std::stod(fields[4]);
    r.scenario.w_u = std::stod(fields[5]);
    r.scenario.w_v = std::stod(fields[6]);
    r.image_path = fields[7];
    rows.push_back(std::move(r));
  }
  return rows;
}

struct DatasetGridConfig {
  int side = 200;
  double cell_size = 25.0;  // meters; side * cell_size should cover the domain
};

// Renders n Latin-hypercube scenarios to PNGs plus a manifest. Byte-for-byte
// deterministic given the seed. Returns the manifest path.
inline std::string generate_dataset(int n, const ScenarioBounds& bounds,
                                    const DatasetGridConfig& grid, const PlumeParams& physics,
                                    const ColormapConfig& colormap, std::uint64_t seed,
                                    const std::string& out_dir) {
  const auto scenarios = lhs_sample(n, bounds, seed);
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");

  std::vector<ManifestRow> rows(scenarios.size());
  const int chunk = 64;
  std::vector<std::string> encoded(chunk);
  for (int base = 0; base < n; base += chunk) {
    const int count = std::min(chunk, n - base);
    // Rendering is pure per scenario; file writes stay sequential below.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int k = 0; k < count; ++k) {
      const auto field =
          simulate_deposition(scenarios[base + k], grid.side, grid.side, grid.cell_size, physics);
      encoded[k] = encode_png(render_image(field, colormap));
    }
    for (int k = 0; k < count; ++k) {
      const int i = base + k;
      char name[32];
      std::snprintf(name, sizeof(name), "images/img_%06d.png", i);
      write_file_atomic((fs::path(out_dir) / name).string(), encoded[k]);
      rows[i] = {i, scenarios[i], name};
    }
  }

  const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  write_file_atomic(manifest_path, manifest_to_csv(rows));
  return manifest_path;
}

inline std::vector<ManifestRow> load_manifest(const std::string& manifest_path) {
  return manifest_from_csv(read_file(manifest_path));
}

inline RgbImage load_row_image(const std::string& manifest_path, const ManifestRow& row) {
  namespace fs = std::filesystem;
  return read_png_file((fs::path(manifest_path).parent_path() / row.image_path).string());
}

// Contiguous train/validation/test split over the manifest order.
struct SplitSpec {
  int train = 600;
  int val = 60;
  int test = 30;
};

struct DatasetSplit {
  std::vector<int> train, val, test;
};

inline DatasetSplit split_dataset(std::size_t n, const SplitSpec& spec) {
  if (spec.train < 1 || spec.val < 1 || spec.test < 1)
    throw std::invalid_argument("split_dataset: every split needs at least one case");
  if (static_cast<std::size_t>(spec.train) + spec.val + spec.test > n)
    throw std::invalid_argument("split_dataset: split sizes exceed dataset size " +
                                std::to_string(n));
  DatasetSplit s;
  for (int i = 0; i < spec.train; ++i) s.train.push_back(i);
  for (int i = 0; i < spec.val; ++i) s.val.push_back(spec.train + i);
  for (int i = 0; i < spec.test; ++i) s.test.push_back(spec.train + spec.val + i);
  return s;
}

}  // namespace abm
