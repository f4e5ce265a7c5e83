// Tests for the synthetic data pipeline: wind decomposition, Latin hypercube
// sampling, the Gaussian plume surrogate, colormap rendering, the PNG codec,
// and dataset generation.
#include <gtest/gtest.h>

#include <zlib.h>

#include <filesystem>
#include <numeric>

#include "abm/colormap.hpp"
#include "abm/dataset.hpp"
#include "abm/image.hpp"
#include "abm/lhs.hpp"
#include "abm/plume.hpp"
#include "abm/rng.hpp"
#include "abm/scenario.hpp"

using namespace abm;
namespace fs = std::filesystem;

TEST(Wind, ComponentExamples) {
  auto [u1, v1] = wind_components(1, 0);
  EXPECT_NEAR(u1, 1, 1e-9);
  EXPECT_NEAR(v1, 0, 1e-9);
  auto [u2, v2] = wind_components(15, 90);
  EXPECT_NEAR(u2, 0, 1e-9);
  EXPECT_NEAR(v2, 15, 1e-9);
  auto [u3, v3] = wind_components(0.5, 180);
  EXPECT_NEAR(u3, -0.5, 1e-9);
  EXPECT_NEAR(v3, 0, 1e-9);
}

TEST(Wind, SpeedRecoveredFromComponents) {
  CounterRng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double ws = rng.uniform(0.5, 15);
    const double wd = rng.uniform(0, 360);
    const ScenarioInput sc = make_scenario(0, 0, ws, wd);
    EXPECT_NEAR(std::hypot(sc.w_u, sc.w_v), ws, 1e-9);
    const ScenarioInput back = scenario_from_velocity(0, 0, sc.w_u, sc.w_v);
    EXPECT_NEAR(back.w_s, ws, 1e-9);
    double dd = std::fmod(back.w_d - wd, 360.0);
    if (dd > 180) dd -= 360;
    if (dd < -180) dd += 360;
    EXPECT_NEAR(dd, 0, 1e-9);
  }
}

TEST(Wind, NegativeSpeedRejected) { EXPECT_THROW(wind_components(-1, 0), std::invalid_argument); }

TEST(Lhs, SingleSampleInsideBox) {
  const ScenarioBounds b;
  const auto s = lhs_sample(1, b, 3);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_GE(s[0].s_x, b.s_min);
  EXPECT_LE(s[0].s_x, b.s_max);
  EXPECT_GE(s[0].w_s, b.ws_min);
  EXPECT_LE(s[0].w_s, b.ws_max);
  EXPECT_GE(s[0].w_d, b.wd_min);
  EXPECT_LT(s[0].w_d, b.wd_max);
}

TEST(Lhs, StratumOccupancyIsAPermutation) {
  const ScenarioBounds b;
  for (int n : {2, 4, 7, 16, 33, 64}) {
    const auto samples = lhs_sample(n, b, 99);
    const double lo[4] = {b.s_min, b.s_min, b.ws_min, b.wd_min};
    const double hi[4] = {b.s_max, b.s_max, b.ws_max, b.wd_max};
    for (int d = 0; d < 4; ++d) {
      std::vector<int> seen(n, 0);
      for (const auto& sc : samples) {
        const double vals[4] = {sc.s_x, sc.s_y, sc.w_s, sc.w_d};
        const int stratum =
            std::min(n - 1, static_cast<int>((vals[d] - lo[d]) / (hi[d] - lo[d]) * n));
        seen[stratum] += 1;
      }
      for (int k = 0; k < n; ++k) EXPECT_EQ(seen[k], 1) << "n=" << n << " dim=" << d;
    }
  }
}

TEST(Lhs, DeterministicAcrossRuns) {
  const ScenarioBounds b;
  const auto a = lhs_sample(50, b, 1234);
  const auto c = lhs_sample(50, b, 1234);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].s_x, c[i].s_x);
    EXPECT_EQ(a[i].s_y, c[i].s_y);
    EXPECT_EQ(a[i].w_s, c[i].w_s);
    EXPECT_EQ(a[i].w_d, c[i].w_d);
  }
}

TEST(Lhs, ZeroCountRejected) {
  EXPECT_THROW(lhs_sample(0, ScenarioBounds{}, 1), std::invalid_argument);
}

TEST(Plume, CenterlineStrictlyDecreasing) {
  // Source y sits exactly on the row-49 cell centers, so that row is the
  // zero-crosswind centerline; off the centerline the widening Gaussian can
  // transiently grow with s.
  const auto sc = make_scenario(0, 2475, 5, 0);  // wind along +x
  const auto f = simulate_deposition(sc, 100, 100, 50);
  const int row = 49;  // y = 49.5 * 50 = 2475
  double prev = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 100; ++c) {
    const double v = f.at(row, c);
    ASSERT_GT(v, 0.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Plume, UpwindHalfPlaneIsZero) {
  const auto sc = make_scenario(2500, 2500, 5, 0);
  const auto f = simulate_deposition(sc, 50, 50, 100);
  for (int r = 0; r < 50; ++r)
    for (int c = 0; c < 50; ++c) {
      const double x = (c + 0.5) * 100.0;
      if (x < 2500.0) EXPECT_EQ(f.at(r, c), 0.0);
      EXPECT_GE(f.at(r, c), 0.0);
      EXPECT_TRUE(std::isfinite(f.at(r, c)));
    }
}

TEST(Plume, QuarterTurnRotatesTheField) {
  // Source at the domain center: rotating the wind by 90 degrees maps cell
  // (r, c) to its rotated counterpart exactly (cell centers land on cell
  // centers for axis-aligned rotations).
  const int n = 40;
  const double cell = 125;
  const double center = n * cell / 2;
  const auto f0 = simulate_deposition(make_scenario(center, center, 5, 0), n, n, cell);
  const auto f90 = simulate_deposition(make_scenario(center, center, 5, 90), n, n, cell);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      // (x, y) -> (-y, x) about the center: new col = n-1-r, new row = c.
      EXPECT_NEAR(f90.at(c, n - 1 - r), f0.at(r, c), 1e-9);
    }
}

TEST(Plume, DepositedMassApproachesReleaseMass) {
  // Numerical integration oracle: with a short deposition length scale the
  // grid sum must rise toward M (and never exceed it) as the domain grows.
  PlumeParams p;
  p.decay = 0.01;  // length scale w_s/λ = 100 m
  double prev = 0;
  for (int n : {50, 100, 200, 400}) {
    const double cell = 10;
    const double span = n * cell;
    const auto sc = make_scenario(span / 2, span / 2, 1, 45);
    const auto f = simulate_deposition(sc, n, n, cell, p);
    const double mass = f.total_mass();
    // midpoint-rule quadrature can overshoot M by O(cell/length scale)^2
    EXPECT_LE(mass, p.mass * (1 + 1e-3));
    EXPECT_GE(mass, prev - 1e-12);
    prev = mass;
  }
  EXPECT_GT(prev, 0.95 * p.mass);
}

TEST(Plume, InvalidParametersRejected) {
  const auto sc = make_scenario(100, 100, 5, 0);
  PlumeParams bad;
  bad.sigma0 = 0;
  EXPECT_THROW(simulate_deposition(sc, 10, 10, 10, bad), std::invalid_argument);
  bad = PlumeParams{};
  bad.sigma_growth = -1;
  EXPECT_THROW(simulate_deposition(sc, 10, 10, 10, bad), std::invalid_argument);
  const auto calm = make_scenario(100, 100, 0.4, 0);
  EXPECT_THROW(simulate_deposition(calm, 10, 10, 10), std::invalid_argument);
}

TEST(Colormap, AnchorValues) {
  EXPECT_EQ(colormap_rgb(0.0), (std::array<std::uint8_t, 3>{128, 0, 255}));
  EXPECT_EQ(colormap_rgb(1.0), (std::array<std::uint8_t, 3>{255, 0, 0}));
  EXPECT_EQ(colormap_rgb(0.5), (std::array<std::uint8_t, 3>{128, 255, 180}));
}

TEST(Colormap, DomainChecked) {
  EXPECT_THROW(colormap_rgb(-0.01), std::invalid_argument);
  EXPECT_THROW(colormap_rgb(1.01), std::invalid_argument);
}

namespace {
DepositionField make_field(int n, double cell = 10) {
  DepositionField f;
  f.height = f.width = n;
  f.cell_size = cell;
  f.values.assign(static_cast<std::size_t>(n) * n, 0.0);
  return f;
}
}  // namespace

TEST(Render, MaxCellIsRedZeroCellIsWhite) {
  auto f = make_field(3);
  f.at(0, 0) = 4.2;
  f.at(1, 1) = 1e-3;
  const RgbImage img = render_image(f);
  EXPECT_EQ(img.at(0, 0, 0), 255);
  EXPECT_EQ(img.at(0, 0, 1), 0);
  EXPECT_EQ(img.at(0, 0, 2), 0);
  EXPECT_TRUE(is_white(img, 2, 2));
}

TEST(Render, ThreeDecadesBelowMaxIsMidColormap) {
  auto f = make_field(2);
  f.at(0, 0) = 7.0;
  f.at(1, 1) = 7.0e-3;
  const RgbImage img = render_image(f, {6.0});
  const auto mid = colormap_rgb(0.5);
  EXPECT_EQ(img.at(1, 1, 0), mid[0]);
  EXPECT_EQ(img.at(1, 1, 1), mid[1]);
  EXPECT_EQ(img.at(1, 1, 2), mid[2]);
}

TEST(Render, AtOrBelowFloorIsWhite) {
  auto f = make_field(2);
  f.at(0, 0) = 1.0;
  f.at(0, 1) = 1e-6;   // exactly the floor at 6 decades
  f.at(1, 0) = 1e-7;   // below
  f.at(1, 1) = 2e-6;   // just above
  const RgbImage img = render_image(f, {6.0});
  EXPECT_TRUE(is_white(img, 0, 1));
  EXPECT_TRUE(is_white(img, 1, 0));
  EXPECT_FALSE(is_white(img, 1, 1));
}

TEST(Render, AllZeroFieldRejected) {
  auto f = make_field(2);
  EXPECT_THROW(render_image(f), std::invalid_argument);
}

TEST(Render, BlueChannelOrdersWithDeposition) {
  // b = cos(pi u / 2) decreases strictly in u, so sorting cells by deposition
  // must sort the blue channel the other way (1-byte rounding slack).
  CounterRng rng(17);
  auto f = make_field(8);
  for (auto& v : f.values) v = std::pow(10.0, rng.uniform(-5, 0));
  const RgbImage img = render_image(f, {6.0});
  std::vector<int> idx(f.values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return f.values[a] < f.values[b]; });
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const int prev_b = img.values[static_cast<std::size_t>(idx[k - 1]) * 3 + 2];
    const int cur_b = img.values[static_cast<std::size_t>(idx[k]) * 3 + 2];
    EXPECT_LE(cur_b, prev_b + 1);
  }
}

TEST(Png, RoundTripExact) {
  CounterRng rng(21);
  RgbImage img(13, 7, 3);
  for (auto& v : img.values) v = static_cast<std::uint8_t>(rng.index(256));
  const RgbImage back = decode_png(encode_png(img));
  ASSERT_EQ(back.shape(), img.shape());
  EXPECT_EQ(back.values, img.values);
}

TEST(Png, EncodingIsDeterministic) {
  RgbImage img(5, 9, 3);
  CounterRng rng(22);
  for (auto& v : img.values) v = static_cast<std::uint8_t>(rng.index(256));
  EXPECT_EQ(encode_png(img), encode_png(img));
}

TEST(Png, CorruptedDataRejected) {
  RgbImage img(4, 4, 3, 100);
  std::string bytes = encode_png(img);
  EXPECT_THROW(decode_png(bytes.substr(0, bytes.size() / 2)), std::runtime_error);
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_png(bad), std::runtime_error);
}

TEST(Png, DecodesAllFilterTypes) {
  // Hand-built 2x5 image exercising filters 0..4, reconstructed on paper
  // from the PNG filter definitions.
  const int w = 2, h = 5;
  std::string raw;
  auto row = [&raw](unsigned char filter, std::initializer_list<unsigned char> bytes) {
    raw.push_back(static_cast<char>(filter));
    for (unsigned char b : bytes) raw.push_back(static_cast<char>(b));
  };
  row(0, {10, 20, 30, 40, 50, 60});
  row(1, {1, 2, 3, 4, 5, 6});      // Sub:   [1,2,3], [5,7,9]
  row(2, {1, 1, 1, 1, 1, 1});      // Up:    [2,3,4], [6,8,10]
  row(3, {1, 1, 1, 1, 1, 1});      // Avg:   [2,2,3], [5,6,7]  (floor((left+up)/2)+x)
  row(4, {1, 1, 1, 1, 1, 1});      // Paeth: [3,3,4], [6,7,8]

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string compressed(bound, '\0');
  ASSERT_EQ(compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                      reinterpret_cast<const Bytef*>(raw.data()),
                      static_cast<uLong>(raw.size()), 6),
            Z_OK);
  compressed.resize(bound);
  std::string ihdr;
  detail::png_put_u32be(ihdr, w);
  detail::png_put_u32be(ihdr, h);
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);
  std::string png("\x89PNG\r\n\x1a\n", 8);
  detail::png_chunk(png, "IHDR", ihdr);
  detail::png_chunk(png, "IDAT", compressed);
  detail::png_chunk(png, "IEND", "");

  const RgbImage img = decode_png(png);
  const std::vector<std::uint8_t> expected = {
      10, 20, 30, 40, 50, 60,   // row 0
      1,  2,  3,  5,  7,  9,    // row 1 (Sub)
      2,  3,  4,  6,  8,  10,   // row 2 (Up)
      2,  2,  3,  5,  6,  7,    // row 3 (Average)
      3,  3,  4,  6,  7,  8,    // row 4 (Paeth)
  };
  EXPECT_EQ(img.values, expected);
}

TEST(Dataset, ManifestRoundTripAndHeader) {
  std::vector<ManifestRow> rows;
  for (int i = 0; i < 3; ++i) {
    ManifestRow r;
    r.id = i;
    r.scenario = make_scenario(1234.5678901234 + i, 42.1, 3.3, 271.25);
    r.image_path = "images/img_" + std::to_string(i) + ".png";
    rows.push_back(r);
  }
  const std::string csv = manifest_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,s_x,s_y,w_s,w_d,w_u,w_v,image_path");
  const auto back = manifest_from_csv(csv);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].id, rows[i].id);
    EXPECT_EQ(back[i].scenario.s_x, rows[i].scenario.s_x);
    EXPECT_EQ(back[i].scenario.w_u, rows[i].scenario.w_u);
    EXPECT_EQ(back[i].image_path, rows[i].image_path);
  }
}

TEST(Dataset, GenerateCountsAndDeterminism) {
  const fs::path dir_a = fs::temp_directory_path() / "abm_ds_a";
  const fs::path dir_b = fs::temp_directory_path() / "abm_ds_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  const DatasetGridConfig grid{40, 125.0};
  const std::string ma =
      generate_dataset(2, ScenarioBounds{}, grid, PlumeParams{}, ColormapConfig{}, 7, dir_a.string());
  const std::string mb =
      generate_dataset(2, ScenarioBounds{}, grid, PlumeParams{}, ColormapConfig{}, 7, dir_b.string());
  const auto rows = load_manifest(ma);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(read_file(ma), read_file(mb));
  for (const auto& r : rows) {
    const auto img_a = read_file((dir_a / r.image_path).string());
    const auto img_b = read_file((dir_b / r.image_path).string());
    EXPECT_FALSE(img_a.empty());
    EXPECT_EQ(img_a, img_b);
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST(Dataset, SplitIsContiguousAndValidated) {
  const auto s = split_dataset(12, {8, 2, 2});
  EXPECT_EQ(s.train.front(), 0);
  EXPECT_EQ(s.train.back(), 7);
  EXPECT_EQ(s.val.front(), 8);
  EXPECT_EQ(s.test.back(), 11);
  EXPECT_THROW(split_dataset(10, {8, 2, 2}), std::invalid_argument);
  EXPECT_THROW(split_dataset(10, {8, 0, 1}), std::invalid_argument);
}

TEST(Dataset, NormalizationRoundTripIsExact) {
  RgbImage img(1, 256, 3);
  for (int x = 0; x < 256; ++x)
    for (int c = 0; c < 3; ++c) img.at(0, x, c) = static_cast<std::uint8_t>(x);
  const RgbImage back = denormalize_image(normalize_image<float>(img));
  EXPECT_EQ(back.values, img.values);
}
