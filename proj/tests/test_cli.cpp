// End-to-end tests of the command-line tool on a miniature dataset:
// determinism of gen-data, stage ordering, both wind parameterizations,
// domain validation, and the evaluation artifacts.
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "abm/dataset.hpp"
#include "abm/image.hpp"

using namespace abm;
namespace fs = std::filesystem;

#ifndef ABM_CLI_PATH
#error "ABM_CLI_PATH must be defined by the build"
#endif

namespace {

int run_cli(const std::string& args, std::string* extra_env = nullptr) {
  std::string cmd;
  if (extra_env) cmd += *extra_env + " ";
  cmd += std::string(ABM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 40x40 images, 12 cases, few epochs: exercises the mechanics, not quality.
void write_tiny_config(const fs::path& path) {
  std::ofstream os(path);
  os << R"({
  "grid": {"side": 40, "cell_size_m": 125.0},
  "dataset": {"count": 12, "train": 8, "val": 2, "test": 2},
  "model": {
    "autoencoder_epochs": 3, "autoencoder_patience": 3,
    "bottleneck_epochs": 20, "bottleneck_patience": 20,
    "bottleneck_hidden": [8, 12, 8],
    "corrector_epochs": 3, "corrector_patience": 3
  }
})";
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out[fs::relative(e.path(), root).string()] = read_file(e.path().string());
  return out;
}

}  // namespace

TEST(Cli, GenDataIsByteDeterministic) {
  const auto dir_a = fresh_dir("abm_cli_gen_a");
  const auto dir_b = fresh_dir("abm_cli_gen_b");
  const auto cfg = fresh_dir("abm_cli_gencfg") / "cfg.json";
  write_tiny_config(cfg);
  ASSERT_EQ(run_cli("gen-data --out " + dir_a.string() + " --n 6 --seed 7 --quiet --config " +
                    cfg.string()),
            0);
  ASSERT_EQ(run_cli("gen-data --out " + dir_b.string() + " --n 6 --seed 7 --quiet --config " +
                    cfg.string()),
            0);
  const auto a = tree_bytes(dir_a);
  const auto b = tree_bytes(dir_b);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, bytes] : a) {
    ASSERT_TRUE(b.count(name)) << name;
    EXPECT_EQ(bytes, b.at(name)) << name;
  }
  // 6 images + manifest + config copy
  EXPECT_EQ(load_manifest((dir_a / "manifest.csv").string()).size(), 6u);
  EXPECT_TRUE(fs::exists(dir_a / "config.json"));
}

TEST(Cli, InvalidBoundRejectedWithNonzeroExit) {
  const auto dir = fresh_dir("abm_cli_badbound");
  const auto cfg = dir / "cfg.json";
  {
    std::ofstream os(cfg);
    os << R"({"bounds": {"ws_min": -1.0}})";
  }
  EXPECT_NE(run_cli("gen-data --out " + (dir / "ds").string() + " --n 2 --config " +
                    cfg.string()),
            0);
}

TEST(Cli, UnknownConfigKeyRejected) {
  const auto dir = fresh_dir("abm_cli_badkey");
  const auto cfg = dir / "cfg.json";
  {
    std::ofstream os(cfg);
    os << R"({"gird": {"side": 40}})";
  }
  EXPECT_NE(run_cli("gen-data --out " + (dir / "ds").string() + " --n 2 --config " +
                    cfg.string()),
            0);
}

TEST(Cli, SeedEnvFallback) {
  const auto dir_a = fresh_dir("abm_cli_env_a");
  const auto dir_b = fresh_dir("abm_cli_env_b");
  const auto cfgdir = fresh_dir("abm_cli_envcfg");
  const auto cfg = cfgdir / "cfg.json";
  write_tiny_config(cfg);
  std::string env = "ABM_SEED=9";
  ASSERT_EQ(run_cli("gen-data --out " + dir_a.string() + " --n 3 --quiet --config " +
                        cfg.string(),
                    &env),
            0);
  ASSERT_EQ(run_cli("gen-data --out " + dir_b.string() + " --n 3 --seed 9 --quiet --config " +
                    cfg.string()),
            0);
  EXPECT_EQ(read_file((dir_a / "manifest.csv").string()),
            read_file((dir_b / "manifest.csv").string()));
}

TEST(Cli, TrainCorrectorWithoutPrerequisitesFails) {
  const auto dir = fresh_dir("abm_cli_order");
  const auto cfg = dir / "cfg.json";
  write_tiny_config(cfg);
  ASSERT_EQ(run_cli("gen-data --out " + (dir / "ds").string() + " --seed 5 --quiet --config " +
                    cfg.string()),
            0);
  EXPECT_NE(run_cli("train corrector --manifest " + (dir / "ds/manifest.csv").string() +
                    " --model " + (dir / "model.abmm").string() + " --config " + cfg.string()),
            0);
}

// One shared pipeline for the remaining cases (training is the slow part).
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fresh_dir("abm_cli_pipeline"));
    cfg_ = (*dir_ / "cfg.json").string();
    write_tiny_config(cfg_);
    manifest_ = (*dir_ / "ds/manifest.csv").string();
    model_ = (*dir_ / "model.abmm").string();
    ASSERT_EQ(run_cli("gen-data --out " + (*dir_ / "ds").string() +
                      " --seed 11 --quiet --config " + cfg_),
              0);
    ASSERT_EQ(run_cli("train all --manifest " + manifest_ + " --model " + model_ +
                      " --seed 11 --config " + cfg_),
              0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static fs::path* dir_;
  static std::string cfg_, manifest_, model_;
};

fs::path* CliPipeline::dir_ = nullptr;
std::string CliPipeline::cfg_, CliPipeline::manifest_, CliPipeline::model_;

TEST_F(CliPipeline, TrainAllEmitsModelAndLossLogs) {
  EXPECT_TRUE(fs::exists(model_));
  for (const char* stage : {"autoencoder", "bottleneck", "corrector"}) {
    const fs::path log = *dir_ / ("loss_" + std::string(stage) + ".csv");
    ASSERT_TRUE(fs::exists(log)) << log;
    std::ifstream is(log);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "epoch,train_loss,val_loss,best_val,learning_rate");
    // best-so-far validation column is monotone non-increasing
    double prev_best = std::numeric_limits<double>::infinity();
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string f;
      for (int k = 0; k < 4; ++k) std::getline(ls, f, ',');
      const double best = std::stod(f);
      EXPECT_LE(best, prev_best + 1e-12);
      prev_best = best;
      ++rows;
    }
    EXPECT_GE(rows, 1);
  }
}

TEST_F(CliPipeline, BothWindParameterizationsProduceIdenticalImages) {
  const std::string out_a = (*dir_ / "pred_polar.png").string();
  const std::string out_b = (*dir_ / "pred_cartesian.png").string();
  ASSERT_EQ(run_cli("predict --model " + model_ + " --config " + cfg_ +
                    " --s_x 2000 --s_y 3000 --w_s 1 --w_d 0 --out " + out_a),
            0);
  ASSERT_EQ(run_cli("predict --model " + model_ + " --config " + cfg_ +
                    " --s_x 2000 --s_y 3000 --w_u 1 --w_v 0 --out " + out_b),
            0);
  EXPECT_EQ(read_file(out_a), read_file(out_b));
  const RgbImage img = read_png_file(out_a);
  EXPECT_EQ(img.shape(), (Shape{40, 40, 3}));  // model's configured side
}

TEST_F(CliPipeline, RepeatedPredictionIsByteIdentical) {
  const std::string out_a = (*dir_ / "pred_r1.png").string();
  const std::string out_b = (*dir_ / "pred_r2.png").string();
  const std::string args = "predict --model " + model_ + " --config " + cfg_ +
                           " --s_x 1111 --s_y 2222 --w_s 7 --w_d 211 --out ";
  ASSERT_EQ(run_cli(args + out_a), 0);
  ASSERT_EQ(run_cli(args + out_b), 0);
  EXPECT_EQ(read_file(out_a), read_file(out_b));
}

TEST_F(CliPipeline, OutOfDomainInputRejected) {
  EXPECT_NE(run_cli("predict --model " + model_ + " --config " + cfg_ +
                    " --s_x 9999 --s_y 0 --w_s 1 --w_d 0 --out " +
                    (*dir_ / "bad.png").string()),
            0);
  EXPECT_NE(run_cli("predict --model " + model_ + " --config " + cfg_ +
                    " --s_x 100 --s_y 100 --w_s 1 --out " + (*dir_ / "bad.png").string()),
            0);
}

TEST_F(CliPipeline, EvaluateWritesReportArtifacts) {
  const fs::path report = *dir_ / "report";
  ASSERT_EQ(run_cli("evaluate --model " + model_ + " --manifest " + manifest_ + " --config " +
                    cfg_ + " --out " + report.string() + " --seed 11"),
            0);
  const auto summary = nlohmann::json::parse(read_file((report / "summary.json").string()));
  ASSERT_TRUE(summary.contains("models"));
  EXPECT_EQ(summary["models"].size(), 3u);
  for (const char* name : {"abm", "knn", "reference"})
    EXPECT_TRUE(summary["models"].contains(name));

  // histogram bin counts sum to the test-case count (2 here) per model
  for (const char* name : {"abm", "knn", "reference"})
    for (const char* hist : {"hist_nrmse", "hist_fms", "hist_pr_auc"}) {
      int total = 0;
      for (int v : summary["models"][name][hist]) total += v;
      EXPECT_EQ(total, 2) << name << "/" << hist;
    }

  for (const char* f :
       {"cases.csv", "autoencoder.json", "hist_nrmse_abm.png", "hist_fms_knn.png",
        "hist_pr_auc_reference.png", "correlation_abm.png", "correlation_autoencoder.png"})
    EXPECT_TRUE(fs::exists(report / f)) << f;

  const RgbImage corr = read_png_file((report / "correlation_abm.png").string());
  EXPECT_EQ(corr.shape(), (Shape{40, 40, 3}));
}
