// Command-line pipeline: synthetic dataset generation, staged training of
// the three-model predictor, single-shot prediction, and the evaluation
// suite with baselines.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "abm/abm.hpp"

namespace fs = std::filesystem;
using namespace abm;

namespace {

struct CommonOpts {
  std::string config_path;
  bool paper_scale = false;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> threads_flag;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file (desk-scale defaults)");
  cmd->add_flag("--paper-scale", opts.paper_scale,
                "Use the full-scale profile (1000x1000, 12000 cases; compute-heavy)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&opts](const std::uint64_t& v) { opts.seed_flag = v; },
      "Random seed (overrides config and ABM_SEED)");
  cmd->add_option_function<int>(
      "--threads", [&opts](const int& v) { opts.threads_flag = v; },
      "Worker threads; 1 = deterministic sequential mode (default: hardware)");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = opts.paper_scale ? RunConfig::paper_scale() : RunConfig::desk();
  bool seed_from_config = false;
  if (!opts.config_path.empty()) {
    auto j = nlohmann::json::parse(read_file(opts.config_path));
    if (opts.paper_scale && !j.contains("profile")) j["profile"] = "paper";
    cfg = run_config_from_json(j);
    seed_from_config = j.contains("seed");
  }
  if (opts.seed_flag) {
    cfg.seed = *opts.seed_flag;
  } else if (!seed_from_config) {
    if (const char* env = std::getenv("ABM_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
  }
  cfg.model.seed = cfg.seed;
  if (opts.threads_flag) cfg.threads = *opts.threads_flag;
  cfg.validate();
  set_threads(cfg.threads);
  return cfg;
}

std::vector<ScenarioInput> manifest_scenarios(const std::vector<ManifestRow>& rows) {
  std::vector<ScenarioInput> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.scenario);
  return out;
}

std::vector<Tensor3f> load_normalized_images(const std::string& manifest_path,
                                             const std::vector<ManifestRow>& rows,
                                             const std::vector<int>& indices) {
  std::vector<Tensor3f> images(rows.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(indices.size()); ++k) {
    const int i = indices[k];
    images[i] = normalize_image(load_row_image(manifest_path, rows[i]));
  }
  return images;
}

std::vector<int> concat_indices(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Encoder latents, flattened, for the bottleneck targets.
std::vector<Tensor3f> encoder_latents(const TrainedAbm& model,
                                      const std::vector<Tensor3f>& images,
                                      const std::vector<int>& indices) {
  const NetworkSpec enc = build_encoder(model.cfg);
  std::vector<Tensor3f> latents(images.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(indices.size()); ++k) {
    const int i = indices[k];
    latents[i] = flatten_latent(forward(enc, model.encoder_w, images[i]));
  }
  return latents;
}

// Bottleneck outputs as latent maps (the corrector's noisy inputs).
std::vector<Tensor3f> bottleneck_latent_maps(const TrainedAbm& model,
                                             const std::vector<ScenarioInput>& scenarios,
                                             const std::vector<int>& indices) {
  const NetworkSpec bot = build_bottleneck(model.cfg);
  std::vector<Tensor3f> maps(scenarios.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(indices.size()); ++k) {
    const int i = indices[k];
    const Tensor3f flat =
        forward(bot, model.bottleneck_w, model.standardized_input(scenarios[i]));
    maps[i] = reshape_to_latent(flat, model.cfg.latent_side());
  }
  return maps;
}

void write_stage_log(const std::string& model_path, const std::string& stage,
                     const std::vector<EpochLog>& log) {
  const fs::path dir = fs::path(model_path).parent_path();
  const fs::path out = dir.empty() ? fs::path("loss_" + stage + ".csv")
                                   : dir / ("loss_" + stage + ".csv");
  write_file_atomic(out.string(), epoch_log_to_csv(log));
}

int cmd_gen_data(const CommonOpts& common, const std::string& out_dir,
                 std::optional<int> n_flag, bool quiet) {
  RunConfig cfg = resolve_config(common);
  if (n_flag) cfg.dataset_count = *n_flag;
  if (cfg.dataset_count < 1) throw std::runtime_error("gen-data: --n must be >= 1");
  fs::create_directories(out_dir);
  const std::string manifest = generate_dataset(cfg.dataset_count, cfg.bounds, cfg.grid,
                                                cfg.physics, cfg.colormap, cfg.seed, out_dir);
  write_file_atomic((fs::path(out_dir) / "config.json").string(),
                    run_config_to_json(cfg).dump(2) + "\n");
  if (!quiet)
    std::cout << "wrote " << cfg.dataset_count << " images, manifest: " << manifest << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& stage,
              const std::string& manifest_path, const std::string& model_path, bool verbose) {
  const RunConfig cfg = resolve_config(common);
  const auto rows = load_manifest(manifest_path);
  const DatasetSplit split = split_dataset(rows.size(), cfg.split);
  const auto scenarios = manifest_scenarios(rows);
  const std::vector<int> train_val = concat_indices(split.train, split.val);

  TrainedAbm model;
  const bool run_auto = stage == "autoencoder" || stage == "all";
  const bool run_bottleneck = stage == "bottleneck" || stage == "all";
  const bool run_corrector = stage == "corrector" || stage == "all";
  if (run_auto) {
    model.cfg = cfg.model;
  } else {
    if (!fs::exists(model_path))
      throw std::runtime_error("train " + stage + ": model file '" + model_path +
                               "' not found; train the earlier stages first");
    model = load_model_file(model_path);
  }
  if (run_bottleneck && !run_auto && !model.has_autoencoder)
    throw std::runtime_error("train bottleneck: autoencoder stage missing from model file");
  if (run_corrector && !run_bottleneck && !model.has_bottleneck)
    throw std::runtime_error("train corrector: bottleneck stage missing from model file");

  const std::vector<Tensor3f> images = load_normalized_images(manifest_path, rows, train_val);

  if (run_auto) {
    auto res = train_autoencoder(images, split.train, split.val, model.cfg, verbose);
    model.encoder_w = std::move(res.encoder_w);
    model.decoder_w = std::move(res.decoder_w);
    model.has_autoencoder = true;
    write_stage_log(model_path, "autoencoder", res.log);
    save_model_file(model_path, model);
  }
  if (run_bottleneck) {
    const auto latents = encoder_latents(model, images, train_val);
    auto res = train_bottleneck(scenarios, latents, split.train, split.val, model.cfg, verbose);
    model.bottleneck_w = std::move(res.weights);
    model.standardizer = res.standardizer;
    model.has_bottleneck = true;
    write_stage_log(model_path, "bottleneck", res.log);
    save_model_file(model_path, model);
  }
  if (run_corrector) {
    const auto clean_flat = encoder_latents(model, images, train_val);
    std::vector<Tensor3f> clean(clean_flat.size());
    for (int i : train_val) clean[i] = reshape_to_latent(clean_flat[i], model.cfg.latent_side());
    const auto noisy = bottleneck_latent_maps(model, scenarios, train_val);
    auto res = train_corrector(noisy, clean, split.train, split.val, model.cfg, verbose);
    model.corrector_w = std::move(res.weights);
    model.has_corrector = true;
    write_stage_log(model_path, "corrector", res.log);
    save_model_file(model_path, model);
  }
  std::cout << "model written: " << model_path << "\n";
  return 0;
}

int cmd_predict(const CommonOpts& common, const std::string& model_path,
                const std::string& out_path, double s_x, double s_y,
                std::optional<double> w_s, std::optional<double> w_d,
                std::optional<double> w_u, std::optional<double> w_v) {
  const RunConfig cfg = resolve_config(common);
  const bool polar = w_s.has_value() || w_d.has_value();
  const bool cartesian = w_u.has_value() || w_v.has_value();
  if (polar == cartesian || (polar && !(w_s && w_d)) || (cartesian && !(w_u && w_v)))
    throw std::runtime_error("predict: give either --w_s with --w_d, or --w_u with --w_v");
  const ScenarioInput sc = polar ? make_scenario(s_x, s_y, *w_s, *w_d)
                                 : scenario_from_velocity(s_x, s_y, *w_u, *w_v);
  if (const auto violation = violated_bound(sc, cfg.bounds))
    throw std::runtime_error("predict: input out of domain: " + *violation);
  const TrainedAbm model = load_model_file(model_path);
  write_png_file(out_path, abm_predict(model, sc));
  std::cout << "prediction written: " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& model_path,
                 const std::string& manifest_path, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(common);
  const TrainedAbm model = load_model_file(model_path);
  const auto rows = load_manifest(manifest_path);
  const DatasetSplit split = split_dataset(rows.size(), cfg.split);
  if (split.test.empty()) throw std::runtime_error("evaluate: empty test split");
  const auto scenarios = manifest_scenarios(rows);

  std::vector<RgbImage> truths(split.test.size());
  std::vector<RgbImage> abm_preds(split.test.size());
  std::vector<RgbImage> autoencoder_preds(split.test.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(split.test.size()); ++k) {
    const int i = split.test[k];
    truths[k] = load_row_image(manifest_path, rows[i]);
    abm_preds[k] = abm_predict(model, scenarios[i]);
    autoencoder_preds[k] = autoencoder_reconstruct(model, normalize_image(truths[k]));
  }

  // Baselines draw from the training images.
  std::vector<ScenarioInput> train_scenarios;
  for (int i : split.train) train_scenarios.push_back(scenarios[i]);
  const Standardizer standardizer = Standardizer::fit(train_scenarios);
  std::vector<RgbImage> knn_preds(split.test.size());
  std::vector<RgbImage> ref_preds(split.test.size());
  CounterRng ref_rng(cfg.seed, rng_stream::kReference);
  for (std::size_t k = 0; k < split.test.size(); ++k) {
    const std::size_t nn = knn_select(scenarios[split.test[k]], train_scenarios, standardizer);
    knn_preds[k] = load_row_image(manifest_path, rows[split.train[nn]]);
    const std::size_t ri = reference_select(split.train.size(), ref_rng);
    ref_preds[k] = load_row_image(manifest_path, rows[split.train[ri]]);
  }

  const EvalReport report =
      evaluate_suite({"abm", "knn", "reference"}, {abm_preds, knn_preds, ref_preds}, truths);
  const EvalReport auto_report = evaluate_suite({"autoencoder"}, {autoencoder_preds}, truths);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  write_file_atomic((out / "cases.csv").string(), report_to_csv(report));
  write_file_atomic((out / "summary.json").string(), report_summary_json(report).dump(2) + "\n");
  write_file_atomic((out / "autoencoder.json").string(),
                    report_summary_json(auto_report).dump(2) + "\n");

  for (const auto& m : report.models) {
    write_png_file((out / ("hist_nrmse_" + m.name + ".png")).string(),
                   render_histogram(m.hist_nrmse, 0, 100, m.mean_nrmse, m.name + " NRMSE %"));
    write_png_file((out / ("hist_fms_" + m.name + ".png")).string(),
                   render_histogram(m.hist_fms, 0, 100, m.mean_fms, m.name + " FMS %"));
    write_png_file((out / ("hist_pr_auc_" + m.name + ".png")).string(),
                   render_histogram(m.hist_pr_auc, 0, 1, m.mean_pr_auc, m.name + " PR-AUC"));
  }
  write_png_file((out / "correlation_abm.png").string(),
                 render_correlation_map(pixel_correlation_map(truths, abm_preds),
                                        truths[0].height, truths[0].width));
  write_png_file((out / "correlation_autoencoder.png").string(),
                 render_correlation_map(pixel_correlation_map(truths, autoencoder_preds),
                                        truths[0].height, truths[0].width));

  for (const auto& m : report.models)
    std::cout << m.name << ": NRMSE " << m.mean_nrmse << "%  FMS " << m.mean_fms
              << "%  PR-AUC " << m.mean_pr_auc << "\n";
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wind-driven deposition image model: data generation, training, "
               "prediction, evaluation"};
  app.require_subcommand(1);

  CommonOpts gen_common, train_common, predict_common, eval_common;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic deposition dataset");
  std::string gen_out = "dataset";
  std::optional<int> gen_n;
  bool gen_quiet = false;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option_function<int>(
      "--n", [&gen_n](const int& v) { gen_n = v; }, "Number of images");
  gen->add_flag("--quiet", gen_quiet, "Suppress progress output");
  add_common(gen, gen_common);

  auto* train = app.add_subcommand("train", "Train model stages");
  std::string train_stage = "all", train_manifest, train_model = "model.abmm";
  bool train_verbose = false;
  train->add_option("stage", train_stage, "autoencoder|bottleneck|corrector|all")
      ->check(CLI::IsMember({"autoencoder", "bottleneck", "corrector", "all"}));
  train->add_option("--manifest", train_manifest, "Dataset manifest CSV")->required();
  train->add_option("--model", train_model, "Model container path");
  train->add_flag("--verbose", train_verbose, "Log per-epoch losses to stderr");
  add_common(train, train_common);

  auto* predict = app.add_subcommand("predict", "Predict one deposition image");
  std::string pr_model, pr_out = "prediction.png";
  double pr_sx = 0, pr_sy = 0;
  std::optional<double> pr_ws, pr_wd, pr_wu, pr_wv;
  predict->add_option("--model", pr_model, "Model container path")->required();
  predict->add_option("--out", pr_out, "Output PNG path");
  predict->add_option("--s_x", pr_sx, "Source x [m]")->required();
  predict->add_option("--s_y", pr_sy, "Source y [m]")->required();
  predict->add_option_function<double>(
      "--w_s", [&pr_ws](const double& v) { pr_ws = v; }, "Wind speed [m/s]");
  predict->add_option_function<double>(
      "--w_d", [&pr_wd](const double& v) { pr_wd = v; }, "Wind direction [deg]");
  predict->add_option_function<double>(
      "--w_u", [&pr_wu](const double& v) { pr_wu = v; }, "Wind x-velocity [m/s]");
  predict->add_option_function<double>(
      "--w_v", [&pr_wv](const double& v) { pr_wv = v; }, "Wind y-velocity [m/s]");
  add_common(predict, predict_common);

  auto* eval = app.add_subcommand("evaluate", "Evaluate a trained model on the test split");
  std::string ev_model, ev_manifest, ev_out = "report";
  eval->add_option("--model", ev_model, "Model container path")->required();
  eval->add_option("--manifest", ev_manifest, "Dataset manifest CSV")->required();
  eval->add_option("--out", ev_out, "Report output directory");
  add_common(eval, eval_common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_common, gen_out, gen_n, gen_quiet);
    if (train->parsed())
      return cmd_train(train_common, train_stage, train_manifest, train_model, train_verbose);
    if (predict->parsed())
      return cmd_predict(predict_common, pr_model, pr_out, pr_sx, pr_sy, pr_ws, pr_wd, pr_wu,
                         pr_wv);
    if (eval->parsed()) return cmd_evaluate(eval_common, ev_model, ev_manifest, ev_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
