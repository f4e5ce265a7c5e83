#pragma once

#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "abm/engine.hpp"
#include "abm/image.hpp"
#include "abm/metrics.hpp"
#include "abm/network.hpp"
#include "abm/weights.hpp"

namespace abm {

// Architecture and training hyperparameters of the three-stage model. The
// defaults are the desk-scale profile (200x200 images, 5x5 latent space);
// paper_scale() reproduces the full-scale networks.
struct AbmConfig {
  int image_side = 200;
  std::vector<int> encoder_kernels{32, 16, 8, 4, 3, 1};
  std::vector<int> encoder_kernel_sizes{7, 5, 3, 3, 3, 3};
  std::vector<int> pool_factors{2, 2, 2, 5, 1};
  std::vector<int> decoder_kernels{1, 3, 4, 8, 16, 32, 3};
  std::vector<int> decoder_kernel_sizes{3, 3, 3, 3, 5, 7, 7};
  std::vector<int> upsample_factors{1, 5, 2, 2, 2, 1};
  std::vector<int> corrector_kernels{64, 128, 64, 32, 1};
  std::vector<int> corrector_kernel_sizes{7, 7, 7, 7, 7};
  std::vector<int> bottleneck_hidden{64, 96, 64};

  double learning_rate = 1e-3;
  int autoencoder_batch = 32;
  int autoencoder_epochs = 50;
  int autoencoder_patience = 10;
  int bottleneck_batch = 32;
  int bottleneck_epochs = 1500;
  int bottleneck_patience = 100;
  double bottleneck_l2_alpha = 1e-5;
  int corrector_batch = 32;
  int corrector_epochs = 80;
  int corrector_patience = 12;
  int lr_plateau = 5;  // halve the learning rate after this many flat epochs

  std::uint64_t seed = 7;

  static AbmConfig desk() { return {}; }

  static AbmConfig paper_scale() {
    AbmConfig c;
    c.image_side = 1000;
    c.bottleneck_hidden = {300, 400, 300};
    c.bottleneck_batch = 500;
    return c;
  }

  int pool_product() const {
    return std::accumulate(pool_factors.begin(), pool_factors.end(), 1,
                           std::multiplies<int>());
  }
  int latent_side() const { return image_side / pool_product(); }
  int latent_count() const { return latent_side() * latent_side(); }

  void validate() const {
    if (image_side <= 0) throw std::invalid_argument("config: image_side must be positive");
    const int pools = pool_product();
    if (pools <= 0 || image_side % pools != 0)
      throw std::invalid_argument("config: pool factors must divide image_side (" +
                                  std::to_string(image_side) + " / " + std::to_string(pools) +
                                  ")");
    if (encoder_kernels.size() != encoder_kernel_sizes.size() ||
        encoder_kernels.size() != pool_factors.size() + 1)
      throw std::invalid_argument("config: encoder needs one more conv than pools");
    if (decoder_kernels.size() != decoder_kernel_sizes.size() ||
        decoder_kernels.size() != upsample_factors.size() + 1)
      throw std::invalid_argument("config: decoder needs one more conv than upsamples");
    std::vector<int> mirrored(pool_factors.rbegin(), pool_factors.rend());
    mirrored.push_back(1);
    if (upsample_factors != mirrored)
      throw std::invalid_argument(
          "config: upsample factors must mirror the pool factors in reverse");
    if (decoder_kernels.back() != 3)
      throw std::invalid_argument("config: decoder must emit 3 channels");
    if (corrector_kernels.empty() || corrector_kernels.back() != 1)
      throw std::invalid_argument("config: corrector must emit 1 channel");
    if (corrector_kernels.size() != corrector_kernel_sizes.size())
      throw std::invalid_argument("config: corrector kernel lists misaligned");
    if (bottleneck_hidden.empty())
      throw std::invalid_argument("config: bottleneck needs hidden layers");
    if (learning_rate <= 0) throw std::invalid_argument("config: learning rate must be positive");
    for (int b : {autoencoder_batch, bottleneck_batch, corrector_batch})
      if (b < 1) throw std::invalid_argument("config: batch sizes must be >= 1");
  }
};

// Encoder: conv/max-pool pairs then a final conv, ReLU throughout.
// [S, S, 3] -> [S/prod(pools), S/prod(pools), 1].
inline NetworkSpec build_encoder(const AbmConfig& cfg) {
  cfg.validate();
  NetworkSpec net;
  net.input_shape = {cfg.image_side, cfg.image_side, 3};
  for (std::size_t i = 0; i < cfg.encoder_kernels.size(); ++i) {
    net.layers.push_back(LayerSpec::conv(cfg.encoder_kernels[i], cfg.encoder_kernel_sizes[i],
                                         Activation::relu));
    if (i < cfg.pool_factors.size())
      net.layers.push_back(LayerSpec::maxpool(cfg.pool_factors[i]));
  }
  return net;
}

// Decoder: conv/upsample pairs then a final sigmoid conv back to RGB.
// [l, l, 1] -> [S, S, 3] with values in (0,1).
inline NetworkSpec build_decoder(const AbmConfig& cfg) {
  cfg.validate();
  NetworkSpec net;
  const int latent = cfg.latent_side();
  net.input_shape = {latent, latent, 1};
  for (std::size_t i = 0; i < cfg.decoder_kernels.size(); ++i) {
    const bool last = i + 1 == cfg.decoder_kernels.size();
    net.layers.push_back(LayerSpec::conv(cfg.decoder_kernels[i], cfg.decoder_kernel_sizes[i],
                                         last ? Activation::sigmoid : Activation::relu));
    if (!last) net.layers.push_back(LayerSpec::upsample(cfg.upsample_factors[i]));
  }
  return net;
}

// Overcomplete denoiser on the latent map, all-conv, all-ReLU, shape-preserving.
inline NetworkSpec build_corrector(const AbmConfig& cfg) {
  cfg.validate();
  NetworkSpec net;
  const int latent = cfg.latent_side();
  net.input_shape = {latent, latent, 1};
  for (std::size_t i = 0; i < cfg.corrector_kernels.size(); ++i)
    net.layers.push_back(LayerSpec::conv(cfg.corrector_kernels[i],
                                         cfg.corrector_kernel_sizes[i], Activation::relu));
  return net;
}

// MLP from the 4 standardized scalars to the flattened latent map, sigmoid
// activations on hidden and output layers.
inline NetworkSpec build_bottleneck(const AbmConfig& cfg) {
  cfg.validate();
  NetworkSpec net;
  net.input_shape = {1, 1, 4};
  for (int units : cfg.bottleneck_hidden)
    net.layers.push_back(LayerSpec::dense(units, Activation::sigmoid));
  net.layers.push_back(LayerSpec::dense(cfg.latent_count(), Activation::sigmoid));
  return net;
}

// The three trained stages plus the input standardization fitted on the
// training scalars. Inference on a const TrainedAbm is thread-safe.
struct TrainedAbm {
  AbmConfig cfg;
  Standardizer standardizer;
  WeightStore<float> encoder_w, decoder_w, corrector_w, bottleneck_w;
  bool has_autoencoder = false;
  bool has_bottleneck = false;
  bool has_corrector = false;

  Tensor3f standardized_input(const ScenarioInput& sc) const {
    const auto f = standardizer.apply(sc);
    Tensor3f x(1, 1, 4);
    for (int d = 0; d < 4; ++d) x.values[d] = static_cast<float>(f[d]);
    return x;
  }
};

inline Tensor3f reshape_to_latent(const Tensor3f& flat, int latent_side) {
  if (static_cast<int>(flat.size()) != latent_side * latent_side)
    throw std::invalid_argument("reshape_to_latent: size mismatch");
  Tensor3f out(latent_side, latent_side, 1);
  out.values = flat.values;
  return out;
}

inline Tensor3f flatten_latent(const Tensor3f& latent) {
  Tensor3f out(1, 1, static_cast<int>(latent.size()));
  out.values = latent.values;
  return out;
}

// Full pipeline: standardize -> bottleneck -> latent map -> corrector ->
// decoder -> bytes (x255, round half away from zero).
inline RgbImage abm_predict(const TrainedAbm& model, const ScenarioInput& sc,
                            bool use_corrector = true) {
  if (!model.has_bottleneck) throw std::runtime_error("abm_predict: bottleneck not trained");
  if (use_corrector && !model.has_corrector)
    throw std::runtime_error("abm_predict: corrector not trained");
  if (!model.has_autoencoder) throw std::runtime_error("abm_predict: autoencoder not trained");
  const Tensor3f x = model.standardized_input(sc);
  const Tensor3f flat = forward(build_bottleneck(model.cfg), model.bottleneck_w, x);
  Tensor3f latent = reshape_to_latent(flat, model.cfg.latent_side());
  if (use_corrector)
    latent = forward(build_corrector(model.cfg), model.corrector_w, latent);
  const Tensor3f decoded = forward(build_decoder(model.cfg), model.decoder_w, latent);
  return denormalize_image(decoded);
}

// Encoder+decoder round trip of a [0,1] image (the autoencoder path).
inline RgbImage autoencoder_reconstruct(const TrainedAbm& model, const Tensor3f& image01) {
  if (!model.has_autoencoder)
    throw std::runtime_error("autoencoder_reconstruct: autoencoder not trained");
  const Tensor3f latent = forward(build_encoder(model.cfg), model.encoder_w, image01);
  const Tensor3f decoded = forward(build_decoder(model.cfg), model.decoder_w, latent);
  return denormalize_image(decoded);
}

// ---------------------------------------------------------------------------
// Model container: magic "ABMM" | u32 version | u32 json length | json header
// (config, standardization, trained flags) | embedded ABMW weight stream with
// section-prefixed tensor names (encoder/, decoder/, corrector/, bottleneck/).
// ---------------------------------------------------------------------------

constexpr std::uint32_t kModelFormatVersion = 1;

inline nlohmann::json abm_config_to_json(const AbmConfig& c) {
  return nlohmann::json{
      {"image_side", c.image_side},
      {"encoder_kernels", c.encoder_kernels},
      {"encoder_kernel_sizes", c.encoder_kernel_sizes},
      {"pool_factors", c.pool_factors},
      {"decoder_kernels", c.decoder_kernels},
      {"decoder_kernel_sizes", c.decoder_kernel_sizes},
      {"upsample_factors", c.upsample_factors},
      {"corrector_kernels", c.corrector_kernels},
      {"corrector_kernel_sizes", c.corrector_kernel_sizes},
      {"bottleneck_hidden", c.bottleneck_hidden},
      {"learning_rate", c.learning_rate},
      {"autoencoder_batch", c.autoencoder_batch},
      {"autoencoder_epochs", c.autoencoder_epochs},
      {"autoencoder_patience", c.autoencoder_patience},
      {"bottleneck_batch", c.bottleneck_batch},
      {"bottleneck_epochs", c.bottleneck_epochs},
      {"bottleneck_patience", c.bottleneck_patience},
      {"bottleneck_l2_alpha", c.bottleneck_l2_alpha},
      {"corrector_batch", c.corrector_batch},
      {"corrector_epochs", c.corrector_epochs},
      {"corrector_patience", c.corrector_patience},
      {"lr_plateau", c.lr_plateau},
      {"seed", c.seed},
  };
}

inline AbmConfig abm_config_from_json(const nlohmann::json& j) {
  AbmConfig c;
  c.image_side = j.at("image_side").get<int>();
  c.encoder_kernels = j.at("encoder_kernels").get<std::vector<int>>();
  c.encoder_kernel_sizes = j.at("encoder_kernel_sizes").get<std::vector<int>>();
  c.pool_factors = j.at("pool_factors").get<std::vector<int>>();
  c.decoder_kernels = j.at("decoder_kernels").get<std::vector<int>>();
  c.decoder_kernel_sizes = j.at("decoder_kernel_sizes").get<std::vector<int>>();
  c.upsample_factors = j.at("upsample_factors").get<std::vector<int>>();
  c.corrector_kernels = j.at("corrector_kernels").get<std::vector<int>>();
  c.corrector_kernel_sizes = j.at("corrector_kernel_sizes").get<std::vector<int>>();
  c.bottleneck_hidden = j.at("bottleneck_hidden").get<std::vector<int>>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.autoencoder_batch = j.at("autoencoder_batch").get<int>();
  c.autoencoder_epochs = j.at("autoencoder_epochs").get<int>();
  c.autoencoder_patience = j.at("autoencoder_patience").get<int>();
  c.bottleneck_batch = j.at("bottleneck_batch").get<int>();
  c.bottleneck_epochs = j.at("bottleneck_epochs").get<int>();
  c.bottleneck_patience = j.at("bottleneck_patience").get<int>();
  c.bottleneck_l2_alpha = j.at("bottleneck_l2_alpha").get<double>();
  c.corrector_batch = j.at("corrector_batch").get<int>();
  c.corrector_epochs = j.at("corrector_epochs").get<int>();
  c.corrector_patience = j.at("corrector_patience").get<int>();
  c.lr_plateau = j.at("lr_plateau").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline void save_model(std::ostream& os, const TrainedAbm& model) {
  nlohmann::json header{
      {"config", abm_config_to_json(model.cfg)},
      {"standardizer",
       {{"mean", model.standardizer.mean}, {"std", model.standardizer.std}}},
      {"trained",
       {{"autoencoder", model.has_autoencoder},
        {"bottleneck", model.has_bottleneck},
        {"corrector", model.has_corrector}}},
  };
  const std::string json_bytes = header.dump();

  WeightStore<float> all;
  auto add_section = [&all](const char* prefix, const WeightStore<float>& w) {
    for (const auto& t : w.tensors) {
      auto& nt = all.add(std::string(prefix) + "/" + t.name, t.dims);
      nt.values = t.values;
    }
  };
  add_section("encoder", model.encoder_w);
  add_section("decoder", model.decoder_w);
  add_section("corrector", model.corrector_w);
  add_section("bottleneck", model.bottleneck_w);

  os.write("ABMM", 4);
  detail::put_u32(os, kModelFormatVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(json_bytes.size()));
  os.write(json_bytes.data(), static_cast<std::streamsize>(json_bytes.size()));
  save_weights(os, all);
  if (!os) throw std::runtime_error("model container: write failed");
}

inline TrainedAbm load_model(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "ABMM", 4) != 0)
    throw std::runtime_error("model container: bad magic, not an ABMM file");
  const std::uint32_t version = detail::get_u32(is);
  if (version != kModelFormatVersion)
    throw std::runtime_error("model container: unsupported version " + std::to_string(version));
  const std::uint32_t json_len = detail::get_u32(is);
  std::string json_bytes(json_len, '\0');
  if (!is.read(json_bytes.data(), json_len))
    throw std::runtime_error("model container: truncated header");

  TrainedAbm model;
  const auto header = nlohmann::json::parse(json_bytes);
  model.cfg = abm_config_from_json(header.at("config"));
  model.cfg.validate();
  const auto& st = header.at("standardizer");
  const auto mean = st.at("mean").get<std::vector<double>>();
  const auto stdv = st.at("std").get<std::vector<double>>();
  if (mean.size() != 4 || stdv.size() != 4)
    throw std::runtime_error("model container: bad standardizer");
  std::copy(mean.begin(), mean.end(), model.standardizer.mean.begin());
  std::copy(stdv.begin(), stdv.end(), model.standardizer.std.begin());
  model.has_autoencoder = header.at("trained").at("autoencoder").get<bool>();
  model.has_bottleneck = header.at("trained").at("bottleneck").get<bool>();
  model.has_corrector = header.at("trained").at("corrector").get<bool>();

  const WeightStore<float> all = load_weights<float>(is);
  auto take_section = [&all](const char* prefix) {
    WeightStore<float> w;
    const std::string p = std::string(prefix) + "/";
    for (const auto& t : all.tensors)
      if (t.name.rfind(p, 0) == 0) {
        auto& nt = w.add(t.name.substr(p.size()), t.dims);
        nt.values = t.values;
      }
    return w;
  };
  model.encoder_w = take_section("encoder");
  model.decoder_w = take_section("decoder");
  model.corrector_w = take_section("corrector");
  model.bottleneck_w = take_section("bottleneck");
  return model;
}

inline void save_model_file(const std::string& path, const TrainedAbm& model) {
  std::ostringstream os(std::ios::binary);
  save_model(os, model);
  write_file_atomic(path, os.str());
}

inline TrainedAbm load_model_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return load_model(is);
}

}  // namespace abm
