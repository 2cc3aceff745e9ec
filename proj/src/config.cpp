#include "ham/config.hpp"

#include <json.hpp>

#include "ham/errors.hpp"

namespace ham {

namespace {

using json = nlohmann::ordered_json;

json aligner_to_json(const AlignerConfig& a) {
  return json{{"n_blocks", a.n_blocks},
              {"resnet_blocks", a.resnet_blocks},
              {"conv_layers", a.conv_layers},
              {"conv_kernel", a.conv_kernel},
              {"heads", a.heads},
              {"hidden", a.hidden},
              {"dropout", a.dropout}};
}

AlignerConfig aligner_from_json(const json& j) {
  AlignerConfig a;
  a.n_blocks = j.at("n_blocks").get<int>();
  a.resnet_blocks = j.at("resnet_blocks").get<int>();
  a.conv_layers = j.at("conv_layers").get<int>();
  a.conv_kernel = j.at("conv_kernel").get<int>();
  a.heads = j.at("heads").get<int>();
  a.hidden = j.at("hidden").get<int>();
  a.dropout = j.at("dropout").get<double>();
  return a;
}

}  // namespace

std::string ModelConfig::to_json() const {
  json j{{"preset", preset},
         {"phoneme_vocab", phoneme_vocab},
         {"feature_dim", feature_dim},
         {"frames_per_phoneme", frames_per_phoneme},
         {"kmeans_k", kmeans_k},
         {"embedding_dim", embedding_dim},
         {"d_model", d_model},
         {"ffn_dim", ffn_dim},
         {"n_ar_blocks", n_ar_blocks},
         {"n_nar_blocks", n_nar_blocks},
         {"heads", heads},
         {"dropout", dropout},
         {"max_positions", max_positions},
         {"lvs_dim", lvs_dim},
         {"predictor_conv_layers", predictor_conv_layers},
         {"predictor_kernel", predictor_kernel},
         {"predictor_dropout", predictor_dropout},
         {"aligner", aligner_to_json(aligner)},
         {"quantizers", quantizers},
         {"codebook_size", codebook_size},
         {"feature_space_seed", feature_space_seed},
         {"feature_base_scale", feature_base_scale},
         {"feature_speaker_scale", feature_speaker_scale},
         {"feature_noise_scale", feature_noise_scale},
         {"codec_seed", codec_seed},
         {"codec_sigma", codec_sigma},
         {"vc_speaker_dim", vc_speaker_dim},
         {"vc_freq_bins", vc_freq_bins},
         {"vc_seed", vc_seed}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  try {
    ModelConfig c;
    c.preset = j.at("preset").get<std::string>();
    c.phoneme_vocab = j.at("phoneme_vocab").get<int>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.frames_per_phoneme = j.at("frames_per_phoneme").get<int>();
    c.kmeans_k = j.at("kmeans_k").get<int>();
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.n_ar_blocks = j.at("n_ar_blocks").get<int>();
    c.n_nar_blocks = j.at("n_nar_blocks").get<int>();
    c.heads = j.at("heads").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.max_positions = j.at("max_positions").get<int>();
    c.lvs_dim = j.at("lvs_dim").get<int>();
    c.predictor_conv_layers = j.at("predictor_conv_layers").get<int>();
    c.predictor_kernel = j.at("predictor_kernel").get<int>();
    c.predictor_dropout = j.at("predictor_dropout").get<double>();
    c.aligner = aligner_from_json(j.at("aligner"));
    c.quantizers = j.at("quantizers").get<int>();
    c.codebook_size = j.at("codebook_size").get<int>();
    c.feature_space_seed = j.at("feature_space_seed").get<std::uint64_t>();
    c.feature_base_scale = j.at("feature_base_scale").get<double>();
    c.feature_speaker_scale = j.at("feature_speaker_scale").get<double>();
    c.feature_noise_scale = j.at("feature_noise_scale").get<double>();
    c.codec_seed = j.at("codec_seed").get<std::uint64_t>();
    c.codec_sigma = j.at("codec_sigma").get<double>();
    c.vc_speaker_dim = j.at("vc_speaker_dim").get<int>();
    c.vc_freq_bins = j.at("vc_freq_bins").get<int>();
    c.vc_seed = j.at("vc_seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

std::string TrainConfig::to_json() const {
  json j{{"preset", preset},
         {"steps", steps},
         {"batch_size", batch_size},
         {"base_lr", base_lr},
         {"warmup_steps", warmup_steps},
         {"total_steps", total_steps},
         {"seed", seed},
         {"augment_p", augment_p}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  try {
    TrainConfig c;
    c.preset = j.at("preset").get<std::string>();
    c.steps = j.at("steps").get<std::int64_t>();
    c.batch_size = j.at("batch_size").get<int>();
    c.base_lr = j.at("base_lr").get<double>();
    c.warmup_steps = j.at("warmup_steps").get<std::int64_t>();
    c.total_steps = j.at("total_steps").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.augment_p = j.at("augment_p").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
}

ModelConfig model_preset(const std::string& name) {
  if (name == "desk") return ModelConfig{};
  if (name == "paper-s" || name == "paper-l") {
    ModelConfig c;
    c.preset = name;
    c.embedding_dim = 1024;
    c.d_model = 1024;
    c.ffn_dim = 4096;
    c.n_ar_blocks = (name == "paper-s") ? 12 : 24;
    c.n_nar_blocks = c.n_ar_blocks;
    c.heads = 16;
    c.max_positions = 4096;
    c.aligner.n_blocks = 10;
    c.aligner.resnet_blocks = 3;
    c.aligner.conv_layers = 2;
    c.aligner.conv_kernel = 3;
    c.aligner.heads = 8;
    c.aligner.hidden = 4096;
    c.kmeans_k = 1024;
    return c;
  }
  throw ConfigError("unknown model preset: " + name);
}

TrainConfig train_preset(const std::string& name) {
  if (name == "desk") return TrainConfig{};
  if (name == "paper-s" || name == "paper-l") {
    TrainConfig c;
    c.preset = name;
    c.steps = 400000;
    c.total_steps = 400000;
    c.warmup_steps = 15000;
    c.base_lr = 0.03;
    return c;
  }
  throw ConfigError("unknown train preset: " + name);
}

void validate(const ModelConfig& cfg) {
  auto positive = [](int v, const char* what) {
    if (v <= 0) {
      throw ConfigError(std::string(what) + " must be positive, got " +
                        std::to_string(v));
    }
  };
  positive(cfg.phoneme_vocab, "phoneme_vocab");
  positive(cfg.feature_dim, "feature_dim");
  positive(cfg.frames_per_phoneme, "frames_per_phoneme");
  positive(cfg.kmeans_k, "kmeans_k");
  positive(cfg.embedding_dim, "embedding_dim");
  positive(cfg.d_model, "d_model");
  positive(cfg.ffn_dim, "ffn_dim");
  positive(cfg.n_ar_blocks, "n_ar_blocks");
  positive(cfg.n_nar_blocks, "n_nar_blocks");
  positive(cfg.heads, "heads");
  positive(cfg.max_positions, "max_positions");
  positive(cfg.lvs_dim, "lvs_dim");
  positive(cfg.quantizers, "quantizers");
  positive(cfg.codebook_size, "codebook_size");
  if (cfg.phoneme_vocab < 2) {
    throw ConfigError("phoneme_vocab must leave room for the end-of-text id");
  }
  if (cfg.d_model % cfg.heads != 0) {
    throw ConfigError("d_model " + std::to_string(cfg.d_model) +
                      " not divisible by heads " + std::to_string(cfg.heads));
  }
  if (cfg.aligner.hidden % cfg.aligner.heads != 0) {
    throw ConfigError("aligner hidden " + std::to_string(cfg.aligner.hidden) +
                      " not divisible by heads " + std::to_string(cfg.aligner.heads));
  }
  if (cfg.predictor_kernel % 2 == 0 || cfg.aligner.conv_kernel % 2 == 0) {
    throw ConfigError("convolution kernels must be odd");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0 || cfg.predictor_dropout < 0.0 ||
      cfg.predictor_dropout >= 1.0 || cfg.aligner.dropout < 0.0 ||
      cfg.aligner.dropout >= 1.0) {
    throw ConfigError("dropout rates must lie in [0, 1)");
  }
  if (cfg.vc_freq_bins % 4 != 0) {
    throw ConfigError("vc_freq_bins must be divisible by 4, got " +
                      std::to_string(cfg.vc_freq_bins));
  }
}

void validate(const TrainConfig& cfg) {
  if (cfg.steps <= 0) throw ConfigError("steps must be positive");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (cfg.base_lr <= 0.0) throw ConfigError("base_lr must be positive");
  if (cfg.warmup_steps < 0 || cfg.total_steps < cfg.warmup_steps) {
    throw ConfigError("need 0 <= warmup_steps <= total_steps");
  }
  if (cfg.augment_p < 0.0 || cfg.augment_p > 1.0) {
    throw ConfigError("augment_p must lie in [0, 1], got " +
                      std::to_string(cfg.augment_p));
  }
}

}  // namespace ham
