#pragma once

#include <cstdint>
#include <string>

namespace ham {

// Cross-attention aligner hyperparameters.
struct AlignerConfig {
  int n_blocks = 2;
  int resnet_blocks = 1;
  int conv_layers = 2;
  int conv_kernel = 3;
  int heads = 4;
  int hidden = 64;
  double dropout = 0.1;
};

// Model architecture and toy data-space settings. The desk preset keeps every
// width small enough to train end-to-end on a laptop CPU in minutes; the
// paper-s and paper-l presets record reference full-scale sizes and are
// untested at full width.
struct ModelConfig {
  std::string preset = "desk";

  // Vocabulary and data space. The last phoneme id is reserved as the
  // end-of-text marker used by the phoneme prediction head.
  int phoneme_vocab = 44;
  int feature_dim = 16;
  int frames_per_phoneme = 3;
  int kmeans_k = 64;

  // Shared text embedding width and codec LM width.
  int embedding_dim = 64;
  int d_model = 64;
  int ffn_dim = 256;
  int n_ar_blocks = 2;
  int n_nar_blocks = 2;
  int heads = 4;
  double dropout = 0.1;
  int max_positions = 512;

  // Latent prosody vector width and predictor settings.
  int lvs_dim = 2;
  int predictor_conv_layers = 2;
  int predictor_kernel = 3;
  double predictor_dropout = 0.1;

  AlignerConfig aligner;

  // Acoustic token space.
  int quantizers = 8;
  int codebook_size = 1024;

  // Toy feature synthesis. base/speaker/noise scales control the separation
  // between phoneme clusters, speaker offsets, and per-frame jitter.
  std::uint64_t feature_space_seed = 0xFEA7;
  double feature_base_scale = 6.0;
  double feature_speaker_scale = 0.5;
  double feature_noise_scale = 0.05;

  // Toy residual codec.
  std::uint64_t codec_seed = 0xC0DEC;
  double codec_sigma = 6.0;

  // Voice conversion generator.
  int vc_speaker_dim = 8;
  int vc_freq_bins = 8;
  std::uint64_t vc_seed = 0x7C;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Optimization settings.
struct TrainConfig {
  std::string preset = "desk";
  std::int64_t steps = 2000;
  int batch_size = 8;
  double base_lr = 1e-3;
  std::int64_t warmup_steps = 100;
  std::int64_t total_steps = 2000;
  std::uint64_t seed = 1234;
  double augment_p = 0.1;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Mixing ratio applied when synthetic speech is folded into training data:
// ten synthetic samples for every three real ones.
struct SyntheticMix {
  int synthetic = 10;
  int real = 3;
};

constexpr SyntheticMix kSyntheticMix{};

// Named presets: "desk" (default, toy scale), "paper-s" and "paper-l"
// (reference full-scale sizes, untested at full width).
ModelConfig model_preset(const std::string& name);
TrainConfig train_preset(const std::string& name);

// Throws ConfigError on out-of-range or inconsistent settings.
void validate(const ModelConfig& cfg);
void validate(const TrainConfig& cfg);

}  // namespace ham
