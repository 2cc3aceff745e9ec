#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ham/augment.hpp"
#include "ham/checkpoint.hpp"
#include "ham/config.hpp"
#include "ham/dataset.hpp"
#include "ham/errors.hpp"
#include "ham/features.hpp"
#include "ham/gradcheck.hpp"
#include "ham/pipeline.hpp"
#include "ham/rng.hpp"
#include "ham/vc.hpp"

namespace {

using nlohmann::ordered_json;

// Staged option set over a config struct. Every field is exposed both as a
// flag (--model.d_model 32) and as a config-file key (model.d_model=32);
// flags beat config keys, and both beat the preset. build() starts from the
// chosen preset and applies only the values actually given.
template <class ConfigT>
class StagedOptions {
 public:
  bool consume(const CLI::ConfigItem& item) {
    const std::string full = item.fullname();
    for (auto& b : bindings_) {
      if (b.key != full) continue;
      if (item.inputs.size() != 1) {
        throw ham::UsageError("config key " + full + " expects a single value");
      }
      if (b.opt->count() == 0) {  // an explicit flag wins over the file
        b.set_from_text(item.inputs.front());
        b.config_set = true;
      }
      return true;
    }
    return false;
  }

 protected:
  struct Binding {
    std::string key;
    CLI::Option* opt = nullptr;
    std::function<void(const std::string&)> set_from_text;
    std::function<void(ConfigT&)> apply;
    bool config_set = false;
  };

  template <class T>
  void bind_at(CLI::App* app, const std::string& key, T* staged_field,
               std::function<void(ConfigT&, const T&)> write) {
    Binding b;
    b.key = key;
    b.opt = app->add_option("--" + key, *staged_field);
    b.set_from_text = [key, staged_field](const std::string& text) {
      T v{};
      if (!CLI::detail::lexical_cast(text, v)) {
        throw ham::UsageError("config key " + key + ": cannot parse \"" + text + "\"");
      }
      *staged_field = v;
    };
    b.apply = [staged_field, write](ConfigT& c) { write(c, *staged_field); };
    bindings_.push_back(std::move(b));
  }

  template <class T>
  void bind(CLI::App* app, const std::string& key, T ConfigT::*member) {
    bind_at<T>(app, key, &(staged_.*member),
               [member](ConfigT& c, const T& v) { c.*member = v; });
  }

  void finalize(ConfigT& c) const {
    for (const auto& b : bindings_) {
      if (b.opt->count() > 0 || b.config_set) b.apply(c);
    }
  }

  ConfigT staged_;
  std::string preset_ = "desk";
  std::vector<Binding> bindings_;
};

class ModelOptions : public StagedOptions<ham::ModelConfig> {
 public:
  void attach(CLI::App* app) {
    bind_at<std::string>(app, "model.preset", &preset_,
                         [](ham::ModelConfig&, const std::string&) {});
    bind(app, "model.phoneme_vocab", &ham::ModelConfig::phoneme_vocab);
    bind(app, "model.feature_dim", &ham::ModelConfig::feature_dim);
    bind(app, "model.frames_per_phoneme", &ham::ModelConfig::frames_per_phoneme);
    bind(app, "model.kmeans_k", &ham::ModelConfig::kmeans_k);
    bind(app, "model.embedding_dim", &ham::ModelConfig::embedding_dim);
    bind(app, "model.d_model", &ham::ModelConfig::d_model);
    bind(app, "model.ffn_dim", &ham::ModelConfig::ffn_dim);
    bind(app, "model.n_ar_blocks", &ham::ModelConfig::n_ar_blocks);
    bind(app, "model.n_nar_blocks", &ham::ModelConfig::n_nar_blocks);
    bind(app, "model.heads", &ham::ModelConfig::heads);
    bind(app, "model.dropout", &ham::ModelConfig::dropout);
    bind(app, "model.max_positions", &ham::ModelConfig::max_positions);
    bind(app, "model.lvs_dim", &ham::ModelConfig::lvs_dim);
    bind(app, "model.predictor_conv_layers", &ham::ModelConfig::predictor_conv_layers);
    bind(app, "model.predictor_kernel", &ham::ModelConfig::predictor_kernel);
    bind(app, "model.predictor_dropout", &ham::ModelConfig::predictor_dropout);
    bind(app, "model.quantizers", &ham::ModelConfig::quantizers);
    bind(app, "model.codebook_size", &ham::ModelConfig::codebook_size);
    bind(app, "model.feature_space_seed", &ham::ModelConfig::feature_space_seed);
    bind(app, "model.feature_base_scale", &ham::ModelConfig::feature_base_scale);
    bind(app, "model.feature_speaker_scale", &ham::ModelConfig::feature_speaker_scale);
    bind(app, "model.feature_noise_scale", &ham::ModelConfig::feature_noise_scale);
    bind(app, "model.codec_seed", &ham::ModelConfig::codec_seed);
    bind(app, "model.codec_sigma", &ham::ModelConfig::codec_sigma);
    bind(app, "model.vc_speaker_dim", &ham::ModelConfig::vc_speaker_dim);
    bind(app, "model.vc_freq_bins", &ham::ModelConfig::vc_freq_bins);
    bind(app, "model.vc_seed", &ham::ModelConfig::vc_seed);
    bind_aligner(app, "model.aligner.n_blocks", &ham::AlignerConfig::n_blocks);
    bind_aligner(app, "model.aligner.resnet_blocks", &ham::AlignerConfig::resnet_blocks);
    bind_aligner(app, "model.aligner.conv_layers", &ham::AlignerConfig::conv_layers);
    bind_aligner(app, "model.aligner.conv_kernel", &ham::AlignerConfig::conv_kernel);
    bind_aligner(app, "model.aligner.heads", &ham::AlignerConfig::heads);
    bind_aligner(app, "model.aligner.hidden", &ham::AlignerConfig::hidden);
    bind_aligner(app, "model.aligner.dropout", &ham::AlignerConfig::dropout);
  }

  ham::ModelConfig build() const {
    ham::ModelConfig c = ham::model_preset(preset_);
    finalize(c);
    ham::validate(c);
    return c;
  }

 private:
  template <class T>
  void bind_aligner(CLI::App* app, const std::string& key, T ham::AlignerConfig::*member) {
    bind_at<T>(app, key, &(staged_.aligner.*member),
               [member](ham::ModelConfig& c, const T& v) { c.aligner.*member = v; });
  }
};

class TrainOptions : public StagedOptions<ham::TrainConfig> {
 public:
  void attach(CLI::App* app) {
    bind_at<std::string>(app, "train.preset", &preset_,
                         [](ham::TrainConfig&, const std::string&) {});
    bind(app, "train.steps", &ham::TrainConfig::steps);
    bind(app, "train.batch_size", &ham::TrainConfig::batch_size);
    bind(app, "train.base_lr", &ham::TrainConfig::base_lr);
    bind(app, "train.warmup_steps", &ham::TrainConfig::warmup_steps);
    bind(app, "train.total_steps", &ham::TrainConfig::total_steps);
    bind(app, "train.seed", &ham::TrainConfig::seed);
    bind(app, "train.augment_p", &ham::TrainConfig::augment_p);
  }

  ham::TrainConfig build() const {
    ham::TrainConfig c = ham::train_preset(preset_);
    finalize(c);
    ham::validate(c);
    return c;
  }
};

// Reads an INI file and routes every key into the given option sets.
// Unknown keys are rejected so typos never pass silently.
void apply_config_file(const std::string& path, ModelOptions* model,
                       TrainOptions* train) {
  if (path.empty()) return;
  std::ifstream probe(path);
  if (!probe) throw ham::UsageError("cannot open config file " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI{}.from_file(path);
  } catch (const CLI::Error& e) {
    throw ham::UsageError("config file " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const bool used = (model != nullptr && model->consume(item)) ||
                      (train != nullptr && train->consume(item));
    if (!used) throw ham::UsageError("unknown config key: " + item.fullname());
  }
}

// HAM_SEED beats config files and flags alike.
void apply_env_seed(std::uint64_t& seed) {
  const char* raw = std::getenv("HAM_SEED");
  if (raw == nullptr) return;
  const std::string s(raw);
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw ham::UsageError("HAM_SEED must be a non-negative integer, got \"" + s + "\"");
  }
  if (pos != s.size()) {
    throw ham::UsageError("HAM_SEED must be a non-negative integer, got \"" + s + "\"");
  }
  seed = static_cast<std::uint64_t>(v);
}

std::vector<int> parse_phonemes(const std::string& text) {
  std::vector<int> ids;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      throw ham::UsageError("phoneme list must hold integers, got \"" + tok + "\"");
    }
    if (pos != tok.size()) {
      throw ham::UsageError("phoneme list must hold integers, got \"" + tok + "\"");
    }
    ids.push_back(v);
    tok.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      flush();
    } else {
      tok.push_back(c);
    }
  }
  flush();
  if (ids.empty()) throw ham::UsageError("phoneme list is empty");
  return ids;
}

ham::ModelBundle make_bundle(const ham::ModelConfig& cfg, std::uint64_t seed) {
  return ham::ModelBundle(cfg, ham::mix64(seed, 0xB007ull));
}

struct DataSynthCmd {
  ModelOptions model;
  std::string config_path;
  std::string out;
  int samples = 10;
  int speakers = 2;
  int min_phonemes = 8;
  int max_phonemes = 16;
  std::uint64_t seed = 1234;

  int run() {
    apply_config_file(config_path, &model, nullptr);
    apply_env_seed(seed);
    ham::ModelConfig cfg = model.build();
    auto records = ham::data_synth(samples, speakers, seed, cfg, min_phonemes, max_phonemes);
    ham::write_dataset(out, records);
    std::cout << "wrote " << records.size() << " records to " << out << "\n";
    return 0;
  }
};

struct KmeansFitCmd {
  ModelOptions model;
  std::string config_path;
  std::string data;
  std::string out;
  int k = 0;  // 0: model.kmeans_k
  int restarts = 10;
  std::uint64_t seed = 1234;

  int run() {
    apply_config_file(config_path, &model, nullptr);
    apply_env_seed(seed);
    ham::ModelConfig cfg = model.build();
    auto records = ham::read_dataset(data, cfg);
    int rows = 0;
    for (const auto& r : records) rows += r.features.rows();
    ham::Array points({rows, cfg.feature_dim});
    int at = 0;
    for (const auto& r : records) {
      for (int i = 0; i < r.features.rows(); ++i, ++at) {
        for (int j = 0; j < r.features.cols(); ++j) points.at(at, j) = r.features.at(i, j);
      }
    }
    const int kk = k > 0 ? k : cfg.kmeans_k;
    ham::Codebook cb = ham::kmeans_fit(points, kk, restarts, seed);
    ordered_json j{{"k", cb.k()}, {"dim", cb.dim()}, {"inertia", cb.inertia}};
    ordered_json cents = ordered_json::array();
    for (int r = 0; r < cb.centroids.rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < cb.centroids.cols(); ++c) row.push_back(cb.centroids.at(r, c));
      cents.push_back(std::move(row));
    }
    j["centroids"] = std::move(cents);
    std::ofstream f(out);
    if (!f) throw ham::IoError("cannot open " + out + " for writing");
    f << j.dump() << "\n";
    std::cout << "fitted k=" << cb.k() << " on " << rows << " frames, inertia "
              << cb.inertia << ", wrote " << out << "\n";
    return 0;
  }
};

struct TrainCmd {
  ModelOptions model;
  TrainOptions train;
  std::string config_path;
  std::string kind;
  std::string data;
  std::string out;
  std::string init_from;
  std::string log_path;
  std::string synthetic;

  int run() {
    apply_config_file(config_path, &model, &train);
    ham::ModelConfig cfg = model.build();
    ham::TrainConfig tc = train.build();
    apply_env_seed(tc.seed);

    auto records = ham::read_dataset(data, cfg);
    if (!synthetic.empty()) {
      auto syn = ham::read_dataset(synthetic, cfg);
      records = ham::mix_corpus(records, syn);
    }

    ham::ModelBundle bundle = make_bundle(cfg, tc.seed);
    ham::Trainer trainer(bundle, tc, std::move(records));
    if (!init_from.empty()) {
      ham::CheckpointData ckpt = ham::read_checkpoint(init_from);
      ham::restore(bundle, ckpt, nullptr);
      if (ckpt.codebook) trainer.set_codebook(*ckpt.codebook);
    }

    std::ofstream log;
    if (!log_path.empty()) {
      log.open(log_path);
      if (!log) throw ham::IoError("cannot open " + log_path + " for writing");
    }
    const ham::ModelKind mk = kind == "ar" ? ham::ModelKind::ar : ham::ModelKind::nar;
    auto trace = trainer.run(mk, tc.steps, log.is_open() ? &log : nullptr);

    ham::Rng rng(tc.seed);
    ham::CheckpointData snap = ham::snapshot(bundle, tc, &trainer.adam(),
                                             rng.serialize(), &trainer.codebook());
    ham::write_checkpoint(out, snap);
    if (!trace.empty()) {
      std::cout << "step " << trace.front().step << " total " << trace.front().total
                << "\n";
      std::cout << "step " << trace.back().step << " total " << trace.back().total
                << "\n";
    }
    std::cout << "saved checkpoint to " << out << "\n";
    return 0;
  }
};

struct InferCmd {
  std::string config_path;
  std::string checkpoint;
  std::string phonemes_text;
  std::string prompt_data;
  std::string prompt_id;
  std::string out;
  int max_len = 0;
  double temperature = 0.0;
  std::uint64_t seed = 1234;

  int run() {
    apply_config_file(config_path, nullptr, nullptr);
    apply_env_seed(seed);
    ham::CheckpointData ckpt = ham::read_checkpoint(checkpoint);
    ham::ModelConfig cfg = ham::ModelConfig::from_json(ckpt.model_config_json);
    ham::ModelBundle bundle = make_bundle(cfg, seed);
    ham::restore(bundle, ckpt, nullptr);

    std::vector<int> phonemes = parse_phonemes(phonemes_text);
    for (int id : phonemes) {
      if (id < 0 || id >= cfg.phoneme_vocab - 1) {
        throw ham::ValidationError("phoneme id " + std::to_string(id) +
                                   " outside [0, " + std::to_string(cfg.phoneme_vocab - 1) +
                                   ")");
      }
    }

    std::optional<ham::DatasetRecord> prompt;
    if (!prompt_data.empty() || !prompt_id.empty()) {
      if (prompt_data.empty() || prompt_id.empty()) {
        throw ham::UsageError("--prompt-data and --prompt-id must be given together");
      }
      auto records = ham::read_dataset(prompt_data, cfg);
      for (auto& r : records) {
        if (r.id == prompt_id) {
          prompt = std::move(r);
          break;
        }
      }
      if (!prompt) {
        throw ham::ValidationError("no record with id " + prompt_id + " in " + prompt_data);
      }
    }

    ham::SynthesisOptions opts;
    opts.max_len = max_len;
    opts.temperature = temperature;
    opts.seed = seed;
    ham::CodecSequence seq =
        ham::synthesize(bundle, phonemes, prompt ? &*prompt : nullptr, opts);

    ordered_json j{{"phonemes", phonemes}};
    ordered_json tokens = ordered_json::array();
    for (const auto& level : seq.tokens) tokens.push_back(level);
    j["tokens"] = std::move(tokens);
    if (prompt) j["prompt_id"] = prompt->id;
    std::ofstream f(out);
    if (!f) throw ham::IoError("cannot open " + out + " for writing");
    f << j.dump() << "\n";
    std::cout << "generated " << seq.length() << " frames at " << seq.levels()
              << " levels, wrote " << out << "\n";
    return 0;
  }
};

struct AugmentPreviewCmd {
  ModelOptions model;
  std::string config_path;
  std::string data;
  double p = 0.1;
  std::uint64_t seed = 1234;
  int limit = 8;

  int run() {
    apply_config_file(config_path, &model, nullptr);
    apply_env_seed(seed);
    ham::ModelConfig cfg = model.build();
    auto records = ham::read_dataset(data, cfg);
    if (limit > 0 && static_cast<int>(records.size()) > limit) {
      records.resize(static_cast<std::size_t>(limit));
    }
    std::vector<ham::CodecSequence> batch;
    batch.reserve(records.size());
    for (const auto& r : records) batch.push_back(r.codecs);
    auto augmented = ham::augment_batch(batch, p, seed);
    for (std::size_t i = 0; i < augmented.size(); ++i) {
      const auto& a = augmented[i];
      const char* kind = a.kind == ham::AugmentKind::none
                             ? "none"
                             : (a.kind == ham::AugmentKind::replace ? "replace" : "duplicate");
      ordered_json j{{"id", records[i].id},
                     {"kind", kind},
                     {"segment_start", a.segment_start},
                     {"segment_length", a.segment_length},
                     {"input_frames", a.input.length()},
                     {"original_frames", a.original.length()}};
      std::cout << j.dump() << "\n";
    }
    return 0;
  }
};

struct VcRunCmd {
  ModelOptions model;
  std::string config_path;
  std::string data;
  std::string out;
  int speakers = 2;
  std::uint64_t seed = 1234;

  int run() {
    apply_config_file(config_path, &model, nullptr);
    apply_env_seed(seed);
    ham::ModelConfig cfg = model.build();
    auto records = ham::read_dataset(data, cfg);
    auto synthetic = ham::generate_synthetic_corpus(records, speakers, seed, cfg);
    ham::write_dataset(out, synthetic);
    std::cout << "converted " << records.size() << " records with " << speakers
              << " generated speakers, wrote " << synthetic.size() << " records to "
              << out << "\n";
    return 0;
  }
};

struct GradcheckCmd {
  std::string config_path;
  std::uint64_t seed = 20240817;

  int run() {
    apply_config_file(config_path, nullptr, nullptr);
    apply_env_seed(seed);
    ham::GradCheckReport report = ham::run_gradient_suite(seed);
    for (const auto& c : report.cases) {
      if (!c.pass) {
        std::cout << "FAIL " << c.op << " " << c.shape << " rel_err " << c.max_rel_err
                  << "\n";
      }
    }
    std::cout << "gradient checks: " << report.cases.size() << " cases, worst rel err "
              << report.worst() << ", "
              << (report.all_pass() ? "all passed" : "FAILURES above") << "\n";
    return report.all_pass() ? 0 : 2;
  }
};

struct EvaluateCmd {
  std::string config_path;
  std::string checkpoint;
  std::string data;

  int run() {
    apply_config_file(config_path, nullptr, nullptr);
    ham::CheckpointData ckpt = ham::read_checkpoint(checkpoint);
    ham::ModelConfig cfg = ham::ModelConfig::from_json(ckpt.model_config_json);
    if (!ckpt.codebook) {
      throw ham::ConfigError("checkpoint " + checkpoint + " holds no feature codebook");
    }
    ham::ModelBundle bundle = make_bundle(cfg, 0);
    ham::restore(bundle, ckpt, nullptr);
    auto records = ham::read_dataset(data, cfg);
    ham::EvalResult res = ham::evaluate_token_accuracy(bundle, *ckpt.codebook, records);
    ordered_json j{{"q1_accuracy", res.q1_accuracy},
                   {"level_accuracy", res.level_accuracy},
                   {"positions", res.positions}};
    std::cout << j.dump() << "\n";
    return 0;
  }
};

void add_config_flag(CLI::App* sub, std::string& target) {
  sub->add_option("--config", target,
                  "INI configuration file; keys are model.<field> / train.<field>");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical acoustic model toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  auto data_synth = std::make_shared<DataSynthCmd>();
  {
    CLI::App* sub = app.add_subcommand("data-synth", "generate a deterministic toy corpus");
    add_config_flag(sub, data_synth->config_path);
    data_synth->model.attach(sub);
    sub->add_option("--out", data_synth->out, "output dataset path")->required();
    sub->add_option("--samples", data_synth->samples, "number of records");
    sub->add_option("--speakers", data_synth->speakers, "number of speakers");
    sub->add_option("--min-phonemes", data_synth->min_phonemes, "shortest text length");
    sub->add_option("--max-phonemes", data_synth->max_phonemes, "longest text length");
    sub->add_option("--seed", data_synth->seed, "corpus seed");
    sub->callback([data_synth, &rc] { rc = data_synth->run(); });
  }

  auto kmeans = std::make_shared<KmeansFitCmd>();
  {
    CLI::App* sub = app.add_subcommand("kmeans-fit", "fit the feature codebook on a dataset");
    add_config_flag(sub, kmeans->config_path);
    kmeans->model.attach(sub);
    sub->add_option("--data", kmeans->data, "input dataset path")->required();
    sub->add_option("--out", kmeans->out, "output codebook path")->required();
    sub->add_option("--k", kmeans->k, "cluster count (default: model.kmeans_k)");
    sub->add_option("--restarts", kmeans->restarts, "independent restarts");
    sub->add_option("--seed", kmeans->seed, "clustering seed");
    sub->callback([kmeans, &rc] { rc = kmeans->run(); });
  }

  auto train = std::make_shared<TrainCmd>();
  {
    CLI::App* sub = app.add_subcommand("train", "train the AR or NAR codec language model");
    add_config_flag(sub, train->config_path);
    train->model.attach(sub);
    train->train.attach(sub);
    sub->add_option("--model", train->kind, "which codec LM to train")
        ->required()
        ->check(CLI::IsMember({"ar", "nar"}));
    sub->add_option("--data", train->data, "training dataset path")->required();
    sub->add_option("--out", train->out, "output checkpoint path")->required();
    sub->add_option("--init-from", train->init_from,
                    "checkpoint to initialize parameters and codebook from");
    sub->add_option("--log", train->log_path, "step log path (one JSON object per line)");
    sub->add_option("--synthetic", train->synthetic,
                    "synthetic dataset mixed in at the fixed 10:3 ratio");
    sub->callback([train, &rc] { rc = train->run(); });
  }

  auto infer = std::make_shared<InferCmd>();
  {
    CLI::App* sub = app.add_subcommand("infer", "synthesize codec tokens from phonemes");
    add_config_flag(sub, infer->config_path);
    sub->add_option("--checkpoint", infer->checkpoint, "trained checkpoint path")->required();
    sub->add_option("--phonemes", infer->phonemes_text,
                    "phoneme ids, comma or space separated")->required();
    sub->add_option("--out", infer->out, "output token file")->required();
    sub->add_option("--prompt-data", infer->prompt_data, "dataset holding the enrollment record");
    sub->add_option("--prompt-id", infer->prompt_id, "enrollment record id");
    sub->add_option("--max-len", infer->max_len, "generation cap (0: derived from text length)");
    sub->add_option("--temperature", infer->temperature, "sampling temperature (0: greedy)");
    sub->add_option("--seed", infer->seed, "sampling seed");
    sub->callback([infer, &rc] { rc = infer->run(); });
  }

  auto augment = std::make_shared<AugmentPreviewCmd>();
  {
    CLI::App* sub = app.add_subcommand("augment-preview",
                                       "show augmentation decisions on a dataset batch");
    add_config_flag(sub, augment->config_path);
    augment->model.attach(sub);
    sub->add_option("--data", augment->data, "input dataset path")->required();
    sub->add_option("--p", augment->p, "perturbation probability");
    sub->add_option("--seed", augment->seed, "augmentation seed");
    sub->add_option("--limit", augment->limit, "batch size taken from the dataset head");
    sub->callback([augment, &rc] { rc = augment->run(); });
  }

  auto vc = std::make_shared<VcRunCmd>();
  {
    CLI::App* sub = app.add_subcommand("vc-run", "build a voice-converted synthetic corpus");
    add_config_flag(sub, vc->config_path);
    vc->model.attach(sub);
    sub->add_option("--data", vc->data, "input dataset path")->required();
    sub->add_option("--out", vc->out, "output dataset path")->required();
    sub->add_option("--speakers", vc->speakers, "generated speakers per record");
    sub->add_option("--seed", vc->seed, "conversion seed");
    sub->callback([vc, &rc] { rc = vc->run(); });
  }

  auto gradcheck = std::make_shared<GradcheckCmd>();
  {
    CLI::App* sub = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
    add_config_flag(sub, gradcheck->config_path);
    sub->add_option("--seed", gradcheck->seed, "suite seed");
    sub->callback([gradcheck, &rc] { rc = gradcheck->run(); });
  }

  auto evaluate = std::make_shared<EvaluateCmd>();
  {
    CLI::App* sub = app.add_subcommand("evaluate", "teacher-forced token accuracy on a dataset");
    add_config_flag(sub, evaluate->config_path);
    sub->add_option("--checkpoint", evaluate->checkpoint, "trained checkpoint path")->required();
    sub->add_option("--data", evaluate->data, "evaluation dataset path")->required();
    sub->callback([evaluate, &rc] { rc = evaluate->run(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  } catch (const ham::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
