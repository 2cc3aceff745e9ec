#include "ham/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <utility>

#include "ham/errors.hpp"

namespace ham {

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  validate(cfg);
  return cfg;
}

// Next-phoneme teacher-forcing targets, closing with the reserved end id.
std::vector<int> next_phoneme_targets(const std::vector<int>& phonemes, int vocab) {
  std::vector<int> t(phonemes.begin() + 1, phonemes.end());
  t.push_back(vocab - 1);
  return t;
}

// Enrollment prefix used while teaching the NAR model: the leading third of
// the utterance, at least one frame.
int nar_prompt_len(int frames) { return std::max(1, (frames + 2) / 3); }

CodecSequence prefix_of(const CodecSequence& seq, int frames) {
  CodecSequence out;
  out.tokens.resize(seq.tokens.size());
  for (std::size_t l = 0; l < seq.tokens.size(); ++l) {
    out.tokens[l].assign(seq.tokens[l].begin(), seq.tokens[l].begin() + frames);
  }
  return out;
}

}  // namespace

ModelBundle::ModelBundle(const ModelConfig& c, std::uint64_t init_seed)
    : cfg(validated(c)),
      params(),
      init_rng(init_seed),
      phoneme_embedding(&params.create(
          "embedding.phoneme",
          init_normal(init_rng, {cfg.phoneme_vocab, cfg.embedding_dim}, 0.1))),
      aligner(params, cfg, phoneme_embedding, init_rng),
      predictor(params, cfg, phoneme_embedding, init_rng),
      fuser(params, cfg, phoneme_embedding, init_rng),
      ar(params, cfg, init_rng),
      nar(params, cfg, init_rng) {}

CheckpointData snapshot(const ModelBundle& bundle, const TrainConfig& tc,
                        const Adam* adam, const std::string& rng_state,
                        const Codebook* codebook) {
  CheckpointData d;
  d.model_config_json = bundle.cfg.to_json();
  d.train_config_json = tc.to_json();
  for (const Parameter* p : bundle.params.all()) {
    d.params.emplace_back(p->name, p->value);
  }
  if (adam != nullptr) {
    d.has_optimizer = true;
    d.adam_step_count = adam->step_count();
    for (const Parameter* p : bundle.params.all()) {
      auto it = adam->state().find(p->name);
      if (it == adam->state().end()) continue;
      d.adam_moments.emplace_back(p->name, it->second.m, it->second.v);
    }
  }
  d.rng_state = rng_state;
  if (codebook != nullptr) d.codebook = *codebook;
  return d;
}

void restore(ModelBundle& bundle, const CheckpointData& data, Adam* adam) {
  if (data.params.size() != bundle.params.all().size()) {
    throw ValidationError("checkpoint holds " + std::to_string(data.params.size()) +
                          " parameters, model has " +
                          std::to_string(bundle.params.all().size()));
  }
  for (const auto& [name, value] : data.params) {
    Parameter* p = bundle.params.find(name);
    if (p == nullptr) throw ValidationError("checkpoint has unknown parameter: " + name);
    if (value.shape() != p->value.shape()) {
      throw ValidationError("checkpoint shape mismatch for " + name + ": " +
                            value.shape_str() + " vs " + p->value.shape_str());
    }
    p->value = value;
  }
  if (adam != nullptr && data.has_optimizer) {
    adam->set_step_count(data.adam_step_count);
    adam->state().clear();
    for (const auto& [name, m, v] : data.adam_moments) {
      if (bundle.params.find(name) == nullptr) {
        throw ValidationError("checkpoint optimizer state names unknown parameter: " + name);
      }
      adam->state()[name] = Adam::Moments{m, v};
    }
  }
}

std::string breakdown_to_json(const LossBreakdown& b) {
  nlohmann::ordered_json j{{"step", b.step},       {"lr", b.lr},
                           {"lvs", b.lvs},         {"phoneme", b.phoneme},
                           {"codecs", b.codecs},   {"total", b.total},
                           {"sampled_level", b.sampled_level}};
  return j.dump();
}

Trainer::Trainer(ModelBundle& bundle, const TrainConfig& tc,
                 std::vector<DatasetRecord> corpus, int kmeans_restarts)
    : bundle_(bundle), tc_(tc), corpus_(std::move(corpus)) {
  validate(tc_);
  if (corpus_.empty()) throw ConfigError("training corpus is empty");
  for (const auto& rec : corpus_) validate_record(rec, bundle_.cfg);

  int total_rows = 0;
  for (const auto& rec : corpus_) total_rows += rec.features.rows();
  Array points({total_rows, bundle_.cfg.feature_dim});
  int row = 0;
  for (const auto& rec : corpus_) {
    for (int r = 0; r < rec.features.rows(); ++r, ++row) {
      for (int c = 0; c < rec.features.cols(); ++c) {
        points.at(row, c) = rec.features.at(r, c);
      }
    }
  }
  codebook_ = kmeans_fit(points, bundle_.cfg.kmeans_k, kmeans_restarts,
                         mix64(tc_.seed, 0x3EAull));
  refined_.reserve(corpus_.size());
  for (const auto& rec : corpus_) refined_.push_back(refine(rec.features, codebook_));
}

void Trainer::set_codebook(Codebook cb) {
  if (cb.dim() != bundle_.cfg.feature_dim) {
    throw ConfigError("codebook dimension " + std::to_string(cb.dim()) +
                      " does not match feature dimension " +
                      std::to_string(bundle_.cfg.feature_dim));
  }
  codebook_ = std::move(cb);
  refined_.clear();
  for (const auto& rec : corpus_) refined_.push_back(refine(rec.features, codebook_));
}

Trainer::SampleLoss Trainer::sample_loss(const Fwd& f, ModelKind kind,
                                         const DatasetRecord& rec,
                                         const Array& refined_features,
                                         const AugmentedSample& aug, int nar_level) {
  Var teacher = bundle_.aligner.align(f, rec.phonemes, refined_features);
  Var predicted = bundle_.predictor.predict_lvs(f, rec.phonemes);
  Var lvs_loss = l1(predicted, teacher);
  Var fused = bundle_.fuser.fuse(f, rec.phonemes, teacher);

  std::vector<int> ph_targets =
      next_phoneme_targets(rec.phonemes, bundle_.cfg.phoneme_vocab);

  if (kind == ModelKind::ar) {
    ArTargets t = targets_for_training(aug);
    StopTargets st = stop_targets(aug);
    ArOutput out = bundle_.ar.forward(f, fused, t.input_tokens);
    Var codec_ce = cross_entropy_sum(out.codec_logits, t.target_tokens, &t.mask);
    Var stop_bce = bce_logits_sum(out.stop_logits, st.targets, &st.mask);
    Var ph_ce = cross_entropy_sum(out.phoneme_logits, ph_targets);
    return {lvs_loss, ph_ce, add(codec_ce, stop_bce)};
  }

  LevelTargets lt = level_targets(aug, nar_level);
  std::vector<std::vector<int>> known(aug.input.tokens.begin(),
                                      aug.input.tokens.begin() + (nar_level - 1));
  CodecSequence prompt = prefix_of(aug.input, nar_prompt_len(aug.input.length()));
  NarOutput out = bundle_.nar.forward(f, fused, prompt, known, nar_level);
  Var codec_ce = cross_entropy_sum(out.codec_logits, lt.targets, &lt.mask);
  Var ph_ce = cross_entropy_sum(out.phoneme_logits, ph_targets);
  return {lvs_loss, ph_ce, codec_ce};
}

LossBreakdown Trainer::step(ModelKind kind) {
  const std::int64_t s = global_step_;
  const int batch = tc_.batch_size;
  const auto n = static_cast<std::uint64_t>(corpus_.size());

  Rng batch_rng(mix64(tc_.seed, static_cast<std::uint64_t>(s), 0xBA7Cull));
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) idx[static_cast<std::size_t>(b)] = static_cast<int>(batch_rng.below(n));

  std::vector<CodecSequence> batch_codecs;
  batch_codecs.reserve(idx.size());
  for (int i : idx) batch_codecs.push_back(corpus_[static_cast<std::size_t>(i)].codecs);
  std::vector<AugmentedSample> augmented = augment_batch(
      batch_codecs, tc_.augment_p, mix64(tc_.seed, static_cast<std::uint64_t>(s), 0xA06ull));

  int level = 0;
  if (kind == ModelKind::nar) {
    Rng level_rng(mix64(tc_.seed, static_cast<std::uint64_t>(s), 0x1E7ull));
    level = nar_sample_level(level_rng, bundle_.cfg.quantizers);
  }

  Rng drop_rng(mix64(tc_.seed, static_cast<std::uint64_t>(s), 0xD120ull));
  Tape tape;
  Fwd f{tape, true, &drop_rng};

  Var lvs_sum, ph_sum, cod_sum;
  for (int b = 0; b < batch; ++b) {
    const auto i = static_cast<std::size_t>(idx[static_cast<std::size_t>(b)]);
    SampleLoss sl = sample_loss(f, kind, corpus_[i], refined_[i],
                                augmented[static_cast<std::size_t>(b)], level);
    lvs_sum = (b == 0) ? sl.lvs : add(lvs_sum, sl.lvs);
    ph_sum = (b == 0) ? sl.phoneme : add(ph_sum, sl.phoneme);
    cod_sum = (b == 0) ? sl.codecs : add(cod_sum, sl.codecs);
  }
  const double inv = 1.0 / batch;
  Var loss = scale(add(add(lvs_sum, ph_sum), cod_sum), inv);

  LossBreakdown out;
  out.step = s;
  out.lr = lr_at(s, tc_.warmup_steps, tc_.base_lr, tc_.total_steps);
  out.lvs = lvs_sum.value().item() * inv;
  out.phoneme = ph_sum.value().item() * inv;
  out.codecs = cod_sum.value().item() * inv;
  out.total = out.lvs + out.phoneme + out.codecs;
  out.sampled_level = level;
  if (!std::isfinite(out.total)) {
    throw TrainingError("non-finite loss at step " + std::to_string(s));
  }

  bundle_.params.zero_grads();
  tape.backward(loss);
  adam_.step(bundle_.params, out.lr);
  ++global_step_;
  return out;
}

std::vector<LossBreakdown> Trainer::run(ModelKind kind, std::int64_t steps,
                                        std::ostream* log) {
  std::vector<LossBreakdown> trace;
  trace.reserve(static_cast<std::size_t>(steps));
  for (std::int64_t i = 0; i < steps; ++i) {
    trace.push_back(step(kind));
    if (log != nullptr) *log << breakdown_to_json(trace.back()) << '\n';
  }
  return trace;
}

EvalResult evaluate_token_accuracy(ModelBundle& bundle, const Codebook& codebook,
                                   const std::vector<DatasetRecord>& records) {
  if (records.empty()) throw ConfigError("evaluation dataset is empty");
  const int quantizers = bundle.cfg.quantizers;
  EvalResult res;
  res.level_accuracy.assign(static_cast<std::size_t>(quantizers - 1), 0.0);

  std::int64_t q1_hits = 0;
  std::vector<std::int64_t> level_hits(static_cast<std::size_t>(quantizers - 1), 0);
  std::int64_t positions = 0;

  for (const auto& rec : records) {
    validate_record(rec, bundle.cfg);
    Tape tape;
    Fwd f{tape, false, nullptr};
    Array refined_features = refine(rec.features, codebook);
    Var teacher = bundle.aligner.align(f, rec.phonemes, refined_features);
    Var fused = bundle.fuser.fuse(f, rec.phonemes, teacher);

    const std::vector<int>& q1 = rec.codecs.level(0);
    const int frames = rec.codecs.length();
    positions += frames;

    ArOutput ar_out = bundle.ar.forward(f, fused, q1);
    const Array& logits = ar_out.codec_logits.value();
    for (int t = 0; t < frames; ++t) {
      if (argmax_row(logits, t) == q1[static_cast<std::size_t>(t)]) ++q1_hits;
    }

    CodecSequence prompt = prefix_of(rec.codecs, nar_prompt_len(frames));
    for (int level = 2; level <= quantizers; ++level) {
      std::vector<std::vector<int>> known(rec.codecs.tokens.begin(),
                                          rec.codecs.tokens.begin() + (level - 1));
      NarOutput nar_out = bundle.nar.forward(f, fused, prompt, known, level);
      const Array& ll = nar_out.codec_logits.value();
      const std::vector<int>& truth = rec.codecs.level(level - 1);
      for (int t = 0; t < frames; ++t) {
        if (argmax_row(ll, t) == truth[static_cast<std::size_t>(t)]) {
          ++level_hits[static_cast<std::size_t>(level - 2)];
        }
      }
    }
  }

  res.positions = positions;
  res.q1_accuracy = static_cast<double>(q1_hits) / static_cast<double>(positions);
  for (std::size_t l = 0; l < level_hits.size(); ++l) {
    res.level_accuracy[l] = static_cast<double>(level_hits[l]) / static_cast<double>(positions);
  }
  return res;
}

CodecSequence synthesize(ModelBundle& bundle, const std::vector<int>& phonemes,
                         const DatasetRecord* prompt, const SynthesisOptions& opts) {
  if (phonemes.empty()) throw ValidationError("synthesize: empty phoneme sequence");
  Tape tape;
  Fwd f{tape, false, nullptr};
  Var lvs = bundle.predictor.predict_lvs(f, phonemes);
  Array fused = bundle.fuser.fuse(f, phonemes, lvs).value();

  std::optional<PromptSpec> enroll;
  if (prompt != nullptr) {
    validate_record(*prompt, bundle.cfg);
    PromptSpec spec;
    spec.codecs = prompt->codecs;
    Var plvs = bundle.predictor.predict_lvs(f, prompt->phonemes);
    spec.fused = bundle.fuser.fuse(f, prompt->phonemes, plvs).value();
    enroll = std::move(spec);
  }

  int max_len = opts.max_len > 0
                    ? opts.max_len
                    : static_cast<int>(phonemes.size()) * bundle.cfg.frames_per_phoneme * 2;
  std::vector<int> q1 = bundle.ar.generate(fused, enroll ? &*enroll : nullptr, max_len,
                                           opts.temperature, opts.seed);
  if (q1.empty()) throw ValidationError("synthesize: prompt leaves no room to generate");
  return bundle.nar.complete(fused, enroll ? &*enroll : nullptr, q1);
}

std::vector<DatasetRecord> mix_corpus(const std::vector<DatasetRecord>& real,
                                      const std::vector<DatasetRecord>& synthetic,
                                      SyntheticMix ratio) {
  if (ratio.synthetic <= 0 || ratio.real <= 0) {
    throw ConfigError("mix ratio counts must be positive");
  }
  std::vector<DatasetRecord> out;
  out.reserve(real.size() + synthetic.size());
  std::size_t si = 0, ri = 0;
  while (si < synthetic.size() || ri < real.size()) {
    for (int j = 0; j < ratio.synthetic && si < synthetic.size(); ++j) {
      out.push_back(synthetic[si++]);
    }
    for (int j = 0; j < ratio.real && ri < real.size(); ++j) {
      out.push_back(real[ri++]);
    }
  }
  return out;
}

}  // namespace ham
