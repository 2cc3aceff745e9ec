#include "ham/codec_lm.hpp"

#include <cmath>

namespace ham {

namespace {

int sample_from_logits(const Array& logits, int row, double temperature, Rng& rng) {
  int V = logits.cols();
  if (temperature <= 0.0) return argmax_row(logits, row);
  double m = logits.at(row, 0);
  for (int c = 1; c < V; ++c) m = std::max(m, logits.at(row, c));
  std::vector<double> probs(static_cast<std::size_t>(V));
  double z = 0.0;
  for (int c = 0; c < V; ++c) {
    double e = std::exp((logits.at(row, c) - m) / temperature);
    probs[static_cast<std::size_t>(c)] = e;
    z += e;
  }
  double r = rng.uniform() * z;
  double acc = 0.0;
  for (int c = 0; c < V; ++c) {
    acc += probs[static_cast<std::size_t>(c)];
    if (r < acc) return c;
  }
  return V - 1;
}

}  // namespace

int argmax_row(const Array& logits, int row) {
  int best = 0;
  double best_v = logits.at(row, 0);
  for (int c = 1; c < logits.cols(); ++c) {
    double v = logits.at(row, c);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

int nar_sample_level(Rng& rng, int quantizers) {
  if (quantizers < 2) {
    throw ConfigError("nar_sample_level: need at least 2 quantizers");
  }
  return 2 + rng.below(quantizers - 1);
}

// ---- autoregressive model ----

ArModel::ArModel(ParamStore& ps, const ModelConfig& cfg, Rng& rng)
    : max_positions_(cfg.max_positions), codebook_(cfg.codebook_size) {
  int d = cfg.d_model;
  codec_emb_ = &ps.create("ar.codec_emb", init_normal(rng, {cfg.codebook_size, d}, 0.1));
  pos_ = &ps.create("ar.pos", init_normal(rng, {cfg.max_positions, d}, 0.1));
  for (int b = 0; b < cfg.n_ar_blocks; ++b) {
    blocks_.push_back(TransformerBlock::create(ps, "ar.block" + std::to_string(b), d,
                                               cfg.heads, cfg.ffn_dim, cfg.dropout,
                                               /*causal=*/true, rng));
  }
  final_ln_ = LayerNormLayer::create(ps, "ar.final_ln", d);
  codec_head_ = Linear::create(ps, "ar.codec_head", d, cfg.codebook_size, rng);
  phoneme_head_ = Linear::create(ps, "ar.phoneme_head", d, cfg.phoneme_vocab, rng);
  stop_head_ = Linear::create(ps, "ar.stop_head", d, 1, rng);
}

Var ArModel::hidden_states(const Fwd& f, Var fused,
                           const std::vector<int>& q1_tokens) const {
  Tape& t = f.tape;
  int T1 = fused.rows();
  int T3 = static_cast<int>(q1_tokens.size());
  if (T1 + T3 > max_positions_) {
    throw ConfigError("sequence of " + std::to_string(T1 + T3) +
                      " positions exceeds max_positions " +
                      std::to_string(max_positions_));
  }
  Var seq = fused;
  if (T3 > 0) {
    Var tok = embedding(t.leaf(*codec_emb_), q1_tokens);
    seq = concat_rows({fused, tok});
  }
  seq = add(seq, slice_rows(t.leaf(*pos_), 0, T1 + T3));
  for (const TransformerBlock& blk : blocks_) seq = blk(f, seq);
  return final_ln_(t, seq);
}

ArOutput ArModel::forward(const Fwd& f, Var fused,
                          const std::vector<int>& q1_tokens) const {
  Tape& t = f.tape;
  int T1 = fused.rows();
  int T3 = static_cast<int>(q1_tokens.size());
  if (T3 == 0) throw ShapeError("ArModel::forward: empty token sequence");
  Var h = hidden_states(f, fused, q1_tokens);
  ArOutput out;
  out.codec_logits = codec_head_(t, slice_rows(h, T1 - 1, T1 + T3 - 1));
  out.phoneme_logits = phoneme_head_(t, slice_rows(h, 0, T1));
  out.stop_logits = stop_head_(t, slice_rows(h, T1 - 1, T1 + T3));
  return out;
}

std::vector<int> ArModel::generate(const Array& fused, const PromptSpec* prompt,
                                   int max_len, double temperature,
                                   std::uint64_t seed) const {
  if (max_len <= 0) throw ConfigError("generate: max_len must be positive");
  Array context = fused;
  std::vector<int> tokens;
  if (prompt != nullptr) {
    if (prompt->fused.has_value()) {
      const Array& pf = *prompt->fused;
      if (pf.ndim() != 2 || pf.cols() != fused.cols()) {
        throw ShapeError("generate: prompt fused " + pf.shape_str() +
                         " does not match target fused " + fused.shape_str());
      }
      Array merged({pf.rows() + fused.rows(), fused.cols()});
      for (int r = 0; r < pf.rows(); ++r) {
        for (int c = 0; c < pf.cols(); ++c) merged.at(r, c) = pf.at(r, c);
      }
      for (int r = 0; r < fused.rows(); ++r) {
        for (int c = 0; c < fused.cols(); ++c) merged.at(pf.rows() + r, c) = fused.at(r, c);
      }
      context = std::move(merged);
    }
    if (prompt->codecs.levels() > 0) {
      tokens = prompt->codecs.level(0);
    }
  }
  const int n_prompt = static_cast<int>(tokens.size());
  Rng rng(seed);
  std::vector<int> generated;
  while (static_cast<int>(generated.size()) < max_len) {
    if (context.rows() + static_cast<int>(tokens.size()) + 1 > max_positions_) break;
    Tape t;
    Fwd f{t, false, nullptr};
    Var h = hidden_states(f, t.leaf(context), tokens);
    int last = h.rows() - 1;
    Var row = slice_rows(h, last, last + 1);
    if (!generated.empty()) {
      double stop_logit = stop_head_(t, row).value()[0];
      if (stop_logit > 0.0) break;
    }
    Array logits = codec_head_(t, row).value();
    int tok = sample_from_logits(logits, 0, temperature, rng);
    tokens.push_back(tok);
    generated.push_back(tok);
  }
  (void)n_prompt;
  return generated;
}

// ---- non-autoregressive model ----

NarModel::NarModel(ParamStore& ps, const ModelConfig& cfg, Rng& rng)
    : max_positions_(cfg.max_positions),
      quantizers_(cfg.quantizers),
      codebook_(cfg.codebook_size) {
  int d = cfg.d_model;
  for (int l = 0; l < cfg.quantizers; ++l) {
    level_embs_.push_back(&ps.create("nar.level_emb" + std::to_string(l + 1),
                                     init_normal(rng, {cfg.codebook_size, d}, 0.1)));
  }
  level_marker_ =
      &ps.create("nar.level_marker", init_normal(rng, {cfg.quantizers - 1, d}, 0.1));
  pos_ = &ps.create("nar.pos", init_normal(rng, {cfg.max_positions, d}, 0.1));
  for (int b = 0; b < cfg.n_nar_blocks; ++b) {
    blocks_.push_back(TransformerBlock::create(ps, "nar.block" + std::to_string(b), d,
                                               cfg.heads, cfg.ffn_dim, cfg.dropout,
                                               /*causal=*/false, rng));
  }
  final_ln_ = LayerNormLayer::create(ps, "nar.final_ln", d);
  codec_head_ = Linear::create(ps, "nar.codec_head", d, cfg.codebook_size, rng);
  phoneme_head_ = Linear::create(ps, "nar.phoneme_head", d, cfg.phoneme_vocab, rng);
}

NarOutput NarModel::forward(const Fwd& f, Var fused, const CodecSequence& prompt,
                            const std::vector<std::vector<int>>& known_levels,
                            int level) const {
  Tape& t = f.tape;
  if (level < 2 || level > quantizers_) {
    throw ConfigError("NAR level " + std::to_string(level) + " outside [2, " +
                      std::to_string(quantizers_) + "]");
  }
  if (static_cast<int>(known_levels.size()) != level - 1) {
    throw ConfigError("NAR level " + std::to_string(level) + " requires " +
                      std::to_string(level - 1) + " known level rows, got " +
                      std::to_string(known_levels.size()));
  }
  const int T3 = static_cast<int>(known_levels[0].size());
  if (T3 == 0) throw ShapeError("NarModel::forward: empty token rows");
  for (const auto& row : known_levels) {
    if (static_cast<int>(row.size()) != T3) {
      throw ShapeError("NarModel::forward: ragged known level rows");
    }
  }
  const int T1 = fused.rows();
  int Tp = 0;
  if (prompt.levels() > 0) {
    prompt.validate(quantizers_, codebook_, "NAR prompt");
    Tp = prompt.length();
  }
  if (T1 + Tp + T3 > max_positions_) {
    throw ConfigError("NAR sequence of " + std::to_string(T1 + Tp + T3) +
                      " positions exceeds max_positions " +
                      std::to_string(max_positions_));
  }

  // Target positions: summed embeddings of every known level plus the marker
  // of the level being predicted.
  Var target_in = embedding(t.leaf(*level_embs_[0]), known_levels[0]);
  for (int l = 1; l < level - 1; ++l) {
    target_in = add(target_in, embedding(t.leaf(*level_embs_[static_cast<std::size_t>(l)]),
                                         known_levels[static_cast<std::size_t>(l)]));
  }
  target_in = add_rowvec(target_in, embedding(t.leaf(*level_marker_), {level - 2}));

  std::vector<Var> parts;
  parts.push_back(fused);
  if (Tp > 0) {
    Var prompt_in = embedding(t.leaf(*level_embs_[0]), prompt.level(0));
    for (int l = 1; l < quantizers_; ++l) {
      prompt_in = add(prompt_in, embedding(t.leaf(*level_embs_[static_cast<std::size_t>(l)]),
                                           prompt.level(l)));
    }
    parts.push_back(prompt_in);
  }
  parts.push_back(target_in);

  Var seq = concat_rows(parts);
  seq = add(seq, slice_rows(t.leaf(*pos_), 0, T1 + Tp + T3));
  for (const TransformerBlock& blk : blocks_) seq = blk(f, seq);
  Var h = final_ln_(t, seq);

  NarOutput out;
  out.codec_logits = codec_head_(t, slice_rows(h, T1 + Tp, T1 + Tp + T3));
  out.phoneme_logits = phoneme_head_(t, slice_rows(h, 0, T1));
  return out;
}

CodecSequence NarModel::complete(const Array& fused, const PromptSpec* prompt,
                                 const std::vector<int>& q1_tokens) const {
  CodecSequence out;
  out.tokens.push_back(q1_tokens);
  CodecSequence empty_prompt;
  const CodecSequence& p =
      (prompt != nullptr && prompt->codecs.levels() > 0) ? prompt->codecs : empty_prompt;
  for (int level = 2; level <= quantizers_; ++level) {
    Tape t;
    Fwd f{t, false, nullptr};
    NarOutput no = forward(f, t.leaf(fused), p, out.tokens, level);
    const Array& logits = no.codec_logits.value();
    std::vector<int> row(static_cast<std::size_t>(logits.rows()));
    for (int r = 0; r < logits.rows(); ++r) row[static_cast<std::size_t>(r)] = argmax_row(logits, r);
    out.tokens.push_back(std::move(row));
  }
  return out;
}

}  // namespace ham
