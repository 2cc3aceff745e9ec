#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ham/codec_seq.hpp"
#include "ham/config.hpp"
#include "ham/nn.hpp"

namespace ham {

// Enrollment context for generation: acoustic tokens of a reference
// utterance, optionally with the fused text sequence that produced them.
struct PromptSpec {
  CodecSequence codecs;
  std::optional<Array> fused;
};

struct ArOutput {
  Var codec_logits;    // [T3 x codebook]
  Var phoneme_logits;  // [T1 x phoneme_vocab]
  Var stop_logits;     // [(T3 + 1) x 1]; row j scores "end instead of token j"
};

// Decoder-only causal transformer over [fused text positions ++ level-1
// acoustic tokens]. Token j is predicted from the hidden state at the
// position just before it (the last text position for j = 0). The phoneme
// head reads the text positions and predicts the next phoneme, closing with
// the reserved end-of-text id. A separate stop head scores sequence end, so
// the codec softmax stays exactly codebook-wide.
class ArModel {
 public:
  ArModel(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  ArOutput forward(const Fwd& f, Var fused, const std::vector<int>& q1_tokens) const;

  // Free-running decode. Conditioning order: [prompt fused, target fused,
  // prompt level-1 tokens, generated tokens]. Temperature 0 decodes greedily
  // (lowest index wins ties); generation stops when the stop head fires
  // (after at least one token) or at max_len.
  std::vector<int> generate(const Array& fused, const PromptSpec* prompt, int max_len,
                            double temperature, std::uint64_t seed) const;

 private:
  Var hidden_states(const Fwd& f, Var fused, const std::vector<int>& q1_tokens) const;

  Parameter* codec_emb_;
  Parameter* pos_;
  std::vector<TransformerBlock> blocks_;
  LayerNormLayer final_ln_;
  Linear codec_head_, phoneme_head_, stop_head_;
  int max_positions_;
  int codebook_;
};

struct NarOutput {
  Var codec_logits;    // [T3 x codebook] for the requested level
  Var phoneme_logits;  // [T1 x phoneme_vocab]
};

// Non-causal transformer that predicts one quantizer level given all
// shallower levels, the fused text, and an enrollment prompt carrying all
// levels. Target positions receive the summed embeddings of known levels
// plus a marker embedding of the level under prediction; logits for level i
// never see levels deeper than i - 1.
class NarModel {
 public:
  NarModel(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  // known_levels must hold exactly level-1 rows (level is 2-based..Q).
  // prompt may be empty (no enrollment rows).
  NarOutput forward(const Fwd& f, Var fused, const CodecSequence& prompt,
                    const std::vector<std::vector<int>>& known_levels, int level) const;

  // Greedy per-level completion of levels 2..Q above the given level-1 row.
  CodecSequence complete(const Array& fused, const PromptSpec* prompt,
                         const std::vector<int>& q1_tokens) const;

  int quantizers() const { return quantizers_; }

 private:
  std::vector<Parameter*> level_embs_;  // one table per level
  Parameter* level_marker_;             // [Q-1 x d_model], marker for levels 2..Q
  Parameter* pos_;
  std::vector<TransformerBlock> blocks_;
  LayerNormLayer final_ln_;
  Linear codec_head_, phoneme_head_;
  int max_positions_;
  int quantizers_;
  int codebook_;
};

// Uniform draw from {2, ..., quantizers}: the level refined by one
// non-autoregressive training step.
int nar_sample_level(Rng& rng, int quantizers);

// Greedy row argmax with lowest-index tie break.
int argmax_row(const Array& logits, int row);

}  // namespace ham
