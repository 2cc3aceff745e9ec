#pragma once

#include <vector>

#include "ham/config.hpp"
#include "ham/nn.hpp"

namespace ham {

// Cross-attention aligner: maps a phoneme sequence plus frame-level acoustic
// features to one latent prosody vector per phoneme. The text stream carries
// learned positional embeddings; the feature stream deliberately has none, so
// attention treats frames as a bag keyed by content. Each block runs
// conv-resnet sub-blocks, an RMS norm, then cross-attention from text
// positions into the feature frames, all with residual connections.
class Aligner {
 public:
  Aligner(ParamStore& ps, const ModelConfig& cfg, Parameter* embedding, Rng& rng);

  // phonemes [T1], features [T2 x feature_dim] -> [T1 x lvs_dim].
  Var align(const Fwd& f, const std::vector<int>& phonemes, const Array& features) const;

  // Per-sample supervision targets for a whole batch; empty in, empty out.
  std::vector<Var> align_batch(const Fwd& f,
                               const std::vector<const std::vector<int>*>& phonemes,
                               const std::vector<const Array*>& features) const;

 private:
  struct ResNet {
    std::vector<Conv1dLayer> convs;
  };
  struct Block {
    std::vector<ResNet> resnets;
    RmsNormLayer norm;
    MultiHeadAttention attn;
  };

  Parameter* embedding_;
  Parameter* pos_;
  Linear in_proj_;
  std::vector<Block> blocks_;
  Linear out_;
  int feature_dim_;
  int max_positions_;
  double dropout_;
};

}  // namespace ham
