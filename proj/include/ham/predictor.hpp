#pragma once

#include <vector>

#include "ham/config.hpp"
#include "ham/nn.hpp"

namespace ham {

// Predicts the per-phoneme latent prosody vectors directly from text:
// embedding -> stacked k-wide convolutions with GELU and dropout -> affine to
// lvs_dim. Used as the supervision target consumer at training time and as
// the only prosody source at inference.
class Predictor {
 public:
  Predictor(ParamStore& ps, const ModelConfig& cfg, Parameter* embedding, Rng& rng);

  // [T1] phoneme ids -> [T1 x lvs_dim].
  Var predict_lvs(const Fwd& f, const std::vector<int>& phonemes) const;

 private:
  Parameter* embedding_;
  std::vector<Conv1dLayer> convs_;
  Linear out_;
  double dropout_;
};

// Fuses text with prosody: concatenates the phoneme embedding with the LVS
// channels and applies a pointwise projection to d_model.
class Fuser {
 public:
  Fuser(ParamStore& ps, const ModelConfig& cfg, Parameter* embedding, Rng& rng);

  // phonemes [T1], lvs [T1 x lvs_dim] -> [T1 x d_model].
  Var fuse(const Fwd& f, const std::vector<int>& phonemes, Var lvs) const;

 private:
  Parameter* embedding_;
  Linear proj_;
};

}  // namespace ham
