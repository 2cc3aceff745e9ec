#include "ham/predictor.hpp"

namespace ham {

Predictor::Predictor(ParamStore& ps, const ModelConfig& cfg, Parameter* embedding,
                     Rng& rng)
    : embedding_(embedding), dropout_(cfg.predictor_dropout) {
  int d = cfg.embedding_dim;
  for (int i = 0; i < cfg.predictor_conv_layers; ++i) {
    convs_.push_back(Conv1dLayer::create(ps, "predictor.conv" + std::to_string(i), d,
                                         d, cfg.predictor_kernel, rng));
  }
  out_ = Linear::create(ps, "predictor.out", d, cfg.lvs_dim, rng);
}

Var Predictor::predict_lvs(const Fwd& f, const std::vector<int>& phonemes) const {
  Tape& t = f.tape;
  Var h = embedding(t.leaf(*embedding_), phonemes);
  for (const Conv1dLayer& conv : convs_) {
    h = maybe_dropout(f, gelu(conv(t, h)), dropout_);
  }
  return out_(t, h);
}

Fuser::Fuser(ParamStore& ps, const ModelConfig& cfg, Parameter* embedding, Rng& rng)
    : embedding_(embedding) {
  // Rows [0, embedding_dim) of the projection weight consume the phoneme
  // embedding; rows [embedding_dim, embedding_dim + lvs_dim) consume the LVS
  // channels.
  proj_ = Linear::create(ps, "fuse.proj", cfg.embedding_dim + cfg.lvs_dim,
                         cfg.d_model, rng);
}

Var Fuser::fuse(const Fwd& f, const std::vector<int>& phonemes, Var lvs) const {
  Tape& t = f.tape;
  Var emb = embedding(t.leaf(*embedding_), phonemes);
  if (lvs.rows() != emb.rows()) {
    throw ShapeError("fuse: " + std::to_string(emb.rows()) + " phonemes vs LVS of shape " +
                     lvs.value().shape_str());
  }
  return proj_(t, concat_cols(emb, lvs));
}

}  // namespace ham
