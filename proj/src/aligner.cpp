#include "ham/aligner.hpp"

namespace ham {

Aligner::Aligner(ParamStore& ps, const ModelConfig& cfg, Parameter* embedding,
                 Rng& rng)
    : embedding_(embedding),
      feature_dim_(cfg.feature_dim),
      max_positions_(cfg.max_positions),
      dropout_(cfg.aligner.dropout) {
  const AlignerConfig& a = cfg.aligner;
  int h = a.hidden;
  pos_ = &ps.create("aligner.pos", init_normal(rng, {cfg.max_positions, h}, 0.1));
  in_proj_ = Linear::create(ps, "aligner.in", cfg.embedding_dim, h, rng);
  for (int b = 0; b < a.n_blocks; ++b) {
    Block blk;
    std::string base = "aligner.block" + std::to_string(b);
    for (int r = 0; r < a.resnet_blocks; ++r) {
      ResNet rn;
      for (int c = 0; c < a.conv_layers; ++c) {
        rn.convs.push_back(Conv1dLayer::create(
            ps, base + ".res" + std::to_string(r) + ".conv" + std::to_string(c), h, h,
            a.conv_kernel, rng));
      }
      blk.resnets.push_back(std::move(rn));
    }
    blk.norm = RmsNormLayer::create(ps, base + ".norm", h);
    blk.attn = MultiHeadAttention::create(ps, base + ".attn", h, cfg.feature_dim,
                                          a.heads, rng);
    blocks_.push_back(std::move(blk));
  }
  out_ = Linear::create(ps, "aligner.out", h, cfg.lvs_dim, rng);
}

Var Aligner::align(const Fwd& f, const std::vector<int>& phonemes,
                   const Array& features) const {
  Tape& t = f.tape;
  if (features.ndim() != 2 || features.cols() != feature_dim_) {
    throw ShapeError("align: features " + features.shape_str() +
                     " do not match feature dimension " + std::to_string(feature_dim_));
  }
  int T1 = static_cast<int>(phonemes.size());
  if (T1 == 0) throw ShapeError("align: empty phoneme sequence");
  if (T1 > max_positions_) {
    throw ConfigError("align: " + std::to_string(T1) + " phonemes exceed max_positions " +
                      std::to_string(max_positions_));
  }
  Var feats = t.leaf(features);
  Var h = in_proj_(t, embedding(t.leaf(*embedding_), phonemes));
  h = add(h, slice_rows(t.leaf(*pos_), 0, T1));
  for (const Block& blk : blocks_) {
    for (const ResNet& rn : blk.resnets) {
      Var u = h;
      for (std::size_t c = 0; c < rn.convs.size(); ++c) {
        u = rn.convs[c](t, u);
        if (c + 1 < rn.convs.size()) u = gelu(u);
      }
      h = add(h, maybe_dropout(f, u, dropout_));
    }
    Var q = blk.norm(t, h);
    h = add(h, maybe_dropout(f, blk.attn(t, q, feats, false), dropout_));
  }
  return out_(t, h);
}

std::vector<Var> Aligner::align_batch(
    const Fwd& f, const std::vector<const std::vector<int>*>& phonemes,
    const std::vector<const Array*>& features) const {
  if (phonemes.size() != features.size()) {
    throw ShapeError("align_batch: " + std::to_string(phonemes.size()) +
                     " phoneme sequences vs " + std::to_string(features.size()) +
                     " feature sequences");
  }
  std::vector<Var> out;
  out.reserve(phonemes.size());
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    out.push_back(align(f, *phonemes[i], *features[i]));
  }
  return out;
}

}  // namespace ham
