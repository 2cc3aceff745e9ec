#include "ham/rvq.hpp"

#include <cmath>
#include <limits>

#include "ham/rng.hpp"

namespace ham {

ToyCodec::ToyCodec(const ModelConfig& cfg)
    : levels_(cfg.quantizers),
      codebook_size_(cfg.codebook_size),
      dim_(cfg.feature_dim) {
  codebooks_.reserve(static_cast<std::size_t>(levels_));
  for (int l = 0; l < levels_; ++l) {
    Rng rng(mix64(cfg.codec_seed, static_cast<std::uint64_t>(l)));
    Array cb({codebook_size_, dim_});
    // Entry 0 stays zero: quantizing a residual can then never make the
    // reconstruction worse. Later levels use smaller codewords, matching the
    // shrinking residual magnitude.
    double sigma = cfg.codec_sigma * std::pow(0.5, l);
    for (int e = 1; e < codebook_size_; ++e) {
      for (int c = 0; c < dim_; ++c) cb.at(e, c) = rng.normal() * sigma;
    }
    codebooks_.push_back(std::move(cb));
  }
}

CodecSequence ToyCodec::encode(const Array& features) const {
  if (features.ndim() != 2 || features.cols() != dim_) {
    throw ShapeError("ToyCodec::encode: features " + features.shape_str() +
                     " do not match codec dimension " + std::to_string(dim_));
  }
  const int T = features.rows();
  CodecSequence seq;
  seq.tokens.assign(static_cast<std::size_t>(levels_),
                    std::vector<int>(static_cast<std::size_t>(T), 0));
  std::vector<double> residual(static_cast<std::size_t>(dim_));
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < dim_; ++c) residual[static_cast<std::size_t>(c)] = features.at(t, c);
    for (int l = 0; l < levels_; ++l) {
      const Array& cb = codebooks_[static_cast<std::size_t>(l)];
      double best = std::numeric_limits<double>::infinity();
      int best_e = 0;
      for (int e = 0; e < codebook_size_; ++e) {
        double ds = 0.0;
        const double* row = cb.data() + static_cast<std::size_t>(e) * dim_;
        for (int c = 0; c < dim_; ++c) {
          double diff = residual[static_cast<std::size_t>(c)] - row[c];
          ds += diff * diff;
        }
        if (ds < best) {
          best = ds;
          best_e = e;
        }
      }
      seq.tokens[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] = best_e;
      const double* row = cb.data() + static_cast<std::size_t>(best_e) * dim_;
      for (int c = 0; c < dim_; ++c) residual[static_cast<std::size_t>(c)] -= row[c];
    }
  }
  return seq;
}

Array ToyCodec::decode(const CodecSequence& seq, int levels_used) const {
  seq.validate(levels_, codebook_size_, "ToyCodec::decode");
  if (levels_used < 0) levels_used = levels_;
  if (levels_used > levels_) {
    throw ConfigError("ToyCodec::decode: " + std::to_string(levels_used) +
                      " levels requested, codec has " + std::to_string(levels_));
  }
  const int T = seq.length();
  Array out({T, dim_});
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < levels_used; ++l) {
      int e = seq.tokens[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)];
      const double* row =
          codebooks_[static_cast<std::size_t>(l)].data() + static_cast<std::size_t>(e) * dim_;
      for (int c = 0; c < dim_; ++c) out.at(t, c) += row[c];
    }
  }
  return out;
}

double ToyCodec::reconstruction_error(const Array& features, const CodecSequence& seq,
                                      int levels_used) const {
  Array rec = decode(seq, levels_used);
  check_same_shape("reconstruction_error", features, rec);
  double s = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    double diff = features[i] - rec[i];
    s += diff * diff;
  }
  return s;
}

}  // namespace ham
