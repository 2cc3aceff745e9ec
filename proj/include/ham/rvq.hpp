#pragma once

#include <cstdint>

#include "ham/array.hpp"
#include "ham/codec_seq.hpp"
#include "ham/config.hpp"

namespace ham {

// Toy residual quantizer standing in for a neural audio codec. Each level
// owns a frozen seeded codebook whose entry 0 is the zero vector, so using
// more levels never increases reconstruction error. Level i quantizes the
// residual left by levels 0..i-1.
class ToyCodec {
 public:
  explicit ToyCodec(const ModelConfig& cfg);

  CodecSequence encode(const Array& features) const;  // [T x D] -> Q x T tokens

  // Reconstruction from the first `levels_used` rows (all levels if < 0).
  Array decode(const CodecSequence& seq, int levels_used = -1) const;

  double reconstruction_error(const Array& features, const CodecSequence& seq,
                              int levels_used) const;

  int levels() const { return levels_; }
  int codebook_size() const { return codebook_size_; }
  int dim() const { return dim_; }

 private:
  int levels_, codebook_size_, dim_;
  std::vector<Array> codebooks_;  // per level, [codebook_size x D]
};

}  // namespace ham
