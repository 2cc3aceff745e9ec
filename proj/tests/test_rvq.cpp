#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "ham/errors.hpp"
#include "ham/features.hpp"
#include "ham/rng.hpp"
#include "ham/rvq.hpp"
#include "test_support.hpp"

using namespace ham;
using test::bitwise_equal;

namespace {

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.codebook_size = 32;
  cfg.quantizers = 8;
  cfg.feature_dim = 6;
  return cfg;
}

Array demo_features(const ModelConfig& cfg, int frames, std::uint64_t seed) {
  Rng rng(seed);
  Array f({frames, cfg.feature_dim});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.normal(0.0, 2.0);
  return f;
}

}  // namespace

TEST_CASE("encode produces one token row per level and is deterministic") {
  ModelConfig cfg = small_cfg();
  ToyCodec codec(cfg);
  Array f = demo_features(cfg, 11, 42);

  CodecSequence seq = codec.encode(f);
  CHECK(seq.levels() == cfg.quantizers);
  CHECK(seq.length() == 11);
  seq.validate(cfg.quantizers, cfg.codebook_size, "encode");

  CodecSequence again = codec.encode(f);
  CHECK(again.tokens == seq.tokens);

  ToyCodec other(cfg);
  CHECK(other.encode(f).tokens == seq.tokens);
}

TEST_CASE("reconstruction error never increases with more levels") {
  ModelConfig cfg = small_cfg();
  ToyCodec codec(cfg);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Array f = demo_features(cfg, 9, seed);
    CodecSequence seq = codec.encode(f);
    double prev = codec.reconstruction_error(f, seq, 1);
    for (int lv = 2; lv <= cfg.quantizers; ++lv) {
      double err = codec.reconstruction_error(f, seq, lv);
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("decode with all levels equals decode with the level count") {
  ModelConfig cfg = small_cfg();
  ToyCodec codec(cfg);
  Array f = demo_features(cfg, 7, 5);
  CodecSequence seq = codec.encode(f);
  CHECK(bitwise_equal(codec.decode(seq, -1), codec.decode(seq, cfg.quantizers)));
  Array partial = codec.decode(seq, 3);
  CHECK(partial.rows() == 7);
  CHECK(partial.cols() == cfg.feature_dim);
}

TEST_CASE("codec sequence validation catches malformed grids") {
  CodecSequence ragged;
  ragged.tokens = {{1, 2, 3}, {4, 5}};
  CHECK_THROWS_AS(ragged.validate(2, 10, "test"), ValidationError);

  CodecSequence wrong_levels;
  wrong_levels.tokens = {{0, 1}};
  CHECK_THROWS_AS(wrong_levels.validate(2, 10, "test"), ValidationError);

  CodecSequence out_of_range;
  out_of_range.tokens = {{0, 10}};
  CHECK_THROWS_AS(out_of_range.validate(1, 10, "test"), ValidationError);

  CodecSequence negative;
  negative.tokens = {{-1}};
  CHECK_THROWS_AS(negative.validate(1, 10, "test"), ValidationError);

  CodecSequence ok;
  ok.tokens = {{0, 9}, {3, 4}};
  CHECK_NOTHROW(ok.validate(2, 10, "test"));
  CHECK(ok.levels() == 2);
  CHECK(ok.length() == 2);
  CHECK(ok.level(1) == std::vector<int>{3, 4});
}

TEST_CASE("desk-size codec round trips synthetic features with low error") {
  ModelConfig cfg;
  ToyCodec codec(cfg);
  FeatureSequence fs = synth_features({4, 8, 15, 16, 23, 42 % cfg.phoneme_vocab}, 1, 3, 7, cfg);
  CodecSequence seq = codec.encode(fs.frames);
  CHECK(seq.levels() == cfg.quantizers);
  CHECK(seq.length() == fs.frames.rows());

  double full = codec.reconstruction_error(fs.frames, seq, cfg.quantizers);
  double coarse = codec.reconstruction_error(fs.frames, seq, 1);
  CHECK(full <= coarse);
  CHECK(full >= 0.0);
}
