#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "ham/dataset.hpp"
#include "ham/errors.hpp"
#include "ham/rng.hpp"
#include "ham/vc.hpp"
#include "test_support.hpp"

using namespace ham;
using test::bitwise_equal;

namespace {

Array random_content(int frames, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Array f({frames, dim});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.normal(0.0, 1.0);
  return f;
}

Array flat_f0(int frames, double hz) {
  Array f0({frames, 1});
  for (int t = 0; t < frames; ++t) f0.at(t, 0) = hz;
  return f0;
}

Array demo_speaker(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Array s({dim});
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.normal();
  return s;
}

VcInput demo_input(const ModelConfig& cfg, int frames, std::uint64_t seed) {
  VcInput in;
  in.content = random_content(frames, cfg.feature_dim, seed);
  in.f0 = flat_f0(frames, 140.0);
  in.speaker = demo_speaker(cfg.vc_speaker_dim, seed + 1);
  return in;
}

}  // namespace

TEST_CASE("stage shapes run base width down to a quarter-frequency bottleneck and back") {
  for (auto [frames, bins] : std::vector<std::pair<int, int>>{{4, 8}, {9, 16}, {1, 4}}) {
    ModelConfig cfg;
    cfg.vc_freq_bins = bins;
    VcModel vc(cfg);
    CHECK(vc.freq_bins() == bins);

    VcTrace trace;
    Array out = vc.forward(demo_input(cfg, frames, 50 + frames), &trace);
    CHECK(trace.pre_shape == std::vector<int>{96, frames, bins});
    CHECK(trace.bottleneck_shape == std::vector<int>{384, frames, bins / 4});
    CHECK(trace.out_shape == std::vector<int>{96, frames, bins});
    CHECK(out.shape() == std::vector<int>{96, frames, bins});
    CHECK(out.all_finite());

    Array features = vc.readout(out);
    CHECK(features.shape() == std::vector<int>{frames, cfg.feature_dim});
  }
}

TEST_CASE("the frozen generator is bitwise deterministic") {
  ModelConfig cfg;
  VcModel a(cfg);
  VcModel b(cfg);
  VcInput in = demo_input(cfg, 6, 9);
  CHECK(bitwise_equal(a.forward(in), b.forward(in)));
  CHECK(bitwise_equal(a.readout(a.forward(in)), b.readout(b.forward(in))));
}

TEST_CASE("all mixing is frequency-local: one frame cannot reach another") {
  ModelConfig cfg;
  VcModel vc(cfg);
  VcInput in = demo_input(cfg, 7, 33);
  Array base = vc.forward(in);

  VcInput bumped = in;
  bumped.content.at(3, 0) += 1.0;
  bumped.f0.at(3, 0) += 10.0;
  Array out = vc.forward(bumped);

  bool frame3_changed = false;
  for (int c = 0; c < 96; ++c) {
    for (int t = 0; t < 7; ++t) {
      for (int f = 0; f < cfg.vc_freq_bins; ++f) {
        if (t == 3) {
          if (out.at(c, t, f) != base.at(c, t, f)) frame3_changed = true;
        } else {
          CHECK(out.at(c, t, f) == base.at(c, t, f));
        }
      }
    }
  }
  CHECK(frame3_changed);
}

TEST_CASE("the speaker embedding changes the output everywhere") {
  ModelConfig cfg;
  VcModel vc(cfg);
  VcInput in = demo_input(cfg, 5, 44);
  Array base = vc.forward(in);

  VcInput other = in;
  other.speaker = demo_speaker(cfg.vc_speaker_dim, 4444);
  Array out = vc.forward(other);
  CHECK_FALSE(bitwise_equal(out, base));
}

TEST_CASE("malformed conversion inputs are rejected") {
  ModelConfig cfg;
  VcModel vc(cfg);
  VcInput good = demo_input(cfg, 4, 60);
  CHECK_NOTHROW(vc.forward(good));

  VcInput bad = good;
  bad.content = random_content(4, cfg.feature_dim + 2, 61);
  CHECK_THROWS_AS(vc.forward(bad), ShapeError);

  bad = good;
  bad.content = Array({0, cfg.feature_dim});
  CHECK_THROWS_AS(vc.forward(bad), ValidationError);

  bad = good;
  bad.f0 = flat_f0(3, 100.0);
  CHECK_THROWS_AS(vc.forward(bad), ShapeError);

  bad = good;
  bad.f0.at(2, 0) = -5.0;
  CHECK_THROWS_AS(vc.forward(bad), ValidationError);

  bad = good;
  bad.speaker = demo_speaker(cfg.vc_speaker_dim + 1, 62);
  CHECK_THROWS_AS(vc.forward(bad), ShapeError);

  bad = good;
  bad.content.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(vc.forward(bad), ValidationError);

  ModelConfig bad_cfg;
  bad_cfg.vc_freq_bins = 6;
  CHECK_THROWS_AS(VcModel{bad_cfg}, ConfigError);

  Array not_a_map({2, 3});
  CHECK_THROWS_AS(vc.readout(not_a_map), ShapeError);
}

TEST_CASE("conversion manufactures valid records for every requested voice") {
  ModelConfig cfg;
  std::vector<DatasetRecord> real = data_synth(3, 2, 777, cfg);
  std::vector<DatasetRecord> synth = generate_synthetic_corpus(real, 2, 55, cfg);

  REQUIRE(synth.size() == 6);
  std::size_t idx = 0;
  for (std::size_t ri = 0; ri < real.size(); ++ri) {
    for (int s = 0; s < 2; ++s, ++idx) {
      const DatasetRecord& rec = synth[idx];
      CHECK(rec.id == real[ri].id + "_vc" + std::to_string(s));
      CHECK(rec.phonemes == real[ri].phonemes);
      CHECK(rec.speaker_id == 1000 + s);
      CHECK(rec.synthetic);
      REQUIRE(rec.source_id.has_value());
      CHECK(*rec.source_id == real[ri].id);
      CHECK_NOTHROW(validate_record(rec, cfg));
      CHECK_FALSE(bitwise_equal(rec.features, real[ri].features));
    }
  }

  std::vector<DatasetRecord> again = generate_synthetic_corpus(real, 2, 55, cfg);
  for (std::size_t i = 0; i < synth.size(); ++i) {
    CHECK(bitwise_equal(again[i].features, synth[i].features));
    CHECK(again[i].codecs.tokens == synth[i].codecs.tokens);
  }

  CHECK_THROWS_AS(generate_synthetic_corpus(real, 0, 55, cfg), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_corpus({}, 2, 55, cfg), ValidationError);
}
