#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ham/errors.hpp"
#include "ham/pipeline.hpp"
#include "ham/vc.hpp"
#include "test_support.hpp"

using namespace ham;
using test::bitwise_equal;

namespace {

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.embedding_dim = 16;
  cfg.d_model = 16;
  cfg.ffn_dim = 32;
  cfg.heads = 2;
  cfg.n_ar_blocks = 1;
  cfg.n_nar_blocks = 1;
  cfg.aligner.n_blocks = 1;
  cfg.aligner.hidden = 16;
  cfg.aligner.heads = 2;
  cfg.feature_dim = 8;
  cfg.codebook_size = 48;
  cfg.quantizers = 4;
  cfg.kmeans_k = 8;
  cfg.max_positions = 256;
  return cfg;
}

TrainConfig short_tc(std::int64_t steps) {
  TrainConfig tc;
  tc.steps = steps;
  tc.total_steps = steps;
  tc.warmup_steps = std::max<std::int64_t>(1, steps / 10);
  tc.batch_size = 4;
  tc.seed = 321;
  return tc;
}

bool same_breakdown(const LossBreakdown& a, const LossBreakdown& b) {
  return a.step == b.step && a.lr == b.lr && a.lvs == b.lvs && a.phoneme == b.phoneme &&
         a.codecs == b.codecs && a.total == b.total && a.sampled_level == b.sampled_level;
}

}  // namespace

TEST_CASE("bundles built from one config and seed are bitwise identical") {
  ModelConfig cfg = small_cfg();
  ModelBundle a(cfg, 99);
  ModelBundle b(cfg, 99);
  REQUIRE(a.params.all().size() == b.params.all().size());
  for (std::size_t i = 0; i < a.params.all().size(); ++i) {
    CHECK(a.params.all()[i]->name == b.params.all()[i]->name);
    CHECK(bitwise_equal(a.params.all()[i]->value, b.params.all()[i]->value));
  }

  ModelBundle c(cfg, 100);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.all().size(); ++i) {
    if (!bitwise_equal(a.params.all()[i]->value, c.params.all()[i]->value)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("every reported total is the exact sum of its three components") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(6, 2, 11, cfg);

  for (ModelKind kind : {ModelKind::ar, ModelKind::nar}) {
    ModelBundle bundle(cfg, 7);
    Trainer trainer(bundle, short_tc(8), corpus, 2);
    for (const LossBreakdown& b : trainer.run(kind, 8)) {
      CHECK(b.total == b.lvs + b.phoneme + b.codecs);
      CHECK(std::isfinite(b.total));
      if (kind == ModelKind::ar) {
        CHECK(b.sampled_level == 0);
      } else {
        CHECK(b.sampled_level >= 2);
        CHECK(b.sampled_level <= cfg.quantizers);
      }
    }
  }
}

TEST_CASE("the learning-rate trace follows the schedule pointwise") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(5, 2, 12, cfg);
  ModelBundle bundle(cfg, 7);
  TrainConfig tc = short_tc(12);
  Trainer trainer(bundle, tc, corpus, 2);
  std::vector<LossBreakdown> trace = trainer.run(ModelKind::ar, 12);
  REQUIRE(trace.size() == 12);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].step == static_cast<std::int64_t>(i));
    CHECK(trace[i].lr == lr_at(static_cast<std::int64_t>(i), tc.warmup_steps, tc.base_lr,
                               tc.total_steps));
  }
}

TEST_CASE("training replays bitwise from the same seed") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(6, 2, 13, cfg);

  ModelBundle b1(cfg, 7);
  Trainer t1(b1, short_tc(10), corpus, 2);
  std::vector<LossBreakdown> r1 = t1.run(ModelKind::ar, 10);

  ModelBundle b2(cfg, 7);
  Trainer t2(b2, short_tc(10), corpus, 2);
  std::vector<LossBreakdown> r2 = t2.run(ModelKind::ar, 10);

  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) CHECK(same_breakdown(r1[i], r2[i]));
  for (std::size_t i = 0; i < b1.params.all().size(); ++i) {
    CHECK(bitwise_equal(b1.params.all()[i]->value, b2.params.all()[i]->value));
  }

  SynthesisOptions opts;
  opts.temperature = 1.0;
  opts.seed = 5;
  opts.max_len = 12;
  std::vector<int> text{1, 5, 9, 2};
  CodecSequence s1 = synthesize(b1, text, nullptr, opts);
  CodecSequence s2 = synthesize(b2, text, nullptr, opts);
  CHECK(s1.tokens == s2.tokens);
}

TEST_CASE("a restored snapshot continues exactly where the run left off") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(6, 2, 14, cfg);
  TrainConfig tc = short_tc(10);

  ModelBundle continuous(cfg, 7);
  Trainer ct(continuous, tc, corpus, 2);
  std::vector<LossBreakdown> full = ct.run(ModelKind::ar, 10);

  ModelBundle first_half(cfg, 7);
  Trainer t1(first_half, tc, corpus, 2);
  t1.run(ModelKind::ar, 5);
  CheckpointData snap = snapshot(first_half, tc, &t1.adam(), "", &t1.codebook());

  ModelBundle second_half(cfg, 1234);  // different init, fully overwritten
  Trainer t2(second_half, tc, corpus, 2);
  restore(second_half, snap, &t2.adam());
  t2.set_codebook(*snap.codebook);
  t2.set_global_step(5);
  std::vector<LossBreakdown> tail = t2.run(ModelKind::ar, 5);

  REQUIRE(tail.size() == 5);
  for (std::size_t i = 0; i < tail.size(); ++i) {
    CHECK(same_breakdown(tail[i], full[i + 5]));
  }
  for (std::size_t i = 0; i < continuous.params.all().size(); ++i) {
    CHECK(bitwise_equal(continuous.params.all()[i]->value,
                        second_half.params.all()[i]->value));
  }
}

TEST_CASE("an untrained model scores near chance token accuracy") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(30, 2, 15, cfg);
  ModelBundle bundle(cfg, 7);
  Trainer trainer(bundle, short_tc(1), corpus, 2);

  EvalResult ev = evaluate_token_accuracy(bundle, trainer.codebook(), corpus);
  CHECK(ev.positions >= 1000);
  const double chance = 1.0 / cfg.codebook_size;
  CHECK(ev.q1_accuracy <= 5.0 * chance);
  REQUIRE(static_cast<int>(ev.level_accuracy.size()) == cfg.quantizers - 1);
  for (double acc : ev.level_accuracy) CHECK(acc <= 5.0 * chance);

  CHECK_THROWS_AS(evaluate_token_accuracy(bundle, trainer.codebook(), {}), ConfigError);
}

TEST_CASE("a short run on a mixed corpus still reduces the loss") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> real = data_synth(4, 2, 16, cfg);
  std::vector<DatasetRecord> synthetic = generate_synthetic_corpus(real, 2, 17, cfg);
  std::vector<DatasetRecord> mixed = mix_corpus(real, synthetic);

  ModelBundle bundle(cfg, 7);
  TrainConfig tc = short_tc(250);
  Trainer trainer(bundle, tc, mixed, 2);
  std::vector<LossBreakdown> trace = trainer.run(ModelKind::ar, 250);
  CHECK(trace.back().total < trace.front().total);
}

TEST_CASE("non-autoregressive training stays finite and visits refinement levels") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(6, 2, 18, cfg);
  ModelBundle bundle(cfg, 7);
  Trainer trainer(bundle, short_tc(100), corpus, 2);
  std::vector<LossBreakdown> trace = trainer.run(ModelKind::nar, 100);

  std::vector<int> level_counts(static_cast<std::size_t>(cfg.quantizers) + 1, 0);
  for (const LossBreakdown& b : trace) {
    CHECK(std::isfinite(b.total));
    REQUIRE(b.sampled_level >= 2);
    REQUIRE(b.sampled_level <= cfg.quantizers);
    ++level_counts[static_cast<std::size_t>(b.sampled_level)];
  }
  for (int lv = 2; lv <= cfg.quantizers; ++lv) {
    CHECK(level_counts[static_cast<std::size_t>(lv)] > 0);
  }
}

TEST_CASE("synthesis returns a full token grid under any decoding settings") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(4, 2, 19, cfg);
  ModelBundle bundle(cfg, 7);
  std::vector<int> text{2, 7, 1, 4, 3};

  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    SynthesisOptions opts;
    opts.temperature = seed == 0 ? 0.0 : 0.8;
    opts.seed = seed;
    CodecSequence out = synthesize(bundle, text, nullptr, opts);
    out.validate(cfg.quantizers, cfg.codebook_size, "synthesize");
    CHECK(out.length() >= 1);
    CHECK(out.length() <= static_cast<int>(text.size()) * cfg.frames_per_phoneme * 2);
  }

  SynthesisOptions opts;
  opts.max_len = 9;
  CodecSequence with_prompt = synthesize(bundle, text, &corpus[0], opts);
  with_prompt.validate(cfg.quantizers, cfg.codebook_size, "synthesize");
  CHECK(with_prompt.length() >= 1);
  CHECK(with_prompt.length() <= 9);

  CHECK_THROWS_AS(synthesize(bundle, {}, nullptr, opts), ValidationError);
}

TEST_CASE("corpus mixing interleaves pools at the fixed ratio in stable order") {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> real = data_synth(6, 2, 20, cfg);
  std::vector<DatasetRecord> synthetic = generate_synthetic_corpus(real, 4, 21, cfg);
  REQUIRE(synthetic.size() == 24);

  std::vector<DatasetRecord> mixed = mix_corpus(real, synthetic);
  CHECK(mixed.size() == real.size() + synthetic.size());

  std::vector<std::string> real_order, synth_order;
  for (const DatasetRecord& rec : mixed) {
    (rec.synthetic ? synth_order : real_order).push_back(rec.id);
  }
  REQUIRE(real_order.size() == real.size());
  REQUIRE(synth_order.size() == synthetic.size());
  for (std::size_t i = 0; i < real.size(); ++i) CHECK(real_order[i] == real[i].id);
  for (std::size_t i = 0; i < synthetic.size(); ++i) CHECK(synth_order[i] == synthetic[i].id);

  // The first window must hold ten synthetic records for three real ones.
  int synth_in_head = 0;
  for (std::size_t i = 0; i < 13 && i < mixed.size(); ++i) {
    if (mixed[i].synthetic) ++synth_in_head;
  }
  CHECK(synth_in_head == 10);

  CHECK_THROWS_AS(mix_corpus(real, synthetic, SyntheticMix{0, 3}), ConfigError);
  CHECK_THROWS_AS(mix_corpus(real, synthetic, SyntheticMix{10, -1}), ConfigError);
}

TEST_CASE("trainer construction validates its corpus") {
  ModelConfig cfg = small_cfg();
  ModelBundle bundle(cfg, 7);
  CHECK_THROWS_AS(Trainer(bundle, short_tc(1), {}, 2), ConfigError);

  std::vector<DatasetRecord> corpus = data_synth(3, 1, 22, cfg);
  corpus[1].features = Array({4, cfg.feature_dim + 1});
  CHECK_THROWS_AS(Trainer(bundle, short_tc(1), corpus, 2), ValidationError);
}
