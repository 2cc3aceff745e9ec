// End-to-end acceptance gate. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "ham/gradcheck.hpp"
#include "ham/pipeline.hpp"
#include "ham/vc.hpp"
#include "test_support.hpp"

using namespace ham;
using test::bitwise_equal;
using test::exhaustive_kmeans_sse;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int run_criterion(int idx, const char* what, const std::function<Outcome()>& body) {
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail = std::string("exception: ") + e.what();
  }
  std::printf("%s: criterion %d, %s%s%s\n", out.ok ? "PASS" : "FAIL", idx, what,
              out.detail.empty() ? "" : ": ", out.detail.c_str());
  std::fflush(stdout);
  return out.ok ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

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

Array random_array(std::vector<int> shape, std::uint64_t seed, double scale) {
  Rng rng(seed);
  Array a(std::move(shape));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal(0.0, scale);
  return a;
}

std::vector<int> random_ids(int n, int bound, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> ids;
  for (int i = 0; i < n; ++i) ids.push_back(rng.below(bound));
  return ids;
}

Outcome gradient_suite() {
  auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report = run_gradient_suite();
  double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu cases, worst rel err %.3e, %.1f s",
                report.cases.size(), report.worst(), secs);
  bool ok = report.all_pass() && report.worst() <= kGradCheckTolerance && secs < 60.0;
  return {ok, buf};
}

Outcome kmeans_oracle() {
  struct Instance {
    int n, k;
    std::uint64_t seed;
  };
  const std::vector<Instance> instances{{6, 2, 11}, {8, 3, 12}, {7, 3, 13}, {5, 2, 14}, {8, 2, 15}};
  double worst_rel = 0.0;
  for (const Instance& inst : instances) {
    Array pts = random_array({inst.n, 2}, inst.seed, 4.0);
    double opt = exhaustive_kmeans_sse(pts, inst.k);
    Codebook cb = kmeans_fit(pts, inst.k, 10, mix64(inst.seed, 0xACC));
    double rel = (cb.inertia - opt) / std::max(opt, 1e-12);
    if (rel > worst_rel) worst_rel = rel;
    if (cb.inertia + 1e-12 < opt) return {false, "fit beat the exhaustive optimum (oracle bug)"};
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "5 instances, worst relative excess %.3e", worst_rel);
  return {worst_rel <= 1e-9, buf};
}

Outcome shape_contracts() {
  // Aligner: one prosody vector of width 2 per phoneme.
  {
    ModelConfig cfg = small_cfg();
    ModelBundle bundle(cfg, 4);
    for (auto [t1, t2] : std::vector<std::pair<int, int>>{{4, 10}, {9, 3}, {17, 17}}) {
      Tape tape;
      Var out = bundle.aligner.align(Fwd{tape}, random_ids(t1, cfg.phoneme_vocab - 1, t1),
                                     random_array({t2, cfg.feature_dim}, 60 + t2, 1.0));
      if (out.rows() != t1 || out.cols() != 2) {
        return {false, "aligner output is not T1 x 2"};
      }
    }
  }
  // Fused text+prosody width at the full-scale model size.
  {
    ModelConfig cfg = model_preset("paper-s");
    ParamStore ps;
    Rng rng(5);
    Parameter& emb = ps.create("embedding.phoneme",
                               init_normal(rng, {cfg.phoneme_vocab, cfg.embedding_dim}, 0.02));
    Fuser fuser(ps, cfg, &emb, rng);
    for (int t1 : {3, 8, 17}) {
      Tape tape;
      Var fused = fuser.fuse(Fwd{tape}, random_ids(t1, cfg.phoneme_vocab - 1, 70 + t1),
                             tape.leaf(random_array({t1, cfg.lvs_dim}, 80 + t1, 1.0)));
      if (fused.rows() != t1 || fused.cols() != 1024) {
        return {false, "fused width is not 1024"};
      }
    }
  }
  // Codec logits span the full 1024-entry codebook (default acoustic space).
  {
    ModelConfig cfg;
    cfg.embedding_dim = 16;
    cfg.d_model = 16;
    cfg.ffn_dim = 32;
    cfg.heads = 2;
    cfg.n_ar_blocks = 1;
    cfg.n_nar_blocks = 1;
    ParamStore ps;
    Rng rng(6);
    ArModel ar(ps, cfg, rng);
    NarModel nar(ps, cfg, rng);
    for (auto [t1, t3] : std::vector<std::pair<int, int>>{{3, 5}, {6, 12}, {2, 20}}) {
      Tape tape;
      Fwd f{tape};
      Var fused = tape.leaf(random_array({t1, cfg.d_model}, 90 + t3, 0.5));
      ArOutput aout = ar.forward(f, fused, random_ids(t3, cfg.codebook_size, 91 + t3));
      if (aout.codec_logits.cols() != 1024 || aout.codec_logits.rows() != t3) {
        return {false, "AR codec logits are not T3 x 1024"};
      }
      CodecSequence no_prompt;
      NarOutput nout = nar.forward(f, fused, no_prompt,
                                   {random_ids(t3, cfg.codebook_size, 92 + t3)}, 2);
      if (nout.codec_logits.cols() != 1024 || nout.codec_logits.rows() != t3) {
        return {false, "NAR codec logits are not T3 x 1024"};
      }
    }
  }
  // Conversion generator stages: base width, quarter-frequency bottleneck, back.
  {
    for (auto [frames, bins] : std::vector<std::pair<int, int>>{{4, 8}, {9, 16}, {1, 4}}) {
      ModelConfig cfg;
      cfg.vc_freq_bins = bins;
      VcModel vc(cfg);
      VcInput in;
      in.content = random_array({frames, cfg.feature_dim}, 100 + frames, 1.0);
      in.f0 = Array::full({frames, 1}, 120.0);
      in.speaker = random_array({cfg.vc_speaker_dim}, 101 + frames, 1.0);
      VcTrace trace;
      vc.forward(in, &trace);
      bool ok = trace.pre_shape == std::vector<int>{96, frames, bins} &&
                trace.bottleneck_shape == std::vector<int>{384, frames, bins / 4} &&
                trace.out_shape == std::vector<int>{96, frames, bins};
      if (!ok) return {false, "conversion stage shapes are wrong"};
    }
  }
  return {true, "aligner T1x2, fused 1024, codec logits 1024, conversion 96/384/96"};
}

Outcome ar_causality() {
  ModelConfig cfg = small_cfg();
  ParamStore ps;
  Rng rng(7);
  ArModel ar(ps, cfg, rng);
  Array fused = random_array({2, cfg.d_model}, 110, 0.5);
  std::vector<int> toks = random_ids(17, cfg.codebook_size, 111);

  Tape base_tape;
  ArOutput base = ar.forward(Fwd{base_tape}, base_tape.leaf(fused), toks);

  for (int t = 0; t < 17; ++t) {
    std::vector<int> bumped = toks;
    bumped[static_cast<std::size_t>(t)] = (toks[static_cast<std::size_t>(t)] + 1) % cfg.codebook_size;
    Tape tape;
    ArOutput out = ar.forward(Fwd{tape}, tape.leaf(fused), bumped);
    for (int row = 0; row <= t; ++row) {
      for (int col = 0; col < cfg.codebook_size; ++col) {
        if (out.codec_logits.value().at(row, col) != base.codec_logits.value().at(row, col)) {
          char buf[96];
          std::snprintf(buf, sizeof(buf), "perturbing token %d moved logits at row %d", t, row);
          return {false, buf};
        }
      }
    }
  }
  return {true, "all 17 perturbations left earlier logits bitwise unchanged"};
}

Outcome nar_level_sampling() {
  Rng rng(0xACC5);
  std::vector<int> counts(9, 0);
  for (int i = 0; i < 7000; ++i) ++counts[static_cast<std::size_t>(nar_sample_level(rng, 8))];
  const double tol = 4.0 * std::sqrt(6000.0 / 7.0);
  int worst = 0;
  for (int lv = 2; lv <= 8; ++lv) {
    int dev = std::abs(counts[static_cast<std::size_t>(lv)] - 1000);
    if (dev > worst) worst = dev;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "7000 draws, worst deviation %d (allowed %.1f)", worst, tol);
  return {worst <= tol, buf};
}

Outcome augmentation_rate() {
  std::vector<CodecSequence> batch;
  batch.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    Rng rng(mix64(0xAB, static_cast<std::uint64_t>(i)));
    CodecSequence seq;
    seq.tokens.assign(4, {});
    int T = 10 + rng.below(20);
    for (auto& row : seq.tokens) {
      for (int t = 0; t < T; ++t) row.push_back(rng.below(100));
    }
    batch.push_back(std::move(seq));
  }
  std::vector<AugmentedSample> augmented = augment_batch(batch, 0.1, 0xACC6);
  int touched = 0;
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    if (augmented[i].kind != AugmentKind::none) ++touched;
    if (augmented[i].original.tokens != batch[i].tokens) {
      return {false, "an augmented sample's target deviates from the original"};
    }
  }
  double frac = touched / 10000.0;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "augmented fraction %.4f, every target bitwise original", frac);
  return {frac >= 0.09 && frac <= 0.11, buf};
}

Outcome loss_identity() {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(6, 2, 30, cfg);
  TrainConfig tc;
  tc.steps = 25;
  tc.total_steps = 25;
  tc.warmup_steps = 5;
  tc.batch_size = 4;
  tc.seed = 55;
  std::int64_t checked = 0;
  for (ModelKind kind : {ModelKind::ar, ModelKind::nar}) {
    ModelBundle bundle(cfg, 8);
    Trainer trainer(bundle, tc, corpus, 2);
    for (const LossBreakdown& b : trainer.run(kind, 25)) {
      if (b.total != b.lvs + b.phoneme + b.codecs) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "step %lld total diverges from the component sum",
                      static_cast<long long>(b.step));
        return {false, buf};
      }
      ++checked;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%lld steps, total == lvs + phoneme + codecs bitwise",
                static_cast<long long>(checked));
  return {true, buf};
}

Outcome overfit_convergence() {
  auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;  // desk preset
  TrainConfig tc;   // desk preset: 2000 steps, batch 8, lr 1e-3
  std::vector<DatasetRecord> corpus = data_synth(8, 2, 0xACC8, cfg, 12, 12);

  ModelBundle ar_bundle(cfg, mix64(tc.seed, 0xB007));
  Trainer ar_trainer(ar_bundle, tc, corpus);
  std::vector<LossBreakdown> ar_trace = ar_trainer.run(ModelKind::ar, tc.steps);
  double ar_ratio = ar_trace.back().total / ar_trace.front().total;

  EvalResult ev = evaluate_token_accuracy(ar_bundle, ar_trainer.codebook(), corpus);

  CheckpointData snap = snapshot(ar_bundle, tc, nullptr, "", &ar_trainer.codebook());
  ModelBundle nar_bundle(cfg, mix64(tc.seed, 0xB008));
  Trainer nar_trainer(nar_bundle, tc, corpus);
  restore(nar_bundle, snap, nullptr);
  nar_trainer.set_codebook(*snap.codebook);
  std::vector<LossBreakdown> nar_trace = nar_trainer.run(ModelKind::nar, tc.steps);
  double nar_ratio = nar_trace.back().total / nar_trace.front().total;

  double secs = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "AR loss ratio %.4f, q1 accuracy %.4f, NAR loss ratio %.4f, %.0f s",
                ar_ratio, ev.q1_accuracy, nar_ratio, secs);
  bool ok = ar_ratio <= 0.10 && ev.q1_accuracy >= 0.95 && nar_ratio <= 0.10 && secs <= 600.0;
  return {ok, buf};
}

Outcome refinement_effect() {
  ModelConfig cfg;
  std::vector<int> all_phonemes;
  for (int p = 0; p < cfg.phoneme_vocab - 1; ++p) all_phonemes.push_back(p);

  FeatureSequence spk0 = synth_features(all_phonemes, 0, cfg.frames_per_phoneme, 0xACC9, cfg);
  FeatureSequence spk1 = synth_features(all_phonemes, 1, cfg.frames_per_phoneme, 0xACCA, cfg);
  const int frames = spk0.frames.rows();

  Array stacked({frames * 2, cfg.feature_dim});
  for (int i = 0; i < frames; ++i) {
    for (int j = 0; j < cfg.feature_dim; ++j) {
      stacked.at(i, j) = spk0.frames.at(i, j);
      stacked.at(frames + i, j) = spk1.frames.at(i, j);
    }
  }
  Codebook cb = kmeans_fit(stacked, static_cast<int>(all_phonemes.size()), 8, 0xACCB);
  Array r0 = refine(spk0.frames, cb);
  Array r1 = refine(spk1.frames, cb);

  int identical = 0;
  for (int i = 0; i < frames; ++i) {
    bool same = true;
    for (int j = 0; j < cfg.feature_dim; ++j) {
      if (r0.at(i, j) != r1.at(i, j)) {
        same = false;
        break;
      }
    }
    if (same) ++identical;
  }
  auto mean_dist = [&](const Array& a, const Array& b) {
    double total = 0.0;
    for (int i = 0; i < frames; ++i) {
      double sq = 0.0;
      for (int j = 0; j < cfg.feature_dim; ++j) {
        double d = a.at(i, j) - b.at(i, j);
        sq += d * d;
      }
      total += std::sqrt(sq);
    }
    return total / frames;
  };
  double refined_dist = mean_dist(r0, r1);
  double raw_dist = mean_dist(spk0.frames, spk1.frames);
  double frac = static_cast<double>(identical) / frames;
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "identical frames %.4f, cross-speaker distance %.4f -> %.4f", frac,
                raw_dist, refined_dist);
  return {frac >= 0.95 && refined_dist < raw_dist, buf};
}

Outcome determinism() {
  ModelConfig cfg = small_cfg();
  std::vector<DatasetRecord> corpus = data_synth(6, 2, 40, cfg);
  TrainConfig tc;
  tc.steps = 10;
  tc.total_steps = 10;
  tc.warmup_steps = 2;
  tc.batch_size = 4;
  tc.seed = 77;

  std::vector<std::vector<LossBreakdown>> traces;
  std::vector<CodecSequence> generated;
  for (int run = 0; run < 2; ++run) {
    ModelBundle bundle(cfg, 9);
    Trainer trainer(bundle, tc, corpus, 2);
    traces.push_back(trainer.run(ModelKind::ar, 10));
    SynthesisOptions opts;
    opts.temperature = 1.0;
    opts.seed = 123;
    opts.max_len = 15;
    generated.push_back(synthesize(bundle, {1, 4, 2, 7}, &corpus[0], opts));
  }
  for (std::size_t i = 0; i < 10; ++i) {
    const LossBreakdown& a = traces[0][i];
    const LossBreakdown& b = traces[1][i];
    if (a.step != b.step || a.lr != b.lr || a.lvs != b.lvs || a.phoneme != b.phoneme ||
        a.codecs != b.codecs || a.total != b.total || a.sampled_level != b.sampled_level) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "step %zu breakdown differs between runs", i);
      return {false, buf};
    }
  }
  if (generated[0].tokens != generated[1].tokens) {
    return {false, "generated token sequences differ between runs"};
  }
  return {true, "10-step breakdowns and sampled synthesis bitwise identical"};
}

}  // namespace

int main() {
  int failures = 0;
  failures += run_criterion(1, "gradient checks", gradient_suite);
  failures += run_criterion(2, "k-means exhaustive oracle", kmeans_oracle);
  failures += run_criterion(3, "shape contracts", shape_contracts);
  failures += run_criterion(4, "autoregressive causality", ar_causality);
  failures += run_criterion(5, "refinement level sampling", nar_level_sampling);
  failures += run_criterion(6, "augmentation rate and targets", augmentation_rate);
  failures += run_criterion(7, "loss identity", loss_identity);
  failures += run_criterion(8, "overfit convergence", overfit_convergence);
  failures += run_criterion(9, "feature refinement effect", refinement_effect);
  failures += run_criterion(10, "bitwise determinism", determinism);
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
