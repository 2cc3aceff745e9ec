#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ham/aligner.hpp"
#include "ham/augment.hpp"
#include "ham/checkpoint.hpp"
#include "ham/codec_lm.hpp"
#include "ham/config.hpp"
#include "ham/dataset.hpp"
#include "ham/features.hpp"
#include "ham/optim.hpp"
#include "ham/predictor.hpp"

namespace ham {

// Every trainable module sharing one parameter store and one phoneme
// embedding table. Parameter creation order is fixed by member order, so two
// bundles built from the same config and seed are bitwise identical.
struct ModelBundle {
  ModelConfig cfg;
  ParamStore params;
  Rng init_rng;
  Parameter* phoneme_embedding;
  Aligner aligner;
  Predictor predictor;
  Fuser fuser;
  ArModel ar;
  NarModel nar;

  explicit ModelBundle(const ModelConfig& c, std::uint64_t init_seed = 7);
};

// Moves parameter values (and optionally optimizer state, RNG state, and the
// feature codebook) between bundles and checkpoint files. Parameter names
// and shapes must match exactly.
CheckpointData snapshot(const ModelBundle& bundle, const TrainConfig& tc,
                        const Adam* adam, const std::string& rng_state,
                        const Codebook* codebook);
void restore(ModelBundle& bundle, const CheckpointData& data, Adam* adam);

enum class ModelKind { ar, nar };

struct LossBreakdown {
  std::int64_t step = 0;
  double lr = 0.0;
  double lvs = 0.0;
  double phoneme = 0.0;
  double codecs = 0.0;
  double total = 0.0;  // always the exact double sum lvs + phoneme + codecs
  int sampled_level = 0;  // 0 on autoregressive steps
};

std::string breakdown_to_json(const LossBreakdown& b);

// Joint optimization of the front end (aligner, predictor, fuser, shared
// embedding) with one codec LM at a time. Per step: draw a batch, perturb
// codec inputs with timbre augmentation, compute the three loss components
// (prosody L1, phoneme CE, codec CE plus stop supervision on AR steps), and
// apply Adam under the warmup+cosine schedule. All randomness derives from
// the training seed and step index, so runs replay bitwise.
class Trainer {
 public:
  Trainer(ModelBundle& bundle, const TrainConfig& tc,
          std::vector<DatasetRecord> corpus, int kmeans_restarts = 4);

  const Codebook& codebook() const { return codebook_; }
  void set_codebook(Codebook cb);

  LossBreakdown step(ModelKind kind);

  // Runs `steps` optimization steps, appending one JSON line per step to
  // `log` when given.
  std::vector<LossBreakdown> run(ModelKind kind, std::int64_t steps,
                                 std::ostream* log = nullptr);

  Adam& adam() { return adam_; }
  std::int64_t global_step() const { return global_step_; }
  void set_global_step(std::int64_t s) { global_step_ = s; }
  const std::vector<DatasetRecord>& corpus() const { return corpus_; }

 private:
  struct SampleLoss {
    Var lvs, phoneme, codecs;
  };
  SampleLoss sample_loss(const Fwd& f, ModelKind kind, const DatasetRecord& rec,
                         const Array& refined, const AugmentedSample& aug,
                         int nar_level);

  ModelBundle& bundle_;
  TrainConfig tc_;
  std::vector<DatasetRecord> corpus_;
  Codebook codebook_;
  std::vector<Array> refined_;
  Adam adam_;
  std::int64_t global_step_ = 0;
};

struct EvalResult {
  double q1_accuracy = 0.0;
  std::vector<double> level_accuracy;  // levels 2..Q
  std::int64_t positions = 0;
};

// Teacher-forced greedy token accuracy over a dataset: level 1 through the
// AR model, levels 2..Q through the NAR model given true shallower levels.
EvalResult evaluate_token_accuracy(ModelBundle& bundle, const Codebook& codebook,
                                   const std::vector<DatasetRecord>& records);

struct SynthesisOptions {
  int max_len = 0;  // 0: derived from the phoneme count
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

// Full inference path: predictor LVS -> fuse -> AR level-1 decode -> NAR
// completion of levels 2..Q. `prompt` supplies enrollment acoustics (and its
// text, used to build the enrollment fused sequence).
CodecSequence synthesize(ModelBundle& bundle, const std::vector<int>& phonemes,
                         const DatasetRecord* prompt, const SynthesisOptions& opts);

// Interleaves synthetic and real records in the fixed mixing ratio
// (ten synthetic per three real), preserving each pool's internal order.
std::vector<DatasetRecord> mix_corpus(const std::vector<DatasetRecord>& real,
                                      const std::vector<DatasetRecord>& synthetic,
                                      SyntheticMix ratio = kSyntheticMix);

}  // namespace ham
