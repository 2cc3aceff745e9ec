#pragma once

#include <cstdint>
#include <vector>

#include "ham/codec_seq.hpp"

namespace ham {

enum class AugmentKind { none, replace, duplicate };

// One batch member after token-level perturbation. `input` feeds the model;
// `original` is what the losses supervise against. target_map sends each
// input position to the original position it must predict, or -1 for
// inserted positions that are excluded from every loss.
struct AugmentedSample {
  CodecSequence input;
  CodecSequence original;
  AugmentKind kind = AugmentKind::none;
  int segment_start = 0;
  int segment_length = 0;
  std::vector<int> target_map;
};

// Per-sample coin with probability p selects a sample for perturbation, then
// an even coin picks the variant: `replace` swaps a segment (10..30% of the
// length) for an equally long donor segment from another batch member across
// all quantizer levels; `duplicate` re-inserts a copy of a segment right
// after itself. Targets always remain the untouched original. Samples
// shorter than 2 frames pass through. Fully deterministic in (batch, p, seed).
std::vector<AugmentedSample> augment_batch(const std::vector<CodecSequence>& batch,
                                           double p, std::uint64_t seed);

// Level-1 teacher-forcing view: model input tokens, aligned original targets
// (0 where masked), and the loss mask.
struct ArTargets {
  std::vector<int> input_tokens;
  std::vector<int> target_tokens;
  std::vector<std::uint8_t> mask;
};

ArTargets targets_for_training(const AugmentedSample& aug);

// Aligned original targets for one quantizer level (1-based), with mask.
struct LevelTargets {
  std::vector<int> targets;
  std::vector<std::uint8_t> mask;
};

LevelTargets level_targets(const AugmentedSample& aug, int level);

// Stop-head supervision: one row per input position plus a final "end after
// everything" row. Inserted positions are masked out.
struct StopTargets {
  std::vector<double> targets;
  std::vector<std::uint8_t> mask;
};

StopTargets stop_targets(const AugmentedSample& aug);

}  // namespace ham
