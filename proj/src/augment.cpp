#include "ham/augment.hpp"

#include <cmath>

#include "ham/rng.hpp"

namespace ham {

namespace {

constexpr double kMinSegmentFrac = 0.10;
constexpr double kMaxSegmentFrac = 0.30;

AugmentedSample pass_through(const CodecSequence& seq) {
  AugmentedSample out;
  out.input = seq;
  out.original = seq;
  out.target_map.resize(static_cast<std::size_t>(seq.length()));
  for (int i = 0; i < seq.length(); ++i) out.target_map[static_cast<std::size_t>(i)] = i;
  return out;
}

}  // namespace

std::vector<AugmentedSample> augment_batch(const std::vector<CodecSequence>& batch,
                                           double p, std::uint64_t seed) {
  if (p < 0.0 || p > 1.0) {
    throw ConfigError("augment_batch: p must lie in [0, 1], got " + std::to_string(p));
  }
  std::vector<AugmentedSample> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const CodecSequence& seq = batch[i];
    const int T = seq.length();
    const int Q = seq.levels();
    Rng rng(mix64(seed, static_cast<std::uint64_t>(i), 0xA06ull));
    if (T < 2 || rng.uniform() >= p) {
      out.push_back(pass_through(seq));
      continue;
    }
    AugmentedSample aug;
    aug.original = seq;
    bool do_replace = rng.uniform() < 0.5;
    int len = static_cast<int>(
        std::lround(T * rng.uniform(kMinSegmentFrac, kMaxSegmentFrac)));
    len = std::max(1, std::min(len, T - 1));

    if (do_replace) {
      // Donor: another batch member when one exists, otherwise the sample
      // itself (the segments may then coincide; targets stay original).
      std::size_t donor_idx = i;
      if (batch.size() > 1) {
        int pick = rng.below(static_cast<int>(batch.size()) - 1);
        donor_idx = static_cast<std::size_t>(pick >= static_cast<int>(i) ? pick + 1 : pick);
      }
      const CodecSequence& donor = batch[donor_idx];
      len = std::min(len, donor.length());
      int start = rng.below(T - len + 1);
      int donor_start = rng.below(donor.length() - len + 1);
      aug.kind = AugmentKind::replace;
      aug.segment_start = start;
      aug.segment_length = len;
      aug.input = seq;
      for (int l = 0; l < Q; ++l) {
        for (int j = 0; j < len; ++j) {
          aug.input.tokens[static_cast<std::size_t>(l)][static_cast<std::size_t>(start + j)] =
              donor.tokens[static_cast<std::size_t>(l)][static_cast<std::size_t>(donor_start + j)];
        }
      }
      aug.target_map.resize(static_cast<std::size_t>(T));
      for (int j = 0; j < T; ++j) aug.target_map[static_cast<std::size_t>(j)] = j;
    } else {
      int start = rng.below(T - len + 1);
      aug.kind = AugmentKind::duplicate;
      aug.segment_start = start;
      aug.segment_length = len;
      aug.input.tokens.assign(static_cast<std::size_t>(Q), {});
      aug.target_map.clear();
      for (int j = 0; j < start + len; ++j) aug.target_map.push_back(j);
      for (int j = 0; j < len; ++j) aug.target_map.push_back(-1);
      for (int j = start + len; j < T; ++j) aug.target_map.push_back(j);
      for (int l = 0; l < Q; ++l) {
        const auto& src = seq.tokens[static_cast<std::size_t>(l)];
        auto& dst = aug.input.tokens[static_cast<std::size_t>(l)];
        dst.reserve(src.size() + static_cast<std::size_t>(len));
        dst.insert(dst.end(), src.begin(), src.begin() + start + len);
        dst.insert(dst.end(), src.begin() + start, src.begin() + start + len);
        dst.insert(dst.end(), src.begin() + start + len, src.end());
      }
    }
    out.push_back(std::move(aug));
  }
  return out;
}

ArTargets targets_for_training(const AugmentedSample& aug) {
  ArTargets t;
  const int Ti = aug.input.length();
  t.input_tokens = aug.input.level(0);
  t.target_tokens.resize(static_cast<std::size_t>(Ti), 0);
  t.mask.resize(static_cast<std::size_t>(Ti), 0);
  for (int j = 0; j < Ti; ++j) {
    int src = aug.target_map[static_cast<std::size_t>(j)];
    if (src >= 0) {
      t.target_tokens[static_cast<std::size_t>(j)] =
          aug.original.level(0)[static_cast<std::size_t>(src)];
      t.mask[static_cast<std::size_t>(j)] = 1;
    }
  }
  return t;
}

LevelTargets level_targets(const AugmentedSample& aug, int level) {
  if (level < 1 || level > aug.original.levels()) {
    throw ConfigError("level_targets: level " + std::to_string(level) + " outside [1, " +
                      std::to_string(aug.original.levels()) + "]");
  }
  LevelTargets t;
  const int Ti = aug.input.length();
  t.targets.resize(static_cast<std::size_t>(Ti), 0);
  t.mask.resize(static_cast<std::size_t>(Ti), 0);
  const auto& orig = aug.original.level(level - 1);
  for (int j = 0; j < Ti; ++j) {
    int src = aug.target_map[static_cast<std::size_t>(j)];
    if (src >= 0) {
      t.targets[static_cast<std::size_t>(j)] = orig[static_cast<std::size_t>(src)];
      t.mask[static_cast<std::size_t>(j)] = 1;
    }
  }
  return t;
}

StopTargets stop_targets(const AugmentedSample& aug) {
  StopTargets t;
  const int Ti = aug.input.length();
  t.targets.resize(static_cast<std::size_t>(Ti) + 1, 0.0);
  t.mask.resize(static_cast<std::size_t>(Ti) + 1, 0);
  for (int j = 0; j < Ti; ++j) {
    t.mask[static_cast<std::size_t>(j)] =
        aug.target_map[static_cast<std::size_t>(j)] >= 0 ? 1 : 0;
  }
  t.targets[static_cast<std::size_t>(Ti)] = 1.0;
  t.mask[static_cast<std::size_t>(Ti)] = 1;
  return t;
}

}  // namespace ham
