#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "ham/augment.hpp"
#include "ham/errors.hpp"
#include "ham/rng.hpp"
#include "test_support.hpp"

using namespace ham;

namespace {

CodecSequence make_grid(int levels, int frames, std::uint64_t seed, int codebook = 50) {
  Rng rng(seed);
  CodecSequence seq;
  seq.tokens.assign(static_cast<std::size_t>(levels), {});
  for (auto& row : seq.tokens) {
    for (int t = 0; t < frames; ++t) row.push_back(rng.below(codebook));
  }
  return seq;
}

std::vector<CodecSequence> make_batch(int n, int levels, int frames, std::uint64_t seed) {
  std::vector<CodecSequence> batch;
  for (int i = 0; i < n; ++i) batch.push_back(make_grid(levels, frames, seed + i));
  return batch;
}

}  // namespace

TEST_CASE("perturbation rate follows the per-sample probability") {
  std::vector<CodecSequence> batch = make_batch(1000, 2, 20, 7);
  int touched = 0;
  for (const auto& aug : augment_batch(batch, 0.1, 99)) {
    if (aug.kind != AugmentKind::none) ++touched;
  }
  CHECK(touched >= 70);
  CHECK(touched <= 130);

  for (const auto& aug : augment_batch(batch, 0.0, 99)) {
    CHECK(aug.kind == AugmentKind::none);
    CHECK(aug.input.tokens == aug.original.tokens);
  }

  int kinds_seen[2] = {0, 0};
  for (const auto& aug : augment_batch(batch, 1.0, 99)) {
    CHECK(aug.kind != AugmentKind::none);
    if (aug.kind == AugmentKind::replace) ++kinds_seen[0];
    if (aug.kind == AugmentKind::duplicate) ++kinds_seen[1];
  }
  CHECK(kinds_seen[0] > 300);
  CHECK(kinds_seen[1] > 300);

  CHECK_THROWS_AS(augment_batch(batch, -0.1, 1), ConfigError);
  CHECK_THROWS_AS(augment_batch(batch, 1.5, 1), ConfigError);
}

TEST_CASE("augmentation is deterministic in batch, probability, and seed") {
  std::vector<CodecSequence> batch = make_batch(12, 4, 15, 3);
  auto a = augment_batch(batch, 0.5, 42);
  auto b = augment_batch(batch, 0.5, 42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].kind == b[i].kind);
    CHECK(a[i].input.tokens == b[i].input.tokens);
    CHECK(a[i].target_map == b[i].target_map);
  }

  auto c = augment_batch(batch, 0.5, 43);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].kind != c[i].kind || a[i].input.tokens != c[i].input.tokens) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("replacement keeps length and touches only the swapped window") {
  std::vector<CodecSequence> batch = make_batch(6, 3, 30, 11);
  bool saw_replace = false;
  auto augmented = augment_batch(batch, 1.0, 5);
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const AugmentedSample& aug = augmented[i];
    CHECK(aug.original.tokens == batch[i].tokens);
    if (aug.kind != AugmentKind::replace) continue;
    saw_replace = true;
    CHECK(aug.input.length() == aug.original.length());
    CHECK(aug.segment_length >= 1);
    CHECK(aug.segment_length <= 9);  // 30% of 30
    REQUIRE(aug.segment_start + aug.segment_length <= aug.input.length());

    for (int l = 0; l < aug.input.levels(); ++l) {
      for (int t = 0; t < aug.input.length(); ++t) {
        const bool inside =
            t >= aug.segment_start && t < aug.segment_start + aug.segment_length;
        if (!inside) {
          CHECK(aug.input.level(l)[static_cast<std::size_t>(t)] ==
                aug.original.level(l)[static_cast<std::size_t>(t)]);
        }
      }
    }
    for (int t = 0; t < aug.input.length(); ++t) {
      CHECK(aug.target_map[static_cast<std::size_t>(t)] == t);
    }
  }
  CHECK(saw_replace);
}

TEST_CASE("duplication inserts the segment copy right after itself") {
  std::vector<CodecSequence> batch = make_batch(8, 3, 20, 17);
  bool saw_duplicate = false;
  for (const auto& aug : augment_batch(batch, 1.0, 9)) {
    if (aug.kind != AugmentKind::duplicate) continue;
    saw_duplicate = true;
    const int T = aug.original.length();
    const int s = aug.segment_start;
    const int len = aug.segment_length;
    CHECK(aug.input.length() == T + len);
    REQUIRE(static_cast<int>(aug.target_map.size()) == T + len);

    for (int l = 0; l < aug.input.levels(); ++l) {
      const auto& in = aug.input.level(l);
      const auto& orig = aug.original.level(l);
      for (int t = 0; t < s + len; ++t) CHECK(in[static_cast<std::size_t>(t)] == orig[static_cast<std::size_t>(t)]);
      for (int j = 0; j < len; ++j) {
        CHECK(in[static_cast<std::size_t>(s + len + j)] == orig[static_cast<std::size_t>(s + j)]);
      }
      for (int t = s + len; t < T; ++t) {
        CHECK(in[static_cast<std::size_t>(t + len)] == orig[static_cast<std::size_t>(t)]);
      }
    }
    for (int t = 0; t < s + len; ++t) CHECK(aug.target_map[static_cast<std::size_t>(t)] == t);
    for (int j = 0; j < len; ++j) CHECK(aug.target_map[static_cast<std::size_t>(s + len + j)] == -1);
    for (int t = s + len; t < T; ++t) CHECK(aug.target_map[static_cast<std::size_t>(t + len)] == t);
  }
  CHECK(saw_duplicate);
}

TEST_CASE("training targets stay original and mask out inserted positions") {
  std::vector<CodecSequence> batch = make_batch(10, 4, 18, 23);
  for (const auto& aug : augment_batch(batch, 1.0, 77)) {
    ArTargets ar = targets_for_training(aug);
    const int Ti = aug.input.length();
    REQUIRE(static_cast<int>(ar.input_tokens.size()) == Ti);
    REQUIRE(static_cast<int>(ar.target_tokens.size()) == Ti);
    REQUIRE(static_cast<int>(ar.mask.size()) == Ti);
    CHECK(ar.input_tokens == aug.input.level(0));
    for (int j = 0; j < Ti; ++j) {
      int src = aug.target_map[static_cast<std::size_t>(j)];
      if (src >= 0) {
        CHECK(ar.mask[static_cast<std::size_t>(j)] == 1);
        CHECK(ar.target_tokens[static_cast<std::size_t>(j)] ==
              aug.original.level(0)[static_cast<std::size_t>(src)]);
      } else {
        CHECK(ar.mask[static_cast<std::size_t>(j)] == 0);
      }
    }

    for (int level : {1, 3, 4}) {
      LevelTargets lt = level_targets(aug, level);
      REQUIRE(static_cast<int>(lt.targets.size()) == Ti);
      for (int j = 0; j < Ti; ++j) {
        int src = aug.target_map[static_cast<std::size_t>(j)];
        CHECK(lt.mask[static_cast<std::size_t>(j)] == (src >= 0 ? 1 : 0));
        if (src >= 0) {
          CHECK(lt.targets[static_cast<std::size_t>(j)] ==
                aug.original.level(level - 1)[static_cast<std::size_t>(src)]);
        }
      }
    }
    CHECK_THROWS_AS(level_targets(aug, 0), ConfigError);
    CHECK_THROWS_AS(level_targets(aug, 5), ConfigError);

    StopTargets st = stop_targets(aug);
    REQUIRE(static_cast<int>(st.targets.size()) == Ti + 1);
    CHECK(st.targets[static_cast<std::size_t>(Ti)] == 1.0);
    CHECK(st.mask[static_cast<std::size_t>(Ti)] == 1);
    for (int j = 0; j < Ti; ++j) {
      CHECK(st.targets[static_cast<std::size_t>(j)] == 0.0);
      CHECK(st.mask[static_cast<std::size_t>(j)] ==
            (aug.target_map[static_cast<std::size_t>(j)] >= 0 ? 1 : 0));
    }
  }
}

TEST_CASE("sequences too short to cut pass through untouched") {
  std::vector<CodecSequence> batch;
  batch.push_back(make_grid(2, 1, 5));
  batch.push_back(make_grid(2, 12, 6));
  auto out = augment_batch(batch, 1.0, 3);
  CHECK(out[0].kind == AugmentKind::none);
  CHECK(out[0].input.tokens == batch[0].tokens);
  CHECK(out[0].target_map == std::vector<int>{0});
  CHECK(out[1].kind != AugmentKind::none);
}
