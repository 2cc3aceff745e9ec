#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ham/array.hpp"
#include "ham/features.hpp"

namespace ham {

// Portable binary training snapshot. All integers and doubles are written
// little-endian with explicit widths; doubles round-trip bitwise.
struct CheckpointData {
  std::string model_config_json;
  std::string train_config_json;
  std::vector<std::pair<std::string, Array>> params;
  bool has_optimizer = false;
  std::int64_t adam_step_count = 0;
  std::vector<std::tuple<std::string, Array, Array>> adam_moments;  // name, m, v
  std::string rng_state;
  std::optional<Codebook> codebook;
};

void write_checkpoint(const std::string& path, const CheckpointData& data);

// Throws ValidationError on bad magic, version, or truncation.
CheckpointData read_checkpoint(const std::string& path);

}  // namespace ham
