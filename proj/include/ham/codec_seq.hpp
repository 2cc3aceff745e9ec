#pragma once

#include <string>
#include <vector>

#include "ham/errors.hpp"

namespace ham {

// Grid of acoustic tokens: one row per quantizer level (coarsest first),
// one column per frame.
struct CodecSequence {
  std::vector<std::vector<int>> tokens;

  int levels() const { return static_cast<int>(tokens.size()); }

  int length() const { return tokens.empty() ? 0 : static_cast<int>(tokens[0].size()); }

  const std::vector<int>& level(int i) const {
    return tokens.at(static_cast<std::size_t>(i));
  }

  void validate(int expected_levels, int codebook_size,
                const std::string& context) const {
    if (levels() != expected_levels) {
      throw ValidationError(context + ": expected " + std::to_string(expected_levels) +
                            " quantizer rows, got " + std::to_string(levels()));
    }
    std::size_t len = tokens.empty() ? 0 : tokens[0].size();
    for (const auto& row : tokens) {
      if (row.size() != len) {
        throw ValidationError(context + ": ragged quantizer rows");
      }
      for (int tok : row) {
        if (tok < 0 || tok >= codebook_size) {
          throw ValidationError(context + ": token " + std::to_string(tok) +
                                " outside [0, " + std::to_string(codebook_size) + ")");
        }
      }
    }
  }
};

}  // namespace ham
