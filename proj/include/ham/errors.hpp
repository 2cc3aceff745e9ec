#pragma once

#include <stdexcept>
#include <string>

namespace ham {

// Domain error taxonomy. The CLI maps UsageError to exit code 1 and every
// other domain error to exit code 2.

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A call broke an operation contract that is not a plain shape mismatch,
// e.g. causal attention with mismatched query/key lengths.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ham
