#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ham/array.hpp"
#include "ham/codec_seq.hpp"
#include "ham/config.hpp"

namespace ham {

// One training sample: text as phoneme ids, frame features, acoustic tokens.
struct DatasetRecord {
  std::string id;
  std::vector<int> phonemes;  // T1 ids; the reserved end-of-text id never appears
  Array features;             // [T2 x D]
  CodecSequence codecs;       // Q x T3
  int speaker_id = 0;
  bool synthetic = false;
  std::optional<std::string> source_id;
};

// Throws ValidationError naming the record id and offending field.
void validate_record(const DatasetRecord& rec, const ModelConfig& cfg);

// JSON-lines files, one record per line, keys in fixed order so identical
// inputs produce byte-identical files.
void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(const std::string& path, const ModelConfig& cfg);

// Deterministic toy corpus: random phoneme strings, per-sample speaker,
// synthesized features, tokens from the frozen residual codec.
std::vector<DatasetRecord> data_synth(int n_samples, int n_speakers,
                                      std::uint64_t seed, const ModelConfig& cfg,
                                      int min_phonemes = 8, int max_phonemes = 16);

}  // namespace ham
