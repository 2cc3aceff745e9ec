#include "ham/dataset.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

#include "ham/features.hpp"
#include "ham/rng.hpp"
#include "ham/rvq.hpp"

namespace ham {

namespace {

using json = nlohmann::ordered_json;

json record_to_json(const DatasetRecord& rec) {
  json features = json::array();
  for (int r = 0; r < rec.features.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < rec.features.cols(); ++c) row.push_back(rec.features.at(r, c));
    features.push_back(std::move(row));
  }
  json codecs = json::array();
  for (const auto& level : rec.codecs.tokens) codecs.push_back(level);
  json j{{"id", rec.id},
         {"speaker_id", rec.speaker_id},
         {"phonemes", rec.phonemes},
         {"features", std::move(features)},
         {"codecs", std::move(codecs)},
         {"synthetic", rec.synthetic}};
  if (rec.source_id.has_value()) j["source_id"] = *rec.source_id;
  return j;
}

DatasetRecord record_from_json(const json& j) {
  DatasetRecord rec;
  rec.id = j.at("id").get<std::string>();
  rec.speaker_id = j.at("speaker_id").get<int>();
  rec.phonemes = j.at("phonemes").get<std::vector<int>>();
  const json& feats = j.at("features");
  int rows = static_cast<int>(feats.size());
  int cols = rows == 0 ? 0 : static_cast<int>(feats.at(0).size());
  Array features({rows, cols});
  for (int r = 0; r < rows; ++r) {
    const json& row = feats.at(static_cast<std::size_t>(r));
    if (static_cast<int>(row.size()) != cols) {
      throw ValidationError("record " + rec.id + ": ragged feature rows");
    }
    for (int c = 0; c < cols; ++c) {
      features.at(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  rec.features = std::move(features);
  for (const json& level : j.at("codecs")) {
    rec.codecs.tokens.push_back(level.get<std::vector<int>>());
  }
  rec.synthetic = j.at("synthetic").get<bool>();
  if (j.contains("source_id")) rec.source_id = j.at("source_id").get<std::string>();
  return rec;
}

}  // namespace

void validate_record(const DatasetRecord& rec, const ModelConfig& cfg) {
  auto fail = [&rec](const std::string& msg) {
    throw ValidationError("record " + rec.id + ": " + msg);
  };
  if (rec.id.empty()) throw ValidationError("record with empty id");
  if (rec.phonemes.empty()) fail("no phonemes");
  for (int ph : rec.phonemes) {
    // The last id is reserved as the end-of-text marker.
    if (ph < 0 || ph >= cfg.phoneme_vocab - 1) {
      fail("phoneme id " + std::to_string(ph) + " outside [0, " +
           std::to_string(cfg.phoneme_vocab - 1) + ")");
    }
  }
  if (rec.features.ndim() != 2 || rec.features.cols() != cfg.feature_dim) {
    fail("feature shape " + rec.features.shape_str() + " does not match dimension " +
         std::to_string(cfg.feature_dim));
  }
  if (rec.features.rows() == 0) fail("no feature frames");
  if (!rec.features.all_finite()) fail("non-finite feature values");
  try {
    rec.codecs.validate(cfg.quantizers, cfg.codebook_size, "codecs");
  } catch (const ValidationError& e) {
    fail(e.what());
  }
  if (rec.codecs.length() == 0) fail("no codec frames");
  if (rec.speaker_id < 0) fail("negative speaker id");
}

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const DatasetRecord& rec : records) {
    out << record_to_json(rec).dump() << "\n";
  }
  if (!out) throw IoError("short write to " + path);
}

std::vector<DatasetRecord> read_dataset(const std::string& path, const ModelConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    DatasetRecord rec;
    try {
      rec = record_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    validate_record(rec, cfg);
    records.push_back(std::move(rec));
  }
  if (records.empty()) {
    throw ValidationError(path + ": dataset holds no records");
  }
  return records;
}

std::vector<DatasetRecord> data_synth(int n_samples, int n_speakers,
                                      std::uint64_t seed, const ModelConfig& cfg,
                                      int min_phonemes, int max_phonemes) {
  if (n_samples <= 0) throw ConfigError("data_synth: n_samples must be positive");
  if (n_speakers <= 0) throw ConfigError("data_synth: n_speakers must be positive");
  if (min_phonemes <= 0 || max_phonemes < min_phonemes) {
    throw ConfigError("data_synth: need 0 < min_phonemes <= max_phonemes");
  }
  ToyCodec codec(cfg);
  std::vector<DatasetRecord> records;
  records.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    Rng rng(mix64(seed, static_cast<std::uint64_t>(i), 0xDA7Aull));
    DatasetRecord rec;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%04d", i);
    rec.id = buf;
    rec.speaker_id = rng.below(n_speakers);
    int T1 = rng.uniform_int(min_phonemes, max_phonemes);
    rec.phonemes.reserve(static_cast<std::size_t>(T1));
    for (int p = 0; p < T1; ++p) {
      // The reserved end-of-text id (the last one) is never drawn.
      rec.phonemes.push_back(rng.below(cfg.phoneme_vocab - 1));
    }
    FeatureSequence feats = synth_features(rec.phonemes, rec.speaker_id,
                                           cfg.frames_per_phoneme,
                                           mix64(seed, static_cast<std::uint64_t>(i)),
                                           cfg);
    rec.codecs = codec.encode(feats.frames);
    rec.features = std::move(feats.frames);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace ham
