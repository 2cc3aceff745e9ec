#pragma once

#include <cstdint>
#include <vector>

#include "ham/array.hpp"
#include "ham/config.hpp"

namespace ham {

// Frame-level acoustic representation, frames as rows.
struct FeatureSequence {
  Array frames;                 // [T2 x D]
  double frame_rate_hz = 50.0;
};

// Fitted K-Means codebook.
struct Codebook {
  Array centroids;  // [k x D]
  double inertia = 0.0;

  int k() const { return centroids.rows(); }
  int dim() const { return centroids.cols(); }
};

// Deterministic toy features: each phoneme owns a well-separated base vector
// (drawn from the config's feature space seed), each speaker adds a fixed
// offset, and every frame gets small seeded jitter. frames_per_phoneme frames
// per phoneme, so T2 = T1 * frames_per_phoneme.
FeatureSequence synth_features(const std::vector<int>& phonemes, int speaker_id,
                               int frames_per_phoneme, std::uint64_t seed,
                               const ModelConfig& cfg);

// Lloyd iterations seeded by k-means++ starts. Runs `restarts` independent
// fits and keeps the lowest inertia (ties broken toward the earlier restart,
// so the result is independent of evaluation order). Empty clusters are
// reseeded to the point farthest from its assigned centroid. Requires at
// least k points.
Codebook kmeans_fit(const Array& points, int k, int restarts, std::uint64_t seed);

// Index of the nearest centroid per row; ties resolve to the lowest index.
std::vector<int> assign_clusters(const Array& frames, const Codebook& cb);

// Replace each frame with its nearest centroid vector.
Array refine(const Array& frames, const Codebook& cb);

// Sum of squared distances from each point to its nearest centroid.
double inertia_of(const Array& points, const Codebook& cb);

}  // namespace ham
