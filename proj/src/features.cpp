#include "ham/features.hpp"

#include <cmath>
#include <limits>

#include "ham/errors.hpp"
#include "ham/rng.hpp"

namespace ham {

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

struct LloydResult {
  Array centroids;
  double inertia;
};

LloydResult lloyd_once(const Array& points, int k, Rng& rng) {
  const int n = points.rows();
  const int d = points.cols();

  // k-means++ seeding.
  Array centroids({k, d});
  std::vector<double> best_sq(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::infinity());
  int first = rng.below(n);
  for (int c = 0; c < d; ++c) centroids.at(0, c) = points.at(first, c);
  for (int ci = 1; ci < k; ++ci) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double ds = sq_dist(points.data() + static_cast<std::size_t>(i) * d,
                          centroids.data() + static_cast<std::size_t>(ci - 1) * d, d);
      if (ds < best_sq[static_cast<std::size_t>(i)]) {
        best_sq[static_cast<std::size_t>(i)] = ds;
      }
      total += best_sq[static_cast<std::size_t>(i)];
    }
    int pick;
    if (total <= 0.0) {
      // All points coincide with chosen centroids; any point works.
      pick = rng.below(n);
    } else {
      double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += best_sq[static_cast<std::size_t>(i)];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    for (int c = 0; c < d; ++c) centroids.at(ci, c) = points.at(pick, c);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  std::vector<int> counts(static_cast<std::size_t>(k));
  constexpr int kMaxIters = 300;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const double* p = points.data() + static_cast<std::size_t>(i) * d;
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int ci = 0; ci < k; ++ci) {
        double ds = sq_dist(p, centroids.data() + static_cast<std::size_t>(ci) * d, d);
        if (ds < best) {
          best = ds;
          best_c = ci;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best_c) {
        assign[static_cast<std::size_t>(i)] = best_c;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    Array sums({k, d});
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int ci = assign[static_cast<std::size_t>(i)];
      ++counts[static_cast<std::size_t>(ci)];
      for (int c = 0; c < d; ++c) sums.at(ci, c) += points.at(i, c);
    }
    for (int ci = 0; ci < k; ++ci) {
      if (counts[static_cast<std::size_t>(ci)] == 0) {
        // Reseed the empty cluster to the point farthest from its assigned
        // centroid.
        double far = -1.0;
        int far_i = 0;
        for (int i = 0; i < n; ++i) {
          int ai = assign[static_cast<std::size_t>(i)];
          double ds = sq_dist(points.data() + static_cast<std::size_t>(i) * d,
                              centroids.data() + static_cast<std::size_t>(ai) * d, d);
          if (ds > far) {
            far = ds;
            far_i = i;
          }
        }
        for (int c = 0; c < d; ++c) centroids.at(ci, c) = points.at(far_i, c);
        continue;
      }
      double inv = 1.0 / counts[static_cast<std::size_t>(ci)];
      for (int c = 0; c < d; ++c) centroids.at(ci, c) = sums.at(ci, c) * inv;
    }
  }

  double inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* p = points.data() + static_cast<std::size_t>(i) * d;
    double best = std::numeric_limits<double>::infinity();
    for (int ci = 0; ci < k; ++ci) {
      best = std::min(best, sq_dist(p, centroids.data() + static_cast<std::size_t>(ci) * d, d));
    }
    inertia += best;
  }
  return {std::move(centroids), inertia};
}

}  // namespace

FeatureSequence synth_features(const std::vector<int>& phonemes, int speaker_id,
                               int frames_per_phoneme, std::uint64_t seed,
                               const ModelConfig& cfg) {
  if (frames_per_phoneme <= 0) {
    throw ConfigError("frames_per_phoneme must be positive, got " +
                      std::to_string(frames_per_phoneme));
  }
  const int D = cfg.feature_dim;
  const int T1 = static_cast<int>(phonemes.size());
  Array frames({T1 * frames_per_phoneme, D});

  Rng noise(mix64(seed, static_cast<std::uint64_t>(speaker_id), 0x401Eull));
  for (int p = 0; p < T1; ++p) {
    int ph = phonemes[static_cast<std::size_t>(p)];
    if (ph < 0 || ph >= cfg.phoneme_vocab) {
      throw VocabError("synth_features: phoneme id " + std::to_string(ph) +
                       " outside vocabulary of size " +
                       std::to_string(cfg.phoneme_vocab));
    }
    // Base and offset vectors are functions of the feature space seed alone,
    // so every call agrees on the layout of the toy acoustic space.
    Rng base(mix64(cfg.feature_space_seed, static_cast<std::uint64_t>(ph), 0xBA5Eull));
    Rng spk(mix64(cfg.feature_space_seed, static_cast<std::uint64_t>(speaker_id),
                  0x5EA0ull));
    std::vector<double> base_vec(static_cast<std::size_t>(D));
    std::vector<double> spk_vec(static_cast<std::size_t>(D));
    for (int c = 0; c < D; ++c) {
      base_vec[static_cast<std::size_t>(c)] = base.normal() * cfg.feature_base_scale;
      spk_vec[static_cast<std::size_t>(c)] = spk.normal() * cfg.feature_speaker_scale;
    }
    for (int f = 0; f < frames_per_phoneme; ++f) {
      int row = p * frames_per_phoneme + f;
      for (int c = 0; c < D; ++c) {
        frames.at(row, c) = base_vec[static_cast<std::size_t>(c)] +
                            spk_vec[static_cast<std::size_t>(c)] +
                            noise.normal() * cfg.feature_noise_scale;
      }
    }
  }
  return FeatureSequence{std::move(frames)};
}

Codebook kmeans_fit(const Array& points, int k, int restarts, std::uint64_t seed) {
  if (points.ndim() != 2) {
    throw ShapeError("kmeans_fit: points must be [N x D], got " + points.shape_str());
  }
  if (k <= 0) throw ConfigError("kmeans_fit: k must be positive");
  if (restarts <= 0) throw ConfigError("kmeans_fit: restarts must be positive");
  if (points.rows() < k) {
    throw ConfigError("kmeans_fit: " + std::to_string(points.rows()) +
                      " points cannot support k=" + std::to_string(k));
  }
  if (!points.all_finite()) {
    throw ValidationError("kmeans_fit: points contain non-finite values");
  }

  LloydResult best{Array(), std::numeric_limits<double>::infinity()};
  for (int r = 0; r < restarts; ++r) {
    Rng rng(mix64(seed, static_cast<std::uint64_t>(r)));
    LloydResult cur = lloyd_once(points, k, rng);
    // Strict less-than keeps the earliest restart on ties, making the result
    // a pure function of (points, k, restarts, seed).
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return Codebook{std::move(best.centroids), best.inertia};
}

std::vector<int> assign_clusters(const Array& frames, const Codebook& cb) {
  if (frames.ndim() != 2 || frames.cols() != cb.dim()) {
    throw ShapeError("assign_clusters: frames " + frames.shape_str() +
                     " vs centroids " + cb.centroids.shape_str());
  }
  const int n = frames.rows(), d = frames.cols(), k = cb.k();
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* p = frames.data() + static_cast<std::size_t>(i) * d;
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (int ci = 0; ci < k; ++ci) {
      double ds = sq_dist(p, cb.centroids.data() + static_cast<std::size_t>(ci) * d, d);
      if (ds < best) {
        best = ds;
        best_c = ci;
      }
    }
    out[static_cast<std::size_t>(i)] = best_c;
  }
  return out;
}

Array refine(const Array& frames, const Codebook& cb) {
  std::vector<int> assign = assign_clusters(frames, cb);
  Array out({frames.rows(), frames.cols()});
  for (int i = 0; i < frames.rows(); ++i) {
    int ci = assign[static_cast<std::size_t>(i)];
    for (int c = 0; c < frames.cols(); ++c) out.at(i, c) = cb.centroids.at(ci, c);
  }
  return out;
}

double inertia_of(const Array& points, const Codebook& cb) {
  std::vector<int> assign = assign_clusters(points, cb);
  double s = 0.0;
  for (int i = 0; i < points.rows(); ++i) {
    s += sq_dist(points.data() + static_cast<std::size_t>(i) * points.cols(),
                 cb.centroids.data() +
                     static_cast<std::size_t>(assign[static_cast<std::size_t>(i)]) *
                         points.cols(),
                 points.cols());
  }
  return s;
}

}  // namespace ham
