#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "ham/errors.hpp"

namespace ham {

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b), c);
}

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact across
// platforms by the standard); all distributions are hand-pinned here instead
// of using std::uniform_*_distribution, whose streams are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift mapping of the full 64-bit
  // draw; bias is below 2^-57 for every n used here.
  int below(int n) {
    if (n <= 0) throw ConfigError("Rng::below requires n > 0, got " + std::to_string(n));
    return static_cast<int>((static_cast<unsigned __int128>(bits()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  int uniform_int(int lo, int hi_inclusive) {
    if (hi_inclusive < lo) {
      throw ConfigError("Rng::uniform_int: empty range");
    }
    return lo + below(hi_inclusive - lo + 1);
  }

  // Standard normal via Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = static_cast<double>((bits() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Rng child(std::uint64_t salt) { return Rng(mix64(bits(), salt)); }

  std::string serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (is.fail()) throw ValidationError("bad rng state string");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ham
