#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace proxidist {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: stream (base, id) is independent of any other
// stream and of scheduling order, so parallel and serial runs agree.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
  return splitmix64(splitmix64(base) ^ splitmix64(stream_id + 0x9e3779b97f4a7c15ull));
}

// Deterministic generator. Sampling routines are implemented here rather than
// through std::*_distribution so outputs are identical across standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed ^ 0x5deece66dull) {}

  static Rng stream(std::uint64_t base, std::uint64_t stream_id) {
    return Rng(derive_seed(base, stream_id));
  }

  Rng substream(std::uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  double rademacher() { return (gen_() & 1ull) ? 1.0 : -1.0; }

  // Marsaglia polar method; caches the spare deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Sample an index from a small discrete law given cumulative weights.
  int categorical(const double* cumulative, int k) {
    const double u = uniform();
    for (int i = 0; i + 1 < k; ++i) {
      if (u < cumulative[i]) return i;
    }
    return k - 1;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace proxidist
