#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bounce {

/// splitmix64 finalizer; used to decorrelate seeds for substreams.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream. All stochastic code in the library draws
/// from an explicitly passed Rng, so every pipeline is reproducible from a
/// single master seed. fork(i) derives an independent stream for trial i,
/// which keeps results identical regardless of worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_seed_(seed), gen_(mix_seed(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Consumes exactly two uniforms per call
  /// so stream advancement is predictable.
  double gauss() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Independent substream; does not disturb this stream's state.
  Rng fork(std::uint64_t stream) const {
    return Rng(mix_seed(base_seed_ ^ mix_seed(stream + 1)));
  }

  std::uint64_t base_seed() const { return base_seed_; }

 private:
  std::uint64_t base_seed_;
  std::mt19937_64 gen_;
};

}  // namespace bounce
