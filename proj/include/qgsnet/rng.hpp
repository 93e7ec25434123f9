#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace qgsnet {

/// Deterministic random generator with explicit stream derivation.
///
/// All randomness in the library flows through this class so that results
/// are reproducible bit-for-bit for a given seed, independent of the
/// standard library's distribution implementations. Substreams are derived
/// from (seed, stream id) pairs, which keeps parallel work deterministic.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into the xoshiro256** state.
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  /// Derives an independent substream from (seed, stream_id).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    std::uint64_t t = stream_id + 0x9e3779b97f4a7c15ULL;
    return Rng(a ^ splitmix64(t));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Eigen::VectorXd normal_vector(int dim, double stddev = 1.0) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = stddev * normal();
    return v;
  }

  /// Uniformly distributed direction on the unit sphere.
  Eigen::VectorXd unit_vector(int dim) {
    Eigen::VectorXd v = normal_vector(dim);
    double n = v.norm();
    while (n < 1e-12) {
      v = normal_vector(dim);
      n = v.norm();
    }
    return v / n;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Stateless mix of two words, used for seed splitting.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace qgsnet
