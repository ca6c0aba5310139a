#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace mgrf {

// Deterministic normal generator. mt19937_64 gives the portable uniform
// stream; the Gaussian transform is an explicit Box-Muller so that seeded
// draws are bit-identical across standard libraries (std::normal_distribution
// is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on (0,1]; never returns 0 so log() below is safe.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Rademacher +/-1 with equal probability.
  double sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Eigen::VectorXd sign_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = sign();
    return v;
  }

  double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, m).
  std::uint64_t below(std::uint64_t m) {
    // Rejection-free modulo is fine here: m is tiny relative to 2^64 in all uses.
    return engine_() % m;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// splitmix64 finalizer; decorrelates derived seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent stream for a (seed, purpose) pair. Purposes are small enum-like
// tags so that e.g. prior noise and observation noise never share a stream.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t purpose) {
  return mix64(seed ^ mix64(purpose + 0x632be59bd9b4e019ULL));
}

namespace stream {
inline constexpr std::uint64_t prior_noise = 1;
inline constexpr std::uint64_t obs_noise = 2;
inline constexpr std::uint64_t resim_prior = 3;
inline constexpr std::uint64_t resim_obs = 4;
inline constexpr std::uint64_t probes = 5;
inline constexpr std::uint64_t restarts = 6;
}  // namespace stream

}  // namespace mgrf
