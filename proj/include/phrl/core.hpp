#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace phrl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct JointLimitError : Error { using Error::Error; };
struct StepTooLargeError : Error { using Error::Error; };
struct SingularError : Error { using Error::Error; };
struct BehindCameraError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };
struct UnknownOpError : Error { using Error::Error; };
struct ChannelMismatchError : Error { using Error::Error; };
struct EpisodeOverError : Error { using Error::Error; };
struct UnreachableRandomizationError : Error { using Error::Error; };
struct NoBlockError : Error { using Error::Error; };
struct NoHoleError : Error { using Error::Error; };
struct EmptyBufferError : Error { using Error::Error; };
struct ModalityMismatchError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct CheckpointError : Error { using Error::Error; };

/// Deterministic random stream. Wraps mt19937_64 with explicit draw
/// methods so every consumer sees the same sequence on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  /// Uniform double in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * canonical();
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  /// Standard normal via Box-Muller (spare cached).
  double normal(double mu = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + sigma * spare_;
    }
    double u1 = canonical();
    double u2 = canonical();
    while (u1 <= 1e-300) u1 = canonical();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mu + sigma * r * std::cos(theta);
  }

  bool bernoulli(double p) { return canonical() < p; }

  uint64_t raw() { return engine_(); }

  /// Child stream decorrelated from this one.
  Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ull); }

 private:
  double canonical() {
    // 53-bit mantissa, exact on every platform
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Mix a base seed with a stream id; used to derive independent
/// per-component streams from one experiment seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace phrl
