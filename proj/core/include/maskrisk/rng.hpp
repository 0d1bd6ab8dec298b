#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "maskrisk/types.hpp"

namespace maskrisk {

/// Seeded random stream. Wraps a 64-bit Mersenne Twister with the two
/// distributions the library draws from; everything else (Beta, Bernoulli
/// coins) is built on top of these.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double gamma(double shape);
  double beta(double a, double b);
  std::uint64_t next_u64() { return engine_(); }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Vector normal_vector(Eigen::Index size);
  Vector uniform_vector(Eigen::Index size);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// FNV-1a over the bytes of `text`.
std::uint64_t hash_tag(std::string_view text) noexcept;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Per-task seed derivation. The key (master_seed, experiment_id, p_index,
/// rep_index) is folded through SplitMix64 one component at a time:
///   h0 = mix64(master_seed ^ 0x6d61736b7269736b)
///   h1 = mix64(h0 ^ fnv1a(experiment_id))
///   h2 = mix64(h1 ^ p_index)
///   h3 = mix64(h2 ^ rep_index)
/// and h3 seeds the task's Rng. Tasks therefore never share state and the
/// result of a task does not depend on which worker runs it.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view experiment_id,
                          std::uint64_t p_index, std::uint64_t rep_index) noexcept;

inline Rng derive_stream(std::uint64_t master_seed, std::string_view experiment_id,
                         std::uint64_t p_index, std::uint64_t rep_index) {
  return Rng(derive_seed(master_seed, experiment_id, p_index, rep_index));
}

/// Reserved p_index values for per-instance streams (covariance, signal,
/// design, ...). They sit at the top of the 64-bit range so they never
/// collide with a grid index.
namespace streams {
inline constexpr std::uint64_t kCovariance = ~std::uint64_t{0};
inline constexpr std::uint64_t kSignal = kCovariance - 1;
inline constexpr std::uint64_t kDesign = kCovariance - 2;
inline constexpr std::uint64_t kNoise = kCovariance - 3;
inline constexpr std::uint64_t kEvaluation = kCovariance - 4;
inline constexpr std::uint64_t kContrastSignal = kCovariance - 5;
inline constexpr std::uint64_t kCommonMask = kCovariance - 6;
}  // namespace streams

}  // namespace maskrisk
