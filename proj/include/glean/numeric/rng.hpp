#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>

#include "glean/numeric/matrix.hpp"

namespace glean::numeric {

/// Seeded pseudo-random source with a pinned algorithm.
///
/// Generator: xoshiro256** 1.0 (Blackman & Vigna), state filled from the 64-bit seed by
/// four successive splitmix64 outputs. Uniforms take the top 53 bits of a draw. Normal
/// deviates use the basic Box-Muller transform; each transform yields two deviates, the
/// second is cached and returned by the next call. The stream is therefore a pure
/// function of the seed and the draw index.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  /// Independent stream for a worker or item, derived from a master seed and a path of
  /// indices (e.g. {epoch, sequence}). Same inputs give the same stream on every run.
  static SeededRng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path);
  static std::uint64_t derive_seed(std::uint64_t master,
                                   std::initializer_list<std::uint64_t> path);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  double normal();
  void fill_normal(std::span<double> out);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t& x);

struct GaussianDraw {
  Vector value;
  Vector noise;  // the epsilon that produced value, kept for replay during backprop
};

/// Reparameterised sample mu + sigma * eps with eps ~ N(0, I) from rng.
/// Throws std::invalid_argument when any sigma <= 0 or the shapes differ.
GaussianDraw sample_gaussian(SeededRng& rng, std::span<const double> mu,
                             std::span<const double> sigma);

}  // namespace glean::numeric
