#include "glean/numeric/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "glean/error.hpp"

namespace glean::numeric {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t SeededRng::derive_seed(std::uint64_t master,
                                     std::initializer_list<std::uint64_t> path) {
  std::uint64_t x = master;
  std::uint64_t out = splitmix64(x);
  for (std::uint64_t p : path) {
    x = out ^ (p * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    out = splitmix64(x);
  }
  return out;
}

SeededRng SeededRng::derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return SeededRng(derive_seed(master, path));
}

std::uint64_t SeededRng::next_u64() {
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

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

int SeededRng::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

double SeededRng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

void SeededRng::fill_normal(std::span<double> out) {
  for (double& x : out) x = normal();
}

GaussianDraw sample_gaussian(SeededRng& rng, std::span<const double> mu,
                             std::span<const double> sigma) {
  if (mu.size() != sigma.size()) throw DimensionError("sample_gaussian: mu/sigma size mismatch");
  GaussianDraw draw{Vector(mu.size()), Vector(mu.size())};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("sample_gaussian: sigma must be > 0");
  }
  rng.fill_normal(draw.noise);
  for (std::size_t i = 0; i < mu.size(); ++i) draw.value[i] = mu[i] + sigma[i] * draw.noise[i];
  return draw;
}

}  // namespace glean::numeric
