#include <doctest.h>

#include <cmath>
#include <limits>

#include "glean/error.hpp"
#include "glean/numeric/adam.hpp"
#include "glean/numeric/finite_diff.hpp"
#include "glean/numeric/matrix.hpp"
#include "glean/numeric/parallel.hpp"
#include "glean/numeric/rng.hpp"

using namespace glean;
using namespace glean::numeric;

TEST_CASE("matvec examples") {
  CHECK(matvec(Matrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  CHECK(matvec(Matrix(2, 2), Vector{5, 7}) == Vector{0, 0});
  CHECK(matvec(Matrix::from_rows({{1, 2}, {3, 4}}), Vector{1, 1}) == Vector{3, 7});
  CHECK_THROWS_AS(matvec(Matrix(2, 3), Vector{1, 2}), DimensionError);
}

TEST_CASE("matrix accumulate kernels agree with hand products") {
  const Matrix W = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  Vector out{1, 1};
  matvec_accumulate(W, Vector{1, 0, -1}, out, 2.0);
  CHECK(out == Vector{1 - 4, 1 - 4});
  Vector back(3, 0.0);
  matvec_transpose_accumulate(W, Vector{1, 1}, back);
  CHECK(back == Vector{5, 7, 9});
  Matrix G(2, 3);
  outer_accumulate(G, Vector{1, 2}, Vector{3, 4, 5});
  CHECK(G == Matrix::from_rows({{3, 4, 5}, {6, 8, 10}}));
  CHECK(dot(Vector{1, 2, 3}, Vector{4, 5, 6}) == 32.0);
  CHECK(squared_norm(Vector{3, 4}) == 25.0);
}

TEST_CASE("kernels keep finite inputs finite") {
  SeededRng rng(3);
  for (int c = 0; c < 10000; ++c) {
    Matrix W(3, 4);
    for (double& x : W.values()) x = 200.0 * rng.uniform() - 100.0;
    Vector v(4);
    for (double& x : v) x = 200.0 * rng.uniform() - 100.0;
    Vector y = matvec(W, v);
    REQUIRE(all_finite(y));
    tanh_inplace(y);
    REQUIRE(all_finite(y));
    Vector e{rng.uniform() * 50.0 - 25.0};
    exp_inplace(e);
    REQUIRE(all_finite(e));
  }
  CHECK_FALSE(all_finite(Vector{1.0, std::numeric_limits<double>::quiet_NaN()}));
}

TEST_CASE("adam examples") {
  SUBCASE("zero gradient leaves the parameter and state alone") {
    AdamState s("w", 2, 0.01);
    s.m = {0.3, -0.2};
    s.v = {0.1, 0.4};
    s.t = 7;
    const Vector p{1.5, -2.0};
    CHECK(adam_step(s, p, Vector{0, 0}, 0.1) == p);
    CHECK(s.t == 7);
  }
  SUBCASE("first step") {
    AdamState s("w", 1, 0.01);
    const Vector p = adam_step(s, Vector{0.0}, Vector{1.0}, 0.1);
    CHECK(p[0] == doctest::Approx(-0.1 / (1.0 + 0.01)).epsilon(1e-12));
    CHECK(s.t == 1);
    CHECK(s.m[0] == doctest::Approx(0.1));
    CHECK(s.v[0] == doctest::Approx(0.001));
  }
  SUBCASE("second step under a constant gradient is no larger") {
    AdamState s("w", 1, 0.01);
    const Vector p1 = adam_step(s, Vector{0.0}, Vector{1.0}, 0.1);
    const Vector p2 = adam_step(s, p1, Vector{1.0}, 0.1);
    const double u1 = std::abs(p1[0]);
    const double u2 = std::abs(p2[0] - p1[0]);
    // Bias correction makes m_hat = v_hat = 1 after every step of a constant unit gradient.
    CHECK(u2 <= u1 * (1.0 + 1e-12));
    CHECK(u2 == doctest::Approx(u1).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient names the block") {
    AdamState s("layer0.recurrent", 1, 0.01);
    Vector p{0.0};
    try {
      adam_update(s, p, Vector{std::numeric_limits<double>::infinity()}, 0.1);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("layer0.recurrent") != std::string::npos);
    }
  }
  SUBCASE("shape mismatch") {
    AdamState s("w", 2, 0.01);
    Vector p{0.0};
    CHECK_THROWS_AS(adam_update(s, p, Vector{1.0}, 0.1), DimensionError);
  }
}

TEST_CASE("adam with zero gradient is the identity for any state") {
  SeededRng rng(11);
  for (int c = 0; c < 10000; ++c) {
    AdamState s("w", 3, 0.001 + rng.uniform());
    for (double& x : s.m) x = rng.normal();
    for (double& x : s.v) x = rng.uniform();
    s.t = rng.uniform_int(0, 100);
    Vector p(3);
    rng.fill_normal(p);
    REQUIRE(adam_step(s, p, Vector(3, 0.0), rng.uniform() + 1e-3) == p);
  }
}

TEST_CASE("global norm clipping") {
  Vector a{60.0, 0.0}, b{80.0};
  std::vector<std::span<double>> blocks{a, b};
  CHECK(clip_global_norm(blocks, 50.0) == doctest::Approx(100.0));
  CHECK(a[0] == doctest::Approx(30.0));
  CHECK(b[0] == doctest::Approx(40.0));

  Vector c{6.0, 8.0};
  std::vector<std::span<double>> small{c};
  CHECK(clip_global_norm(small, 50.0) == doctest::Approx(10.0));
  CHECK(c == Vector{6.0, 8.0});

  SeededRng rng(5);
  for (int k = 0; k < 10000; ++k) {
    Vector g(5), orig;
    for (double& x : g) x = 100.0 * rng.normal();
    orig = g;
    std::vector<std::span<double>> one{g};
    clip_global_norm(one, 50.0);
    REQUIRE(std::sqrt(squared_norm(g)) <= 50.0 * (1.0 + 1e-12));
    const double scale = g[0] / orig[0];
    REQUIRE(scale > 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(g[i] == doctest::Approx(scale * orig[i]));
  }
}

namespace {

// Reference xoshiro256** seeded by splitmix64, written from the published algorithm.
struct Xoshiro {
  std::uint64_t s[4];
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  explicit Xoshiro(std::uint64_t seed) {
    for (auto& v : s) {
      seed += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      v = z ^ (z >> 31);
    }
  }
  std::uint64_t next() {
    const std::uint64_t r = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return r;
  }
};

}  // namespace

TEST_CASE("generator matches the pinned algorithm") {
  std::uint64_t x = 0;
  CHECK(splitmix64(x) == 0xe220a8397b1dcdafULL);
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
    SeededRng rng(seed);
    Xoshiro ref(seed);
    for (int i = 0; i < 1000; ++i) REQUIRE(rng.next_u64() == ref.next());
  }
  SeededRng u(9);
  Xoshiro ref(9);
  CHECK(u.uniform() == static_cast<double>(ref.next() >> 11) * 0x1.0p-53);
}

TEST_CASE("derived streams are reproducible and distinct") {
  CHECK(SeededRng::derive_seed(7, {1, 2}) == SeededRng::derive_seed(7, {1, 2}));
  CHECK(SeededRng::derive_seed(7, {1, 2}) != SeededRng::derive_seed(7, {2, 1}));
  CHECK(SeededRng::derive_seed(7, {1}) != SeededRng::derive_seed(8, {1}));
  auto a = SeededRng::derive(7, {3});
  auto b = SeededRng::derive(7, {3});
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("sample_gaussian examples") {
  SUBCASE("vanishing sigma returns the mean") {
    SeededRng rng(1);
    const auto d = sample_gaussian(rng, Vector{0.3, -0.7}, Vector{1e-12, 1e-12});
    CHECK(std::abs(d.value[0] - 0.3) < 1e-9);
    CHECK(std::abs(d.value[1] + 0.7) < 1e-9);
  }
  SUBCASE("moments of 1e5 standard draws") {
    SeededRng rng(2024);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = sample_gaussian(rng, Vector{0.0}, Vector{1.0}).value[0];
      sum += z;
      sq += z * z;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sd - 1.0) < 0.02);
  }
  SUBCASE("fixed seed repeats bit for bit and the noise replays the value") {
    SeededRng a(77), b(77);
    const Vector mu{0.1, 0.2, 0.3}, sigma{0.5, 1.5, 2.0};
    for (int i = 0; i < 100; ++i) {
      const auto x = sample_gaussian(a, mu, sigma);
      const auto y = sample_gaussian(b, mu, sigma);
      REQUIRE(x.value == y.value);
      for (std::size_t k = 0; k < 3; ++k) REQUIRE(x.value[k] == mu[k] + sigma[k] * x.noise[k]);
    }
  }
  SUBCASE("errors") {
    SeededRng rng(1);
    CHECK_THROWS_AS(sample_gaussian(rng, Vector{0.0}, Vector{0.0}), std::invalid_argument);
    CHECK_THROWS_AS(sample_gaussian(rng, Vector{0.0}, Vector{-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(sample_gaussian(rng, Vector{0.0, 1.0}, Vector{1.0}), DimensionError);
  }
}

TEST_CASE("finite difference examples") {
  auto square = [](std::span<const double> x) { return x[0] * x[0]; };
  CHECK(std::abs(finite_diff_gradient(square, Vector{3.0}, 1e-5)[0] - 6.0) < 1e-6);
  auto constant = [](std::span<const double>) { return 4.2; };
  CHECK(finite_diff_gradient(constant, Vector{1, 2, 3}) == Vector{0, 0, 0});
  auto th = [](std::span<const double> x) { return std::tanh(x[0]); };
  CHECK(std::abs(finite_diff_gradient(th, Vector{0.0})[0] - 1.0) < 1e-8);
  auto bad = [](std::span<const double> x) { return x[0] > 0 ? std::log(-1.0) : 0.0; };
  CHECK_THROWS_AS(finite_diff_gradient(bad, Vector{0.0}), NumericalError);
}

TEST_CASE("finite differences of quadratic forms") {
  SeededRng rng(21);
  for (int c = 0; c < 200; ++c) {
    const int n = rng.uniform_int(1, 6);
    Matrix A(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) A(i, j) = A(j, i) = rng.normal();
    }
    Vector x(n);
    rng.fill_normal(x);
    auto f = [&](std::span<const double> v) { return 0.5 * dot(v, matvec(A, v)); };
    const Vector g = finite_diff_gradient(f, x, 1e-5);
    const Vector exact = matvec(A, x);
    for (int i = 0; i < n; ++i) REQUIRE(relative_error(g[i], exact[i], 1e-6) < 1e-6);
  }
}

TEST_CASE("parallel loop covers every index and rethrows") {
  std::vector<int> hits(1000, 0);
  for_each_index(hits.size(), true, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) REQUIRE(h == 1);
  CHECK_THROWS_AS(for_each_index(10, true,
                                 [](std::size_t i) {
                                   if (i == 4) throw NumericalError("boom");
                                 }),
                  NumericalError);
}
