#include <doctest.h>

#include <cmath>

#include "../support/certify.hpp"
#include "glean/baselines/fm.hpp"
#include "glean/baselines/si.hpp"
#include "glean/dataset/generator.hpp"
#include "glean/error.hpp"
#include "glean/harness/checkpoint.hpp"

using namespace glean;
using namespace glean::baselines;
using numeric::SeededRng;

namespace {

ModelConfig fm_unit() {
  ModelConfig c;
  c.layers = {{1, 0, 1.0, 0.0}};
  c.output_dim = 1;
  c.seq_len = 2;
  return c;
}

ModelConfig small() {
  ModelConfig c;
  c.layers = {{6, 0, 2.0, 0.0}, {4, 0, 4.0, 0.0}};
  c.output_dim = 2;
  c.seq_len = 30;
  c.epochs = 20;
  c.lr = 0.005;
  return c;
}

std::vector<Matrix> data(int n, std::uint64_t seed) {
  return dataset::positions_of(dataset::generate_dataset(seed, n, dataset::TaskGeometry{}, 0.005));
}

}  // namespace

TEST_CASE("fm_step examples") {
  SUBCASE("zero input from rest predicts the output bias") {
    const auto c = small();
    SeededRng rng(1);
    auto p = FmParams::glorot(c, rng);
    p.output_bias = {0.3, 0.6};
    const auto s = fm_step(pvrnn::CellState::zeros(c), Vector{0.0, 0.0}, p, c);
    for (const auto& h : s.state.h) {
      for (double x : h) CHECK(x == 0.0);
    }
    CHECK(s.x == Vector{0.3, 0.6});
  }
  SUBCASE("single unit hand case") {
    const auto c = fm_unit();
    auto p = FmParams::zeros(c);
    p.input(0, 0) = 1.0;
    const auto s = fm_step(pvrnn::CellState::zeros(c), Vector{0.5}, p, c);
    CHECK(s.state.h[0][0] == 0.5);
    CHECK(s.state.d[0][0] == std::tanh(0.5));
  }
  SUBCASE("deterministic") {
    const auto c = small();
    SeededRng rng(2);
    const auto p = FmParams::glorot(c, rng);
    const auto seq = data(2, 3)[0];
    CHECK(fm_rollout(p, c, seq, 0.9).out == fm_rollout(p, c, seq, 0.9).out);
    CHECK(fm_rollout(p, c, seq, 0.9).out.rows() == 29);
  }
}

TEST_CASE("blend limits") {
  const auto c = small();
  SeededRng rng(3);
  const auto p = FmParams::glorot(c, rng);
  const auto seq = data(2, 4)[1];
  SUBCASE("blend zero is teacher forcing") {
    const auto tr = fm_rollout(p, c, seq, 0.0);
    for (std::size_t s = 0; s < tr.inputs.rows(); ++s) {
      CHECK(tr.inputs(s, 0) == seq(s, 0));
      CHECK(tr.inputs(s, 1) == seq(s, 1));
    }
  }
  SUBCASE("blend one is closed loop") {
    const auto tr = fm_rollout(p, c, seq, 1.0);
    for (std::size_t s = 1; s < tr.inputs.rows(); ++s) {
      CHECK(tr.inputs(s, 0) == tr.out(s - 1, 0));
    }
  }
  SUBCASE("blending a value with itself returns it") {
    SeededRng r(9);
    for (int k = 0; k < 10000; ++k) {
      const double v = r.uniform();
      const double b = r.uniform();
      REQUIRE(b * v + (1.0 - b) * v == doctest::Approx(v).epsilon(1e-15));
    }
  }
}

TEST_CASE("closed-loop training starts from a loss no lower than blended training") {
  auto c = small();
  c.epochs = 5;
  const auto d = data(6, 5);
  FmTrainOptions closed, blended;
  closed.blend = 1.0;
  blended.blend = 0.9;
  const auto a = train_fm(d, c, closed);
  const auto b = train_fm(d, c, blended);
  CHECK(a.history.front() >= b.history.front());
}

TEST_CASE("baseline gradients match finite differences") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto f = testing::check_fm_gradients(seed);
    CHECK_MESSAGE(f.max_relative_error < 1e-4, f.worst);
    const auto s = testing::check_si_gradients(seed);
    CHECK_MESSAGE(s.max_relative_error < 1e-4, s.worst);
  }
}

TEST_CASE("initial-state rollouts after t = 1 depend on z_1 only") {
  const auto c = small();
  SeededRng rng(6);
  const auto p = SiParams::glorot(c, rng);
  auto a1 = InitialState::zeros(c);
  for (double& x : a1.mu) x = 0.3 * rng.normal();
  Vector eps(static_cast<std::size_t>(c.total_d()));
  rng.fill_normal(eps);
  const auto x = si_rollout(p, c, a1, eps, nullptr, 1.0, 30);
  const auto y = si_rollout(p, c, a1, eps, nullptr, 1.0, 30);
  CHECK(x.rnn.out == y.rnn.out);
  Vector other = eps;
  other[0] += 0.5;
  CHECK_FALSE(si_rollout(p, c, a1, other, nullptr, 1.0, 30).rnn.out == x.rnn.out);
  CHECK(si_kld(si_rollout(p, c, InitialState::zeros(c), eps, nullptr, 1.0, 30)) == 0.0);
}

TEST_CASE("baseline training is deterministic and serial equals parallel") {
  const auto c = small();
  const auto d = data(4, 8);
  FmTrainOptions fs, fp;
  fs.execution = pvrnn::Execution::Serial;
  CHECK(train_fm(d, c, fs).params == train_fm(d, c, fp).params);
  SiTrainOptions ss, sp;
  ss.execution = pvrnn::Execution::Serial;
  const auto a = train_si(d, c, ss);
  const auto b = train_si(d, c, sp);
  CHECK(a.params == b.params);
  CHECK(a.initial == b.initial);
  CHECK(a.history == b.history);
}

TEST_CASE("baseline training errors") {
  auto c = small();
  CHECK_THROWS_AS(train_fm(std::vector<Matrix>{Matrix(3, 2)}, c), ConfigError);
  FmTrainOptions bad;
  bad.blend = 1.5;
  CHECK_THROWS_AS(train_fm(data(2, 1), c, bad), ConfigError);
  c.lr = 1e300;
  CHECK_THROWS_AS(train_fm(data(2, 1), c), NumericalError);
  SiTrainOptions unclipped;
  unclipped.clip_norm = 0.0;
  CHECK_THROWS_AS(train_si(data(2, 1), c, unclipped), NumericalError);
}

TEST_CASE("baseline checkpoints round-trip exactly") {
  const auto c = small();
  const auto d = data(2, 2);
  const auto si = train_si(d, c);
  harness::Checkpoint ck;
  ck.kind = harness::ModelKind::SI;
  ck.config = c;
  ck.si = si.params;
  ck.initial = si.initial;
  const auto path = std::filesystem::temp_directory_path() / "glean_unit_si.ck";
  harness::save_checkpoint(path, ck);
  const auto back = harness::load_checkpoint(path);
  CHECK(back.kind == harness::ModelKind::SI);
  CHECK(back.si == si.params);
  CHECK(back.initial == si.initial);

  ck = {};
  ck.kind = harness::ModelKind::FM;
  ck.config = c;
  ck.fm = train_fm(d, c).params;
  harness::save_checkpoint(path, ck);
  CHECK(harness::load_checkpoint(path).fm == ck.fm);
  std::filesystem::remove(path);
}
