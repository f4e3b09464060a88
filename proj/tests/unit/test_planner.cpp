#include <doctest.h>

#include <cmath>
#include <limits>

#include "glean/baselines/fm.hpp"
#include "glean/baselines/si.hpp"
#include "glean/dataset/generator.hpp"
#include "glean/error.hpp"
#include "glean/planner/planner.hpp"
#include "glean/pvrnn/train.hpp"

using namespace glean;
using namespace glean::planner;
using numeric::SeededRng;

namespace {

ModelConfig small(int T = 8) {
  ModelConfig c;
  c.layers = {{5, 2, 2.0, 0.05}, {3, 1, 4.0, 0.02}};
  c.output_dim = 2;
  c.seq_len = T;
  return c;
}

PlanRequest request(int T, int epochs = 20, int candidates = 3) {
  PlanRequest r;
  r.initial = {0.05, 0.02};
  r.goal = {0.3, 0.7};
  r.horizon = T;
  r.epochs = epochs;
  r.candidates = candidates;
  r.seed = 17;
  return r;
}

}  // namespace

TEST_CASE("estimated lower bound examples") {
  SUBCASE("hand case") {
    ModelConfig c;
    c.layers = {{1, 1, 1.0, 0.01}};
    c.output_dim = 1;
    c.seq_len = 3;
    c.w_init = 0.0;
    auto p = pvrnn::NetworkParams::zeros(c);
    p.output_bias = {0.5};
    // One step carries a KLD of 0.125 against a unit-Gaussian prior at w = 0.01.
    auto a = pvrnn::AdaptationVars::zeros(c, 3);
    a.mu(1, 0) = std::atanh(0.5);
    const auto trace = pvrnn::forward_posterior(p, a, c, pvrnn::Noise::zeros(c, 3));
    PlanRequest r;
    r.initial = {0.4};
    r.goal = {0.6};
    r.horizon = 3;
    const auto b = estimated_lower_bound(trace, r, c);
    CHECK(b.accuracy == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(b.complexity == doctest::Approx(0.00125).epsilon(1e-12));
    CHECK(b.elbo == doctest::Approx(-0.01125).epsilon(1e-12));
    CHECK(b.kld_pq == doctest::Approx(0.125).epsilon(1e-12));
  }
  SUBCASE("met endpoints with posterior equal to prior give zero") {
    ModelConfig c;
    c.layers = {{1, 1, 1.0, 0.01}};
    c.output_dim = 1;
    c.seq_len = 3;
    auto p = pvrnn::NetworkParams::zeros(c);
    p.output_bias = {0.5};
    const auto trace =
        pvrnn::forward_posterior(p, pvrnn::AdaptationVars::zeros(c, 3), c, pvrnn::Noise::zeros(c, 3));
    PlanRequest r;
    r.initial = {0.5};
    r.goal = {0.5};
    r.horizon = 3;
    CHECK(estimated_lower_bound(trace, r, c).elbo == 0.0);
  }
  SUBCASE("interior steps never enter the accuracy") {
    const auto c = small();
    SeededRng rng(2);
    const auto p = pvrnn::NetworkParams::glorot(c, rng);
    auto trace = pvrnn::forward_prior(p, c, rng, 8);
    const auto r = request(8);
    const double before = estimated_lower_bound(trace, r, c).accuracy;
    for (int k = 0; k < 1000; ++k) {
      for (std::size_t t = 1; t + 1 < 8; ++t) {
        trace.x(t, 0) = rng.normal();
        trace.x(t, 1) = rng.normal();
      }
      REQUIRE(estimated_lower_bound(trace, r, c).accuracy == before);
    }
  }
  SUBCASE("length mismatch") {
    const auto c = small();
    SeededRng rng(2);
    const auto p = pvrnn::NetworkParams::glorot(c, rng);
    const auto trace = pvrnn::forward_prior(p, c, rng, 8);
    CHECK_THROWS_AS(estimated_lower_bound(trace, request(7), c), DimensionError);
  }
}

TEST_CASE("best_index picks the largest finite score, lowest index on ties") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(best_index({1.0, 3.0, 3.0, 2.0}) == 1);
  CHECK(best_index({nan, -1.0, nan}) == 1);
  CHECK(best_index({nan, nan}) == -1);
  CHECK(best_index({-std::numeric_limits<double>::infinity(), -5.0}) == 1);
}

TEST_CASE("plan requests are validated") {
  const auto c = small();
  auto r = request(8);
  CHECK_NOTHROW(r.validate(c));
  r.goal = {1.2, 0.5};
  CHECK_THROWS_AS(r.validate(c), ConfigError);
  r = request(7);
  CHECK_THROWS_AS(r.validate(c), ConfigError);
  r = request(8, 10, 0);
  CHECK_THROWS_AS(r.validate(c), ConfigError);
  r = request(8);
  r.rate = 0.0;
  CHECK_THROWS_AS(r.validate(c), ConfigError);
}

TEST_CASE("GLean planning") {
  const auto c = small();
  SeededRng rng(3);
  const auto p = pvrnn::NetworkParams::glorot(c, rng);
  const auto copy = p;
  const auto r = request(8, 30, 4);
  const auto res = plan_glean(p, c, r);

  CHECK(p == copy);
  CHECK(res.trajectory.rows() == 8);
  CHECK(res.epochs_run == 30);
  REQUIRE(res.candidate_scores.size() == 4);
  double best = -std::numeric_limits<double>::infinity();
  for (double s : res.candidate_scores) best = std::max(best, s);
  CHECK(res.lower_bound == best);
  CHECK(res.candidate_scores[static_cast<std::size_t>(res.best_candidate)] == res.lower_bound);
  CHECK(res.kld_pq >= 0.0);

  const auto again = plan_glean(p, c, r);
  CHECK(again.trajectory == res.trajectory);
  PlanOptions serial;
  serial.execution = pvrnn::Execution::Serial;
  CHECK(plan_glean(p, c, r, serial).trajectory == res.trajectory);
}

TEST_CASE("planning moves the endpoints towards the request") {
  auto c = small(10);
  c.epochs = 1500;
  c.lr = 0.01;
  auto data = dataset::positions_of(dataset::generate_dataset(4, 4, dataset::TaskGeometry{}, 0.0));
  for (auto& m : data) {
    Matrix cut(10, 2);
    for (int t = 0; t < 10; ++t) {
      cut(t, 0) = m(t * 29 / 9, 0);
      cut(t, 1) = m(t * 29 / 9, 1);
    }
    m = cut;
  }
  const auto trained = pvrnn::train(data, c);
  PlanRequest r;
  r.initial = {data[0](0, 0), data[0](0, 1)};
  r.goal = {data[0](9, 0), data[0](9, 1)};
  r.horizon = 10;
  r.epochs = 0;
  r.candidates = 2;
  const auto start = plan_glean(trained.params, c, r);
  r.epochs = 300;
  const auto planned = plan_glean(trained.params, c, r);
  CHECK(planned.lower_bound > start.lower_bound);
  CHECK(rmse(planned.trajectory, data[0]) < 0.1);
}

TEST_CASE("every candidate diverging is an error") {
  const auto c = small();
  auto p = pvrnn::NetworkParams::zeros(c);
  p.output_bias[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(plan_glean(p, c, request(8, 5, 2)), NumericalError);
}

TEST_CASE("initial-state planning") {
  auto c = small();
  c.layers = {{5, 0, 2.0, 0.0}, {3, 0, 4.0, 0.0}};
  SeededRng rng(4);
  const auto p = baselines::SiParams::glorot(c, rng);
  SUBCASE("zero epochs give the prior-mean rollout") {
    const auto res = plan_si(p, c, request(8, 0, 1));
    const Vector eps(static_cast<std::size_t>(c.total_d()), 0.0);
    const auto tr = baselines::si_rollout(p, c, baselines::InitialState::zeros(c), eps, nullptr, 1.0, 8);
    CHECK(res.trajectory == tr.rnn.out);
  }
  SUBCASE("repeatable") {
    const auto a = plan_si(p, c, request(8, 20, 3));
    const auto b = plan_si(p, c, request(8, 20, 3));
    CHECK(a.trajectory == b.trajectory);
    CHECK(a.lower_bound == b.lower_bound);
  }
}

TEST_CASE("forward-model planning") {
  auto c = small();
  c.layers = {{5, 0, 2.0, 0.0}, {3, 0, 4.0, 0.0}};
  SeededRng rng(5);
  const auto p = baselines::FmParams::glorot(c, rng);
  SUBCASE("zero epochs keep the replicated initial state") {
    const auto res = plan_fm(p, c, request(8, 0, 1));
    REQUIRE(res.inputs.rows() == 7);
    for (std::size_t s = 0; s < 7; ++s) {
      CHECK(res.inputs(s, 0) == 0.05);
      CHECK(res.inputs(s, 1) == 0.02);
    }
    CHECK(res.lower_bound <= 0.0);
  }
  SUBCASE("optimising inputs improves the endpoint") {
    const auto a = plan_fm(p, c, request(8, 0, 1));
    const auto b = plan_fm(p, c, request(8, 100, 1));
    CHECK(b.lower_bound > a.lower_bound);
  }
}

TEST_CASE("look-ahead") {
  auto c = small();
  SeededRng rng(6);
  const auto pv = pvrnn::NetworkParams::glorot(c, rng);
  Matrix truth(8, 2);
  for (std::size_t t = 0; t < 8; ++t) {
    truth(t, 0) = 0.1 * static_cast<double>(t);
    truth(t, 1) = 0.05 * static_cast<double>(t);
  }
  LookaheadOptions o;
  o.regression_epochs = 5;
  o.initial_epochs = 10;
  const auto g = lookahead_glean(pv, c, truth, o);
  CHECK(g.predictions.rows() == 7);
  CHECK(g.rmse >= 0.0);
  o.window = 100;  // longer than any prefix: clamped
  CHECK(lookahead_glean(pv, c, truth, o).rmse == g.rmse);

  auto cb = c;
  cb.layers = {{5, 0, 2.0, 0.0}, {3, 0, 4.0, 0.0}};
  const auto fm = baselines::FmParams::glorot(cb, rng);
  const auto f = lookahead_fm(fm, cb, truth, o);
  CHECK(f.predictions.rows() == 7);
  Matrix expect = baselines::fm_rollout(fm, cb, truth, o.blend).out;
  CHECK(f.predictions == expect);
  const auto si = baselines::SiParams::glorot(cb, rng);
  CHECK(lookahead_si(si, cb, truth, o).predictions.rows() == 7);
}

TEST_CASE("rmse") {
  const Matrix a = Matrix::from_rows({{0.0, 0.0}, {1.0, 1.0}});
  const Matrix b = Matrix::from_rows({{0.0, 0.0}, {1.0, 1.0}});
  CHECK(rmse(a, b) == 0.0);
  const Matrix c = Matrix::from_rows({{0.01, 0.01}, {1.01, 1.01}});
  CHECK(rmse(a, c) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(rmse(a, Matrix(3, 2)), DimensionError);
}
