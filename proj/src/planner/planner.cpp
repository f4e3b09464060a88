#include "glean/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "glean/error.hpp"
#include "glean/numeric/adam.hpp"
#include "glean/numeric/parallel.hpp"

namespace glean::planner {

using pvrnn::AdaptationVars;
using pvrnn::ForwardTrace;
using pvrnn::Noise;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> endpoint_weights(int T) {
  std::vector<double> w(static_cast<std::size_t>(T), 0.0);
  w.front() = 1.0;
  w.back() = 1.0;
  return w;
}

bool finite_matrix(const Matrix& m) { return numeric::all_finite(m.values()); }

// Select the best surviving candidate and move it into a result.
PlanResult select(std::vector<PlanResult>& candidates, const char* who) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(c.lower_bound);
  const int best = best_index(scores);
  if (best < 0) throw NumericalError(std::string(who) + ": every candidate diverged");
  PlanResult out = std::move(candidates[static_cast<std::size_t>(best)]);
  out.candidate_scores = std::move(scores);
  out.best_candidate = best;
  return out;
}

PlanResult dropped() {
  PlanResult r;
  r.lower_bound = kNaN;
  return r;
}

}  // namespace

void PlanRequest::validate(const ModelConfig& config) const {
  auto in_unit = [](const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
  };
  const auto dims = static_cast<std::size_t>(config.output_dim);
  if (initial.size() != dims || goal.size() != dims) {
    throw ConfigError("plan request: states must have " + std::to_string(dims) + " entries");
  }
  if (!in_unit(initial) || !in_unit(goal)) throw ConfigError("plan request: states must lie in [0, 1]");
  if (horizon != config.seq_len) {
    throw ConfigError("plan request: horizon " + std::to_string(horizon) +
                      " does not match the model's " + std::to_string(config.seq_len));
  }
  if (horizon < 2) throw ConfigError("plan request: horizon must be >= 2");
  if (candidates < 1) throw ConfigError("plan request: candidates must be >= 1");
  if (epochs < 0) throw ConfigError("plan request: epochs must be >= 0");
  if (!(rate > 0.0)) throw ConfigError("plan request: rate must be > 0");
}

Matrix PlanRequest::endpoint_target() const {
  Matrix m(static_cast<std::size_t>(horizon), initial.size());
  std::copy(initial.begin(), initial.end(), m.row(0).begin());
  std::copy(goal.begin(), goal.end(), m.row(static_cast<std::size_t>(horizon - 1)).begin());
  return m;
}

pvrnn::ElboReport estimated_lower_bound(const ForwardTrace& trace, const PlanRequest& request,
                                        const ModelConfig& config) {
  if (trace.steps() != request.horizon) {
    throw DimensionError("estimated_lower_bound: trace has " + std::to_string(trace.steps()) +
                         " steps, request horizon is " + std::to_string(request.horizon));
  }
  const auto w = endpoint_weights(request.horizon);
  return pvrnn::evaluate_bound(trace, request.endpoint_target(), w, config);
}

int best_index(const std::vector<double>& scores) {
  int best = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) continue;
    if (best < 0 || scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

// ---------------------------------------------------------------------------

PlanResult plan_glean(const pvrnn::NetworkParams& params, const ModelConfig& config,
                      const PlanRequest& request, const PlanOptions& options) {
  request.validate(config);
  const int T = request.horizon;
  const Matrix target = request.endpoint_target();
  const auto weights = endpoint_weights(T);
  std::vector<PlanResult> cands(static_cast<std::size_t>(request.candidates));

  numeric::for_each_index(cands.size(), options.execution == pvrnn::Execution::Parallel,
                          [&](std::size_t c) {
    auto rng = numeric::SeededRng::derive(request.seed, {static_cast<std::uint64_t>(c)});
    AdaptationVars a = AdaptationVars::zeros(config, T);
    numeric::AdamState s_mu("A_mu", a.mu.size(), request.rate / 10.0);
    numeric::AdamState s_sigma("A_sigma", a.sigma.size(), request.rate / 10.0);
    ForwardTrace trace;
    pvrnn::Gradients grads;
    const pvrnn::BackwardOptions only_a{false, true};
    for (int e = 0; e < request.epochs; ++e) {
      const Noise noise = Noise::draw(config, T, rng);
      pvrnn::rollout(params, config, &a, T, T, noise, trace);
      const double bound = pvrnn::evaluate_bound(trace, target, weights, config).elbo;
      if (!std::isfinite(bound)) {
        cands[c] = dropped();
        return;
      }
      pvrnn::backward(params, config, trace, target, weights, grads, only_a);
      if (!finite_matrix(grads.adaptation.mu) || !finite_matrix(grads.adaptation.sigma)) {
        cands[c] = dropped();
        return;
      }
      numeric::adam_update(s_mu, a.mu.values(), grads.adaptation.mu.values(), request.rate);
      numeric::adam_update(s_sigma, a.sigma.values(), grads.adaptation.sigma.values(), request.rate);
    }
    const Noise noise = Noise::draw(config, T, rng);
    pvrnn::rollout(params, config, &a, T, T, noise, trace);
    const pvrnn::ElboReport r = pvrnn::evaluate_bound(trace, target, weights, config);
    PlanResult& out = cands[c];
    out.trajectory = trace.x;
    out.adaptation = std::move(a);
    out.lower_bound = std::isfinite(r.elbo) && finite_matrix(trace.x) ? r.elbo : kNaN;
    out.kld_pq = r.kld_pq;
    out.epochs_run = request.epochs;
  });
  return select(cands, "plan_glean");
}

PlanResult plan_si(const baselines::SiParams& params, const ModelConfig& config,
                   const PlanRequest& request, const PlanOptions& options) {
  request.validate(config);
  const int T = request.horizon;
  const Matrix target = request.endpoint_target();
  const auto weights = endpoint_weights(T);
  const auto width = static_cast<std::size_t>(config.total_d());
  std::vector<PlanResult> cands(static_cast<std::size_t>(request.candidates));

  numeric::for_each_index(cands.size(), options.execution == pvrnn::Execution::Parallel,
                          [&](std::size_t c) {
    auto rng = numeric::SeededRng::derive(request.seed, {static_cast<std::uint64_t>(c)});
    baselines::InitialState a = baselines::InitialState::zeros(config);
    numeric::AdamState s_mu("A1_mu", width, request.rate / 10.0);
    numeric::AdamState s_sigma("A1_sigma", width, request.rate / 10.0);
    baselines::SiGradients grads;
    Vector eps(width);
    for (int e = 0; e < request.epochs; ++e) {
      rng.fill_normal(eps);
      const auto trace = baselines::si_rollout(params, config, a, eps, nullptr, 1.0, T);
      const double loss =
          baselines::si_backward(params, config, trace, nullptr, 1.0, target, weights, grads);
      if (!std::isfinite(loss) || !numeric::all_finite(grads.initial.mu) ||
          !numeric::all_finite(grads.initial.sigma)) {
        cands[c] = dropped();
        return;
      }
      numeric::adam_update(s_mu, a.mu, grads.initial.mu, request.rate);
      numeric::adam_update(s_sigma, a.sigma, grads.initial.sigma, request.rate);
    }
    const Vector zero(width, 0.0);
    const auto trace = baselines::si_rollout(params, config, a, zero, nullptr, 1.0, T);
    const double err = baselines::weighted_squared_error(trace.rnn.out, target, weights);
    const double kld = baselines::si_kld(trace);
    PlanResult& out = cands[c];
    out.trajectory = trace.rnn.out;
    out.adaptation.mu = Matrix(1, width);
    out.adaptation.sigma = Matrix(1, width);
    std::copy(a.mu.begin(), a.mu.end(), out.adaptation.mu.row(0).begin());
    std::copy(a.sigma.begin(), a.sigma.end(), out.adaptation.sigma.row(0).begin());
    const double bound = -err - config.w_init * kld;
    out.lower_bound = std::isfinite(bound) && finite_matrix(trace.rnn.out) ? bound : kNaN;
    out.kld_pq = kld;
    out.epochs_run = request.epochs;
  });
  return select(cands, "plan_si");
}

PlanResult plan_fm(const baselines::FmParams& params, const ModelConfig& config,
                   const PlanRequest& request, const PlanOptions& options) {
  request.validate(config);
  const int T = request.horizon;
  const auto dims = static_cast<std::size_t>(config.output_dim);
  const auto steps = static_cast<std::size_t>(T - 1);
  // Only the last prediction is scored.
  Matrix target(steps, dims);
  std::copy(request.goal.begin(), request.goal.end(), target.row(steps - 1).begin());
  std::vector<double> weights(steps, 0.0);
  weights.back() = 1.0;
  // Replicated initialisation makes every candidate identical, so one suffices.
  const int n = options.fm_random_init ? request.candidates : 1;
  std::vector<PlanResult> cands(static_cast<std::size_t>(n));

  numeric::for_each_index(cands.size(), options.execution == pvrnn::Execution::Parallel,
                          [&](std::size_t c) {
    Matrix u(steps, dims);
    if (options.fm_random_init) {
      auto rng = numeric::SeededRng::derive(request.seed, {static_cast<std::uint64_t>(c)});
      for (double& v : u.values()) v = rng.uniform();
    } else {
      for (std::size_t s = 0; s < steps; ++s) std::copy(request.initial.begin(), request.initial.end(), u.row(s).begin());
    }
    numeric::AdamState state("inputs", u.size(), request.rate / 10.0);
    baselines::RnnGradients grads;
    const baselines::InputDrive drive{&u, nullptr, 0.0};
    for (int e = 0; e < request.epochs; ++e) {
      const auto trace = baselines::fm_rollout_inputs(params, config, u);
      const double loss = baselines::weighted_squared_error(trace.out, target, weights);
      baselines::rnn_backward(params, config, trace, drive, target, weights, grads);
      if (!std::isfinite(loss) || !finite_matrix(grads.inputs)) {
        cands[c] = dropped();
        return;
      }
      numeric::adam_update(state, u.values(), grads.inputs.values(), request.rate);
    }
    const auto trace = baselines::fm_rollout_inputs(params, config, u);
    PlanResult& out = cands[c];
    out.trajectory = Matrix(static_cast<std::size_t>(T), dims);
    std::copy(request.initial.begin(), request.initial.end(), out.trajectory.row(0).begin());
    for (std::size_t s = 0; s < steps; ++s) {
      std::copy(trace.out.row(s).begin(), trace.out.row(s).end(), out.trajectory.row(s + 1).begin());
    }
    const double err = baselines::weighted_squared_error(trace.out, target, weights);
    out.lower_bound = std::isfinite(err) ? -err : kNaN;
    out.kld_pq = 0.0;
    out.inputs = std::move(u);
    out.epochs_run = request.epochs;
  });
  return select(cands, "plan_fm");
}

// ---------------------------------------------------------------------------

double rmse(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("rmse: shape mismatch");
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

namespace {

void check_truth(const Matrix& truth, const ModelConfig& config) {
  if (static_cast<int>(truth.rows()) != config.seq_len ||
      static_cast<int>(truth.cols()) != config.output_dim) {
    throw DimensionError("lookahead: sequence does not match the model");
  }
}

Matrix tail(const Matrix& m, std::size_t from) {
  Matrix out(m.rows() - from, m.cols());
  for (std::size_t r = from; r < m.rows(); ++r) {
    std::copy(m.row(r).begin(), m.row(r).end(), out.row(r - from).begin());
  }
  return out;
}

int clamp_window(int window, int t) { return window <= 0 || window > t ? t : window; }

}  // namespace

LookaheadResult lookahead_fm(const baselines::FmParams& params, const ModelConfig& config,
                             const Matrix& truth, const LookaheadOptions& options) {
  check_truth(truth, config);
  LookaheadResult r;
  r.predictions = baselines::fm_rollout(params, config, truth, options.blend).out;
  r.rmse = rmse(r.predictions, tail(truth, 1));
  return r;
}

LookaheadResult lookahead_si(const baselines::SiParams& params, const ModelConfig& config,
                             const Matrix& truth, const LookaheadOptions& options) {
  check_truth(truth, config);
  const int T = config.seq_len;
  const int window = clamp_window(options.window, T);
  const auto width = static_cast<std::size_t>(config.total_d());
  std::vector<double> weights(static_cast<std::size_t>(T), 0.0);
  std::fill(weights.begin(), weights.begin() + window, 1.0);

  auto rng = numeric::SeededRng::derive(options.seed, {0x51ULL});
  baselines::InitialState a = baselines::InitialState::zeros(config);
  numeric::AdamState s_mu("A1_mu", width, options.rate / 10.0);
  numeric::AdamState s_sigma("A1_sigma", width, options.rate / 10.0);
  baselines::SiGradients grads;
  Vector eps(width);
  for (int e = 0; e < options.initial_epochs; ++e) {
    rng.fill_normal(eps);
    const auto trace = baselines::si_rollout(params, config, a, eps, &truth, options.blend, T);
    const double loss = baselines::si_backward(params, config, trace, &truth, options.blend, truth, weights, grads);
    if (!std::isfinite(loss)) throw NumericalError("lookahead_si: objective diverged");
    numeric::adam_update(s_mu, a.mu, grads.initial.mu, options.rate);
    numeric::adam_update(s_sigma, a.sigma, grads.initial.sigma, options.rate);
  }
  const Vector zero(width, 0.0);
  const auto trace = baselines::si_rollout(params, config, a, zero, &truth, options.blend, T);
  LookaheadResult r;
  r.predictions = tail(trace.rnn.out, 1);
  r.rmse = rmse(r.predictions, tail(truth, 1));
  return r;
}

LookaheadResult lookahead_glean(const pvrnn::NetworkParams& params, const ModelConfig& config,
                                const Matrix& truth, const LookaheadOptions& options) {
  check_truth(truth, config);
  const int T = config.seq_len;
  const auto dims = static_cast<std::size_t>(config.output_dim);
  AdaptationVars a = AdaptationVars::zeros(config, T);
  numeric::AdamState s_mu("A_mu", a.mu.size(), options.rate / 10.0);
  numeric::AdamState s_sigma("A_sigma", a.sigma.size(), options.rate / 10.0);
  ForwardTrace trace;
  pvrnn::Gradients grads;
  const pvrnn::BackwardOptions only_a{false, true};
  const Noise still = Noise::zeros(config, T);

  LookaheadResult r;
  r.predictions = Matrix(static_cast<std::size_t>(T - 1), dims);
  std::vector<double> weights(static_cast<std::size_t>(T), 0.0);
  for (int t = 1; t < T; ++t) {
    const int window = clamp_window(options.window, t);
    std::fill(weights.begin(), weights.end(), 0.0);
    std::fill(weights.begin() + (t - window), weights.begin() + t, 1.0);
    auto rng = numeric::SeededRng::derive(options.seed, {static_cast<std::uint64_t>(t)});
    for (int e = 0; e < options.regression_epochs; ++e) {
      const Noise noise = Noise::draw(config, T, rng);
      pvrnn::rollout(params, config, &a, t, t, noise, trace);
      pvrnn::backward(params, config, trace, truth, weights, grads, only_a);
      if (!finite_matrix(grads.adaptation.mu) || !finite_matrix(grads.adaptation.sigma)) {
        throw NumericalError("lookahead_glean: gradient diverged at t=" + std::to_string(t));
      }
      numeric::adam_update(s_mu, a.mu.values(), grads.adaptation.mu.values(), options.rate);
      numeric::adam_update(s_sigma, a.sigma.values(), grads.adaptation.sigma.values(), options.rate);
    }
    pvrnn::rollout(params, config, &a, t, t, still, trace);
    const auto x = trace.x.row(static_cast<std::size_t>(t));
    std::copy(x.begin(), x.end(), r.predictions.row(static_cast<std::size_t>(t - 1)).begin());
  }
  r.rmse = rmse(r.predictions, tail(truth, 1));
  return r;
}

}  // namespace glean::planner
