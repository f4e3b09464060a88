#include "glean/baselines/si.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glean/error.hpp"
#include "glean/numeric/parallel.hpp"

namespace glean::baselines {

namespace {

constexpr std::uint64_t kInitStream = 0x1a17ULL;

// Reference rows for the input drive: u_1 = 0, u_t blends with truth_{t-1}.
Matrix shifted_reference(const Matrix* truth, int steps, std::size_t dims) {
  Matrix ref(static_cast<std::size_t>(steps), dims);
  if (truth == nullptr) return ref;
  if (static_cast<int>(truth->rows()) < steps - 1 || truth->cols() != dims) {
    throw DimensionError("si: truth sequence too short");
  }
  for (int s = 1; s < steps; ++s) {
    const auto src = truth->row(static_cast<std::size_t>(s - 1));
    std::copy(src.begin(), src.end(), ref.row(static_cast<std::size_t>(s)).begin());
  }
  return ref;
}

}  // namespace

SiParams SiParams::zeros(const ModelConfig& config) {
  SiParams p;
  static_cast<RnnParams&>(p) = RnnParams::zeros(config, true);
  return p;
}

SiParams SiParams::glorot(const ModelConfig& config, numeric::SeededRng& rng) {
  SiParams p = zeros(config);
  glorot_fill(p, rng);
  return p;
}

InitialState InitialState::zeros(const ModelConfig& config) {
  const auto n = static_cast<std::size_t>(config.total_d());
  return {Vector(n, 0.0), Vector(n, 0.0)};
}

SiTrace si_rollout(const SiParams& params, const ModelConfig& config, const InitialState& a1,
                   std::span<const double> eps, const Matrix* truth, double blend, int steps) {
  const auto n = static_cast<std::size_t>(config.total_d());
  if (a1.mu.size() != n || a1.sigma.size() != n || eps.size() != n) {
    throw DimensionError("si_rollout: initial state and noise need total_d entries");
  }
  SiTrace trace;
  trace.eps.assign(eps.begin(), eps.end());
  trace.mu_q.resize(n);
  trace.sigma_q.resize(n);
  Vector z(n);
  for (std::size_t i = 0; i < n; ++i) {
    trace.mu_q[i] = std::tanh(a1.mu[i]);
    trace.sigma_q[i] = std::max(std::exp(a1.sigma[i]), config.sigma_floor);
    z[i] = trace.mu_q[i] + trace.sigma_q[i] * eps[i];
  }
  const auto dims = static_cast<std::size_t>(config.output_dim);
  const Matrix ref = shifted_reference(truth, steps, dims);
  InputDrive drive{nullptr, &ref, truth != nullptr ? blend : 1.0};
  rnn_rollout(params, config, drive, z, steps, trace.rnn);
  return trace;
}

double si_kld(const SiTrace& trace) {
  double sum = 0.0;
  for (std::size_t i = 0; i < trace.mu_q.size(); ++i) {
    const double m = trace.mu_q[i];
    const double s = trace.sigma_q[i];
    sum += -std::log(s) + (m * m + s * s) / 2.0 - 0.5;
  }
  return sum;
}

double si_backward(const SiParams& params, const ModelConfig& config, const SiTrace& trace,
                   const Matrix* truth, double blend, const Matrix& targets,
                   std::span<const double> weights, SiGradients& out) {
  const auto dims = static_cast<std::size_t>(config.output_dim);
  const Matrix ref = shifted_reference(truth, trace.steps(), dims);
  InputDrive drive{nullptr, &ref, truth != nullptr ? blend : 1.0};
  RnnGradients g;
  rnn_backward(params, config, trace.rnn, drive, targets, weights, g);
  out.params = std::move(g.params);

  const double w = config.w_init;
  const std::size_t n = trace.mu_q.size();
  out.initial.mu.assign(n, 0.0);
  out.initial.sigma.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = trace.mu_q[i];
    const double s = trace.sigma_q[i];
    const double g_mu = g.z1[i] + w * m;
    const double g_sig = g.z1[i] * trace.eps[i] + w * (s - 1.0 / s);
    out.initial.mu[i] = g_mu * (1.0 - m * m);
    out.initial.sigma[i] = s > config.sigma_floor ? g_sig * s : 0.0;
  }
  return weighted_squared_error(trace.rnn.out, targets, weights) + w * si_kld(trace);
}

SiTrainResult train_si(std::span<const Matrix> dataset, const ModelConfig& config,
                       const SiTrainOptions& options) {
  check_training_set(dataset, config);
  if (!(options.blend >= 0.0 && options.blend <= 1.0)) throw ConfigError("blend must be in [0, 1]");
  SiTrainResult result;
  auto init_rng = numeric::SeededRng::derive(config.seed, {kInitStream});
  result.params = SiParams::glorot(config, init_rng);
  const std::size_t n = dataset.size();
  result.initial.assign(n, InitialState::zeros(config));
  result.history.reserve(static_cast<std::size_t>(config.epochs));

  ParamsAdam adam(result.params, config.lr);
  std::vector<numeric::AdamState> a_state;
  const auto width = static_cast<std::size_t>(config.total_d());
  for (std::size_t s = 0; s < n; ++s) {
    a_state.emplace_back("A1_mu[" + std::to_string(s) + "]", width, config.lr / 10.0);
    a_state.emplace_back("A1_sigma[" + std::to_string(s) + "]", width, config.lr / 10.0);
  }

  std::vector<SiGradients> grads(n);
  std::vector<double> losses(n, 0.0);
  RnnParams total = RnnParams::zeros(config, true);
  const int T = config.seq_len;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    numeric::for_each_index(n, options.execution == pvrnn::Execution::Parallel, [&](std::size_t i) {
      auto rng = numeric::SeededRng::derive(config.seed, {static_cast<std::uint64_t>(epoch), i});
      Vector eps(width);
      rng.fill_normal(eps);
      const auto w = dropout_weights(T, config.error_dropout, rng);
      const SiTrace trace =
          si_rollout(result.params, config, result.initial[i], eps, &dataset[i], options.blend, T);
      const std::vector<double> ones(static_cast<std::size_t>(T), 1.0);
      losses[i] = weighted_squared_error(trace.rnn.out, dataset[i], ones) +
                  config.w_init * si_kld(trace);
      si_backward(result.params, config, trace, &dataset[i], options.blend, dataset[i], w,
                  grads[i]);
    });

    double loss = 0.0;
    total.set_zero();
    for (std::size_t i = 0; i < n; ++i) {
      loss += losses[i];
      accumulate(total, grads[i].params);
    }
    if (!std::isfinite(loss)) {
      throw NumericalError("train_si: loss diverged at epoch " + std::to_string(epoch));
    }
    result.history.push_back(loss);

    if (options.clip_norm > 0.0) {
      std::vector<std::span<double>> blocks;
      total.for_each_block([&](const std::string&, std::span<double> v) { blocks.push_back(v); });
      for (auto& g : grads) {
        blocks.emplace_back(g.initial.mu);
        blocks.emplace_back(g.initial.sigma);
      }
      numeric::clip_global_norm(blocks, options.clip_norm);
    }
    try {
      adam.step(result.params, total);
      for (std::size_t s = 0; s < n; ++s) {
        numeric::adam_update(a_state[2 * s], result.initial[s].mu, grads[s].initial.mu, config.lr);
        numeric::adam_update(a_state[2 * s + 1], result.initial[s].sigma, grads[s].initial.sigma,
                             config.lr);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("train_si: epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (options.on_epoch) options.on_epoch(epoch, loss);
  }
  return result;
}

}  // namespace glean::baselines
