#include "glean/pvrnn/train.hpp"

#include <cmath>
#include <string>

#include "glean/error.hpp"
#include "glean/numeric/adam.hpp"
#include "glean/numeric/parallel.hpp"

namespace glean::pvrnn {

namespace {

constexpr std::uint64_t kInitStream = 0x1a17ULL;

void sequence_pass(const NetworkParams& params, const ModelConfig& config,
                   const AdaptationVars& adaptation, const Matrix& target, int epoch,
                   std::size_t index, SequenceWorkspace& ws) {
  const int T = static_cast<int>(target.rows());
  auto rng = numeric::SeededRng::derive(config.seed, {static_cast<std::uint64_t>(epoch), index});
  const Noise noise = Noise::draw(config, T, rng);
  ws.error_weights.assign(static_cast<std::size_t>(T), 1.0);
  if (config.error_dropout > 0.0) {
    for (double& w : ws.error_weights) {
      if (rng.uniform() < config.error_dropout) w = 0.0;
    }
  }
  rollout(params, config, &adaptation, T, T, noise, ws.trace);
  const ElboReport r = elbo(ws.trace, target, config);
  ws.stats = {r.accuracy, r.complexity, r.elbo, r.kld_pq};
  backward(params, config, ws.trace, target, ws.error_weights, ws.grads);
}

void add_into(NetworkParams& acc, const NetworkParams& g) {
  std::vector<std::span<const double>> src;
  g.for_each_block([&](const std::string&, std::span<const double> v) { src.push_back(v); });
  std::size_t i = 0;
  acc.for_each_block([&](const std::string&, std::span<double> v) {
    const auto s = src[i++];
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += s[k];
  });
}

}  // namespace

void batch_gradients(const NetworkParams& params, const ModelConfig& config,
                     std::span<const AdaptationVars> adaptation, std::span<const Matrix> dataset,
                     int epoch, Execution execution, std::vector<SequenceWorkspace>& workspace,
                     BatchGradients& out) {
  const std::size_t n = dataset.size();
  if (adaptation.size() != n) throw DimensionError("batch_gradients: adaptation count mismatch");
  workspace.resize(n);

  numeric::for_each_index(n, execution == Execution::Parallel, [&](std::size_t i) {
    sequence_pass(params, config, adaptation[i], dataset[i], epoch, i, workspace[i]);
  });

  // Reduction in sequence order, identical for both execution modes.
  if (out.params.layers.size() != params.layers.size()) out.params = NetworkParams::zeros(config);
  out.params.set_zero();
  out.adaptation.resize(n);
  out.stats = {};
  for (std::size_t i = 0; i < n; ++i) {
    add_into(out.params, workspace[i].grads.params);
    out.adaptation[i] = workspace[i].grads.adaptation;
    out.stats.accuracy += workspace[i].stats.accuracy;
    out.stats.complexity += workspace[i].stats.complexity;
    out.stats.elbo += workspace[i].stats.elbo;
    out.stats.kld_pq += workspace[i].stats.kld_pq;
  }
}

NetworkParams initial_params(const ModelConfig& config) {
  auto rng = numeric::SeededRng::derive(config.seed, {kInitStream});
  return NetworkParams::glorot(config, rng);
}

TrainResult train(std::span<const Matrix> dataset, const ModelConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (static_cast<int>(dataset[i].rows()) != config.seq_len ||
        static_cast<int>(dataset[i].cols()) != config.output_dim) {
      throw ConfigError("train: sequence " + std::to_string(i) + " is " +
                        std::to_string(dataset[i].rows()) + "x" +
                        std::to_string(dataset[i].cols()) + ", model expects " +
                        std::to_string(config.seq_len) + "x" + std::to_string(config.output_dim));
    }
  }

  TrainResult result;
  result.params = initial_params(config);
  result.adaptation.assign(dataset.size(), AdaptationVars::zeros(config, config.seq_len));
  result.history.reserve(static_cast<std::size_t>(config.epochs));

  const double eps_hat = config.lr / 10.0;
  std::vector<numeric::AdamState> theta_state;
  result.params.for_each_block([&](const std::string& name, std::span<double> v) {
    theta_state.emplace_back(name, v.size(), eps_hat);
  });
  std::vector<numeric::AdamState> a_state;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const std::size_t size = result.adaptation[s].mu.size();
    a_state.emplace_back("A_mu[" + std::to_string(s) + "]", size, eps_hat);
    a_state.emplace_back("A_sigma[" + std::to_string(s) + "]", size, eps_hat);
  }

  std::vector<SequenceWorkspace> workspace;
  BatchGradients grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    batch_gradients(result.params, config, result.adaptation, dataset, epoch, options.execution,
                    workspace, grads);
    const EpochStats& st = grads.stats;
    if (!std::isfinite(st.elbo)) {
      throw NumericalError("train: loss diverged at epoch " + std::to_string(epoch));
    }
    result.history.push_back(st);

    try {
      std::vector<std::span<const double>> g;
      grads.params.for_each_block(
          [&](const std::string&, std::span<const double> v) { g.push_back(v); });
      std::size_t b = 0;
      result.params.for_each_block([&](const std::string&, std::span<double> v) {
        numeric::adam_update(theta_state[b], v, g[b], config.lr);
        ++b;
      });
      for (std::size_t s = 0; s < dataset.size(); ++s) {
        numeric::adam_update(a_state[2 * s], result.adaptation[s].mu.values(),
                             grads.adaptation[s].mu.values(), config.lr);
        numeric::adam_update(a_state[2 * s + 1], result.adaptation[s].sigma.values(),
                             grads.adaptation[s].sigma.values(), config.lr);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("train: epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (options.on_epoch) options.on_epoch(epoch, st);
  }
  return result;
}

}  // namespace glean::pvrnn
