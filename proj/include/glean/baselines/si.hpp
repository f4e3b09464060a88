#pragma once

#include <functional>
#include <span>
#include <vector>

#include "glean/baselines/rnn.hpp"
#include "glean/pvrnn/train.hpp"

// Stochastic-initial-state model: a deterministic MTRNN whose only latent is z_1, one unit
// per deterministic unit in every layer, with a unit-Gaussian prior. From t = 2 on the
// bottom layer is driven by the previous position (own prediction, or a blend with the
// ground truth during training).

namespace glean::baselines {

struct SiParams : RnnParams {
  static SiParams zeros(const ModelConfig& config);
  static SiParams glorot(const ModelConfig& config, numeric::SeededRng& rng);
};

/// Raw posterior parameters of z_1 for one sequence (length total_d each).
struct InitialState {
  Vector mu;
  Vector sigma;

  static InitialState zeros(const ModelConfig& config);
  bool operator==(const InitialState&) const = default;
};

struct SiTrace {
  RnnTrace rnn;   // outputs are x_1..x_T
  Vector eps;     // noise used for z_1
  Vector mu_q;
  Vector sigma_q;

  int steps() const { return rnn.steps(); }
};

/// Rollout of `steps` outputs. `truth` (steps x dims) supplies the blended input
/// u_t = blend * x_{t-1} + (1 - blend) * truth_{t-1}; pass nullptr for closed loop.
SiTrace si_rollout(const SiParams& params, const ModelConfig& config, const InitialState& a1,
                   std::span<const double> eps, const Matrix* truth, double blend, int steps);

/// KL(q(z_1) || N(0, I)) summed over units.
double si_kld(const SiTrace& trace);

struct SiGradients {
  RnnParams params;
  InitialState initial;
};

/// L = sum_t w_t ||x_t - target_t||^2 / 2 + w_init * KL(q(z_1) || N(0, I)) and its gradient
/// for the sampled path. Returns L.
double si_backward(const SiParams& params, const ModelConfig& config, const SiTrace& trace,
                   const Matrix* truth, double blend, const Matrix& targets,
                   std::span<const double> weights, SiGradients& out);

struct SiTrainOptions {
  double blend = 0.9;
  double clip_norm = 50.0;  // global norm over all gradients, <= 0 disables
  pvrnn::Execution execution = pvrnn::Execution::Parallel;
  std::function<void(int epoch, double loss)> on_epoch;
};

struct SiTrainResult {
  SiParams params;
  std::vector<InitialState> initial;  // one per training sequence
  std::vector<double> history;        // summed loss per epoch, before the update
};

/// Full-batch Adam training over weights and every sequence's initial state, with
/// global-norm clipping before the update. Throws NumericalError on divergence.
SiTrainResult train_si(std::span<const Matrix> dataset, const ModelConfig& config,
                       const SiTrainOptions& options = {});

}  // namespace glean::baselines
