#pragma once

#include <functional>
#include <span>
#include <vector>

#include "glean/baselines/rnn.hpp"
#include "glean/pvrnn/model.hpp"
#include "glean/pvrnn/train.hpp"

// Forward model: a deterministic MTRNN that maps the current position u_t (sensory and
// motor space coincide on the 2D task) to a prediction of the next position.

namespace glean::baselines {

struct FmParams : RnnParams {
  static FmParams zeros(const ModelConfig& config);
  static FmParams glorot(const ModelConfig& config, numeric::SeededRng& rng);
};

struct FmStep {
  pvrnn::CellState state;
  Vector x;  // prediction of the next position
};

/// One step: the PV-RNN cell with W_zd z replaced by U u on the bottom layer.
FmStep fm_step(const pvrnn::CellState& prev, std::span<const double> u, const FmParams& params,
               const ModelConfig& config);

/// Predictions of x_2..x_T for a T-step sequence under the given blend: u_1 = x_1 and
/// u_t = blend * prediction_t + (1 - blend) * x_t. Blend 0 is one-step teacher forcing.
RnnTrace fm_rollout(const FmParams& params, const ModelConfig& config, const Matrix& sequence,
                    double blend);

/// Predictions of x_2..x_{n+1} driven by an explicit input sequence (n x dims).
RnnTrace fm_rollout_inputs(const FmParams& params, const ModelConfig& config,
                           const Matrix& inputs);

/// Next-step targets x_2..x_T of a sequence, aligned with the rollout outputs.
Matrix fm_targets(const Matrix& sequence);

/// Blended-input training loss sum_t w_t ||pred_{t+1} - x_{t+1}||^2 / 2 of one sequence and
/// its gradient, with backprop through the fed-back predictions.
double fm_sequence_gradient(const FmParams& params, const ModelConfig& config,
                            const Matrix& sequence, double blend, std::span<const double> weights,
                            RnnGradients& grads);

struct FmTrainOptions {
  double blend = 0.9;  // weight of the model's own prediction in the fed-back input
  pvrnn::Execution execution = pvrnn::Execution::Parallel;
  std::function<void(int epoch, double loss)> on_epoch;
};

struct FmTrainResult {
  FmParams params;
  std::vector<double> history;  // summed loss per epoch, before the update
};

/// Full-batch Adam training (config.lr, config.epochs, config.seed, config.error_dropout;
/// z sizes and meta-priors are ignored). Throws NumericalError on divergence.
FmTrainResult train_fm(std::span<const Matrix> dataset, const ModelConfig& config,
                       const FmTrainOptions& options = {});

}  // namespace glean::baselines
