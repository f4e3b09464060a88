#pragma once

#include <functional>
#include <span>
#include <vector>

#include "glean/pvrnn/gradients.hpp"

namespace glean::pvrnn {

/// Whether per-sequence work runs on OpenMP threads. Both paths reduce per-sequence
/// gradients in sequence-index order, so they produce bit-identical results; the serial
/// path is the reference the parallel one is tested against.
enum class Execution { Serial, Parallel };

struct EpochStats {
  double accuracy = 0.0;
  double complexity = 0.0;
  double elbo = 0.0;
  double kld_pq = 0.0;
};

struct TrainOptions {
  Execution execution = Execution::Parallel;
  /// Called after every epoch's update; used for progress logging.
  std::function<void(int epoch, const EpochStats&)> on_epoch;
};

struct TrainResult {
  NetworkParams params;
  std::vector<AdaptationVars> adaptation;  // one per training sequence
  std::vector<EpochStats> history;         // summed over sequences, before the update
};

/// Summed gradients and bound statistics of one full-batch pass.
struct BatchGradients {
  NetworkParams params;
  std::vector<AdaptationVars> adaptation;
  EpochStats stats;
};

/// Per-sequence scratch kept across epochs.
struct SequenceWorkspace {
  ForwardTrace trace;
  Gradients grads;
  std::vector<double> error_weights;
  EpochStats stats;
};

/// One full-batch forward/backward pass. Noise and error-dropout masks for sequence s at
/// `epoch` come from SeededRng::derive(config.seed, {epoch, s}).
void batch_gradients(const NetworkParams& params, const ModelConfig& config,
                     std::span<const AdaptationVars> adaptation, std::span<const Matrix> dataset,
                     int epoch, Execution execution, std::vector<SequenceWorkspace>& workspace,
                     BatchGradients& out);

/// Initial weights for `config` (Glorot-uniform from a stream derived from config.seed).
NetworkParams initial_params(const ModelConfig& config);

/// Full-batch BPTT maximising the summed ELBO over weights and every sequence's A.
/// Each timestep's prediction error is independently dropped from the accuracy gradient
/// with probability config.error_dropout. Adam with epsilon = lr / 10.
/// Throws ConfigError for inconsistent data and NumericalError (naming the epoch) when
/// the loss becomes non-finite.
TrainResult train(std::span<const Matrix> dataset, const ModelConfig& config,
                  const TrainOptions& options = {});

}  // namespace glean::pvrnn
