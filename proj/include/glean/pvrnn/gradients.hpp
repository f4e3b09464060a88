#pragma once

#include <span>

#include "glean/pvrnn/model.hpp"

namespace glean::pvrnn {

struct Gradients {
  NetworkParams params;
  AdaptationVars adaptation;

  static Gradients zeros(const ModelConfig& config, int steps);
  void set_zero();
};

struct BackwardOptions {
  bool params = true;      // skip to save work when the weights are frozen
  bool adaptation = true;
};

/// Backpropagation through time for the loss -evaluate_bound(trace, target, weights).
///
/// The noise recorded in the trace is replayed, so the result is the exact gradient of the
/// sampled path. Overwrites `out`. Gradients reach A_t only through steps >= t, i.e. from
/// the errors and KLD terms at t..T.
void backward(const NetworkParams& params, const ModelConfig& config, const ForwardTrace& trace,
              const Matrix& target, std::span<const double> error_weights, Gradients& out,
              const BackwardOptions& options = {});

}  // namespace glean::pvrnn
