#include "glean/baselines/fm.hpp"

#include <cmath>
#include <string>

#include "glean/error.hpp"
#include "glean/numeric/parallel.hpp"

namespace glean::baselines {

namespace {

constexpr std::uint64_t kInitStream = 0x1a17ULL;

}  // namespace

FmParams FmParams::zeros(const ModelConfig& config) {
  FmParams p;
  static_cast<RnnParams&>(p) = RnnParams::zeros(config, false);
  return p;
}

FmParams FmParams::glorot(const ModelConfig& config, numeric::SeededRng& rng) {
  FmParams p = zeros(config);
  glorot_fill(p, rng);
  return p;
}

FmStep fm_step(const pvrnn::CellState& prev, std::span<const double> u, const FmParams& params,
               const ModelConfig& config) {
  const int L = config.num_layers();
  if (static_cast<int>(prev.h.size()) != L || static_cast<int>(prev.d.size()) != L ||
      static_cast<int>(params.layers.size()) != L) {
    throw DimensionError("fm_step: layer count mismatch");
  }
  if (u.size() != params.input.cols()) throw DimensionError("fm_step: input size mismatch");
  FmStep out{pvrnn::CellState::zeros(config), Vector(params.output_bias)};
  for (int l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto& lp = params.layers[li];
    if (prev.h[li].size() != lp.recurrent.rows()) throw DimensionError("fm_step: state size mismatch");
    Vector drive(lp.recurrent.rows(), 0.0);
    numeric::matvec_accumulate(lp.recurrent, prev.d[li], drive);
    if (l + 1 < L) numeric::matvec_accumulate(lp.top_down, prev.d[li + 1], drive);
    if (l == 0) numeric::matvec_accumulate(params.input, u, drive);
    pvrnn::leaky_update(prev.h[li], drive, config.layers[li].tau, out.state.h[li], out.state.d[li]);
  }
  numeric::matvec_accumulate(params.output, out.state.d[0], out.x);
  return out;
}

RnnTrace fm_rollout(const FmParams& params, const ModelConfig& config, const Matrix& sequence,
                    double blend) {
  if (sequence.rows() < 2) throw DimensionError("fm_rollout: need at least 2 steps");
  RnnTrace trace;
  InputDrive drive{nullptr, &sequence, blend};
  rnn_rollout(params, config, drive, {}, static_cast<int>(sequence.rows()) - 1, trace);
  return trace;
}

RnnTrace fm_rollout_inputs(const FmParams& params, const ModelConfig& config,
                           const Matrix& inputs) {
  RnnTrace trace;
  InputDrive drive{&inputs, nullptr, 0.0};
  rnn_rollout(params, config, drive, {}, static_cast<int>(inputs.rows()), trace);
  return trace;
}

Matrix fm_targets(const Matrix& sequence) {
  if (sequence.rows() < 2) throw DimensionError("fm_targets: need at least 2 steps");
  Matrix t(sequence.rows() - 1, sequence.cols());
  for (std::size_t r = 1; r < sequence.rows(); ++r) {
    const auto src = sequence.row(r);
    std::copy(src.begin(), src.end(), t.row(r - 1).begin());
  }
  return t;
}

double fm_sequence_gradient(const FmParams& params, const ModelConfig& config,
                            const Matrix& sequence, double blend, std::span<const double> weights,
                            RnnGradients& grads) {
  const RnnTrace trace = fm_rollout(params, config, sequence, blend);
  const Matrix targets = fm_targets(sequence);
  InputDrive drive{nullptr, &sequence, blend};
  rnn_backward(params, config, trace, drive, targets, weights, grads);
  return weighted_squared_error(trace.out, targets, weights);
}

FmTrainResult train_fm(std::span<const Matrix> dataset, const ModelConfig& config,
                       const FmTrainOptions& options) {
  check_training_set(dataset, config);
  if (!(options.blend >= 0.0 && options.blend <= 1.0)) throw ConfigError("blend must be in [0, 1]");
  FmTrainResult result;
  auto init_rng = numeric::SeededRng::derive(config.seed, {kInitStream});
  result.params = FmParams::glorot(config, init_rng);
  result.history.reserve(static_cast<std::size_t>(config.epochs));

  ParamsAdam adam(result.params, config.lr);
  const std::size_t n = dataset.size();
  std::vector<RnnGradients> grads(n);
  std::vector<double> losses(n, 0.0);
  RnnParams total = RnnParams::zeros(config, false);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    numeric::for_each_index(n, options.execution == pvrnn::Execution::Parallel, [&](std::size_t i) {
      auto rng = numeric::SeededRng::derive(config.seed, {static_cast<std::uint64_t>(epoch), i});
      const auto w = dropout_weights(config.seq_len - 1, config.error_dropout, rng);
      // The reported loss counts every step; dropout only masks the gradient.
      const std::vector<double> ones(w.size(), 1.0);
      const RnnTrace trace = fm_rollout(result.params, config, dataset[i], options.blend);
      const Matrix targets = fm_targets(dataset[i]);
      losses[i] = weighted_squared_error(trace.out, targets, ones);
      InputDrive drive{nullptr, &dataset[i], options.blend};
      rnn_backward(result.params, config, trace, drive, targets, w, grads[i]);
    });
    double loss = 0.0;
    total.set_zero();
    for (std::size_t i = 0; i < n; ++i) {
      loss += losses[i];
      accumulate(total, grads[i].params);
    }
    if (!std::isfinite(loss)) {
      throw NumericalError("train_fm: loss diverged at epoch " + std::to_string(epoch));
    }
    result.history.push_back(loss);
    try {
      adam.step(result.params, total);
    } catch (const NumericalError& e) {
      throw NumericalError("train_fm: epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (options.on_epoch) options.on_epoch(epoch, loss);
  }
  return result;
}

}  // namespace glean::baselines
