#pragma once

#include <span>
#include <string>
#include <vector>

#include "glean/numeric/adam.hpp"
#include "glean/numeric/matrix.hpp"
#include "glean/numeric/rng.hpp"
#include "glean/pvrnn/config.hpp"

// Deterministic MTRNN shared by the forward-model and initial-state baselines. The layer
// stack, time constants and leaky update are the same as in the PV-RNN; instead of
// per-step latents the bottom layer receives an external input u_s, and the optional
// `initial` maps inject a latent z_1 at the first step only.

namespace glean::baselines {

using numeric::Matrix;
using numeric::Vector;
using pvrnn::ModelConfig;

struct RnnLayer {
  Matrix recurrent;  // d^l_{s-1} -> h^l        (d x d)
  Matrix top_down;   // d^{l+1}_{s-1} -> h^l    (d x d_above), empty at the top
  Matrix initial;    // z^l_1 -> h^l            (d x d), empty when there is no latent
};

struct RnnParams {
  std::vector<RnnLayer> layers;
  Matrix input;        // u_s -> h^0   (d_0 x output_dim)
  Matrix output;       // d^0_s -> o_s (output_dim x d_0)
  Vector output_bias;

  /// Shapes from `config` (z sizes and meta-priors are ignored). With `initial_latent`
  /// every layer gets a d x d map from its own z_1.
  static RnnParams zeros(const ModelConfig& config, bool initial_latent);

  template <typename F>
  void for_each_block(F&& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      fn(p + "recurrent", layers[l].recurrent.values());
      fn(p + "top_down", layers[l].top_down.values());
      fn(p + "initial", layers[l].initial.values());
    }
    fn(std::string("input"), input.values());
    fn(std::string("output"), output.values());
    fn(std::string("output_bias"), std::span<double>(output_bias));
  }
  template <typename F>
  void for_each_block(F&& fn) const {
    const_cast<RnnParams*>(this)->for_each_block(
        [&](const std::string& name, std::span<double> v) {
          fn(name, std::span<const double>(v));
        });
  }

  bool has_initial_latent() const { return !layers.empty() && !layers.front().initial.empty(); }
  void set_zero();
  bool operator==(const RnnParams& other) const;
};

/// Glorot-uniform weights, zero output bias.
void glorot_fill(RnnParams& params, numeric::SeededRng& rng);

/// How the input u_s of step s (1-based) is formed.
///   explicit_inputs set:  u_s = explicit_inputs row s-1
///   otherwise:            u_1 = reference row 0,
///                         u_s = blend * o_{s-1} + (1 - blend) * reference row s-1
/// blend = 1 is closed loop, blend = 0 is teacher forcing.
struct InputDrive {
  const Matrix* explicit_inputs = nullptr;
  const Matrix* reference = nullptr;
  double blend = 0.0;
};

struct RnnTrace {
  std::vector<Matrix> h;  // per layer, (steps + 1) x d, row 0 is the zero initial state
  std::vector<Matrix> d;
  Matrix inputs;          // steps x output_dim, u_s in row s-1
  Matrix out;             // steps x output_dim, o_s = O d^0_s + b in row s-1
  Vector z1;              // concatenated initial latent, empty without one

  int steps() const { return static_cast<int>(out.rows()); }
};

/// Runs `steps` steps. `z1` (length total_d) is required iff the params have initial maps.
void rnn_rollout(const RnnParams& params, const ModelConfig& config, const InputDrive& drive,
                 std::span<const double> z1, int steps, RnnTrace& trace);

struct RnnGradients {
  RnnParams params;
  Matrix inputs;  // dL/du_s; filled only for explicit inputs
  Vector z1;      // dL/dz_1 through the dynamics
};

/// BPTT of L = sum_s weights_s * ||o_s - targets_s||^2 / 2 through the rollout, including
/// the feedback path o_{s-1} -> u_s when inputs are blended. Overwrites `out`.
void rnn_backward(const RnnParams& params, const ModelConfig& config, const RnnTrace& trace,
                  const InputDrive& drive, const Matrix& targets, std::span<const double> weights,
                  RnnGradients& out);

/// sum_s weights_s * ||o_s - targets_s||^2 / 2
double weighted_squared_error(const Matrix& out, const Matrix& targets,
                              std::span<const double> weights);

/// Throws ConfigError unless every sequence is seq_len x output_dim (seq_len >= 2).
void check_training_set(std::span<const Matrix> dataset, const ModelConfig& config);

/// acc += g, block by block.
void accumulate(RnnParams& acc, const RnnParams& g);

/// Adam over every block of an RnnParams, epsilon = lr / 10.
class ParamsAdam {
 public:
  ParamsAdam(const RnnParams& shape, double lr);
  void step(RnnParams& params, const RnnParams& grads);

 private:
  std::vector<numeric::AdamState> states_;
  double lr_;
};

/// Error-dropout weights for one sequence: each of `steps` weights is 0 with probability p.
std::vector<double> dropout_weights(int steps, double p, numeric::SeededRng& rng);

}  // namespace glean::baselines
