#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "glean/numeric/matrix.hpp"
#include "glean/numeric/rng.hpp"
#include "glean/pvrnn/config.hpp"
#include "glean/pvrnn/params.hpp"

namespace glean::pvrnn {

// ---------------------------------------------------------------------------
// Single-step building blocks
// ---------------------------------------------------------------------------

/// Per-layer MTRNN state at one timestep.
struct CellState {
  std::vector<Vector> h;
  std::vector<Vector> d;

  static CellState zeros(const ModelConfig& config);
};

/// One MTRNN step:
///   h^l_t = (1 - 1/tau) h^l_{t-1} + (1/tau)(W_dd d^l_{t-1} + W_zd z^l_t + W_td d^{l+1}_{t-1})
///   d^l_t = tanh(h^l_t)
/// The top layer has no top-down term.
CellState mtrnn_cell(const CellState& prev, const std::vector<Vector>& z,
                     const NetworkParams& params, const ModelConfig& config);

/// Leaky-integrator update for one layer given the summed drive; writes h and tanh(h).
void leaky_update(std::span<const double> h_prev, std::span<const double> drive, double tau,
                  std::span<double> h_out, std::span<double> d_out);

struct GaussianParams {
  Vector mu;
  Vector sigma;
};

/// Prior of one layer at timestep t (1-based). At t = 1 this is N(0, I) regardless of d.
GaussianParams prior_params(std::span<const double> d_prev, const LayerParams& layer, int t,
                            double sigma_floor = 0.0);

/// Posterior from raw adaptation values: mu = tanh(A^mu), sigma = exp(A^sigma).
GaussianParams posterior_params(std::span<const double> a_mu, std::span<const double> a_sigma,
                                double sigma_floor = 0.0);

struct KldValue {
  double weighted = 0.0;
  double unweighted = 0.0;
};

/// KL(q || p) summed over units and scaled by w_eff. At t = 1 the prior arguments are
/// ignored and p = N(0, I). Throws std::invalid_argument on a non-positive sigma.
KldValue kld_term(std::span<const double> mu_q, std::span<const double> sigma_q,
                  std::span<const double> mu_p, std::span<const double> sigma_p, double w_eff,
                  int t);

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

enum class LatentSource : std::uint8_t { Prior, Posterior };

/// Pre-drawn standard-normal noise, one (steps x z_size) matrix per layer.
struct Noise {
  std::vector<Matrix> eps;

  static Noise draw(const ModelConfig& config, int steps, numeric::SeededRng& rng);
  static Noise zeros(const ModelConfig& config, int steps);
};

struct LayerTrace {
  Matrix h;  // (steps + 1) x d, row 0 is the zero initial state
  Matrix d;  // (steps + 1) x d
  Matrix z;  // steps x z
  Matrix eps;
  Matrix mu_p;
  Matrix sigma_p;
  Matrix mu_q;     // valid on steps with has_posterior
  Matrix sigma_q;
};

/// Everything a rollout produced; the substrate for the bounds and for BPTT.
struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Matrix x;                           // steps x output_dim
  std::vector<LatentSource> source;   // which distribution z_t was sampled from
  std::vector<std::uint8_t> has_posterior;

  int steps() const { return static_cast<int>(x.rows()); }
  void resize(const ModelConfig& config, int steps);
};

struct RolloutOptions {
  /// Test hook: caps every sigma (prior and posterior) used for sampling.
  double sigma_cap = std::numeric_limits<double>::infinity();
};

/// General rollout. z_t comes from the posterior for t <= posterior_steps and from the
/// prior afterwards; posterior parameters are recorded for every t <= record_steps
/// (record_steps >= posterior_steps). `adaptation` may be null when record_steps == 0.
void rollout(const NetworkParams& params, const ModelConfig& config,
             const AdaptationVars* adaptation, int posterior_steps, int record_steps,
             const Noise& noise, ForwardTrace& out, const RolloutOptions& options = {});

/// z_t sampled from the prior at every step (N(0, I) at t = 1).
ForwardTrace forward_prior(const NetworkParams& params, const ModelConfig& config,
                           numeric::SeededRng& rng, int steps, const RolloutOptions& options = {});

/// z_t sampled from the posterior given by A at every step. Throws DimensionError when A
/// does not have `steps` rows.
ForwardTrace forward_posterior(const NetworkParams& params, const AdaptationVars& adaptation,
                               const ModelConfig& config, numeric::SeededRng& rng, int steps,
                               const RolloutOptions& options = {});

ForwardTrace forward_posterior(const NetworkParams& params, const AdaptationVars& adaptation,
                               const ModelConfig& config, const Noise& noise);

/// Rolls out with z_1 from the posterior of `adaptation` and z_{t>1} from the prior. The
/// full posterior of `adaptation` is still recorded so the per-step KLD against the trained
/// sequence's posterior can be inspected.
std::vector<ForwardTrace> regenerate_target(const NetworkParams& params,
                                            const AdaptationVars& adaptation,
                                            const ModelConfig& config, numeric::SeededRng& rng,
                                            int n_rollouts, const RolloutOptions& options = {});

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

struct ElboReport {
  double accuracy = 0.0;
  double complexity = 0.0;
  double elbo = 0.0;
  double kld_pq = 0.0;
};

/// accuracy = -sum_t weight_t * ||x_t - target_t||^2 / 2,
/// complexity = sum over steps with a posterior, over layers, of w_eff * KLD.
ElboReport evaluate_bound(const ForwardTrace& trace, const Matrix& target,
                          std::span<const double> error_weights, const ModelConfig& config);

/// Evidence lower bound with every step in the accuracy term.
ElboReport elbo(const ForwardTrace& trace, const Matrix& target, const ModelConfig& config);

/// Unweighted KLD per step (rows) and layer (columns); zero where no posterior exists.
Matrix kld_profile(const ForwardTrace& trace, const ModelConfig& config);

}  // namespace glean::pvrnn
