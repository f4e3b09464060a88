#pragma once

#include <cstdint>
#include <vector>

#include "glean/baselines/fm.hpp"
#include "glean/baselines/si.hpp"
#include "glean/numeric/matrix.hpp"
#include "glean/pvrnn/gradients.hpp"
#include "glean/pvrnn/train.hpp"

namespace glean::planner {

using numeric::Matrix;
using numeric::Vector;
using pvrnn::ModelConfig;

struct PlanRequest {
  Vector initial;         // x_1
  Vector goal;            // desired x_T
  int horizon = 30;       // T
  double rate = 0.05;     // plan adaptation rate (Adam learning rate)
  int epochs = 500;
  int candidates = 10;
  std::uint64_t seed = 1;

  /// Throws ConfigError unless states lie in [0,1], horizon matches `config`,
  /// candidates >= 1, epochs >= 0 and rate > 0.
  void validate(const ModelConfig& config) const;
  /// horizon x dims matrix holding x_1 in the first row and the goal in the last.
  Matrix endpoint_target() const;
};

struct PlanResult {
  Matrix trajectory;                  // horizon x dims
  pvrnn::AdaptationVars adaptation;   // GLean: A over all steps; SI: one row for z_1
  Matrix inputs;                      // FM: the inferred input sequence u_1..u_{T-1}
  double lower_bound = 0.0;
  double kld_pq = 0.0;
  std::vector<double> candidate_scores;  // final bound per candidate, NaN when dropped
  int best_candidate = 0;
  int epochs_run = 0;
};

struct PlanOptions {
  pvrnn::Execution execution = pvrnn::Execution::Parallel;
  /// FM only: start every candidate from uniform random inputs instead of replicating
  /// the initial state.
  bool fm_random_init = false;
};

/// Accuracy restricted to the first and last step, complexity over every step.
pvrnn::ElboReport estimated_lower_bound(const pvrnn::ForwardTrace& trace,
                                        const PlanRequest& request, const ModelConfig& config);

/// Index of the largest finite score, lowest index on ties; -1 if none is finite.
int best_index(const std::vector<double>& scores);

/// GLean: per candidate, A starts at zero and is optimised by Adam (epsilon = rate / 10)
/// on the negative estimated lower bound with the weights frozen; fresh noise every
/// epoch. The plan is a final posterior-sampled rollout; the candidate with the highest
/// final bound wins. Candidate c draws from SeededRng::derive(seed, {c}).
/// Throws NumericalError when every candidate turned non-finite.
PlanResult plan_glean(const pvrnn::NetworkParams& params, const ModelConfig& config,
                      const PlanRequest& request, const PlanOptions& options = {});

/// SI: only the raw posterior of z_1 is optimised against the endpoint errors plus
/// w_init * KL(q(z_1) || N(0, I)). The plan is the closed-loop rollout from the mean of
/// q(z_1).
PlanResult plan_si(const baselines::SiParams& params, const ModelConfig& config,
                   const PlanRequest& request, const PlanOptions& options = {});

/// FM: the input sequence u_1..u_{T-1} is optimised so that the last prediction reaches
/// the goal. No latent exists; the bound reported is minus the endpoint error.
PlanResult plan_fm(const baselines::FmParams& params, const ModelConfig& config,
                   const PlanRequest& request, const PlanOptions& options = {});

struct LookaheadOptions {
  int window = 0;            // steps of prefix used for inference; 0 or > t means all
  int regression_epochs = 30;  // GLean, per step
  int initial_epochs = 500;    // SI, once
  double rate = 0.05;
  /// FM and SI: weight of the model's own prediction in the input, as in training. The
  /// ground truth enters through the remaining share.
  double blend = 0.9;
  std::uint64_t seed = 1;
};

struct LookaheadResult {
  Matrix predictions;  // (T-1) x dims, predictions of x_2..x_T
  double rmse = 0.0;
};

/// Next-step predictions with the ground truth fed through the input blend.
LookaheadResult lookahead_fm(const baselines::FmParams& params, const ModelConfig& config,
                             const Matrix& truth, const LookaheadOptions& options = {});
/// Infers A_1 once from the first `window` steps, then predicts each next step with the
/// ground truth fed through the input blend.
LookaheadResult lookahead_si(const baselines::SiParams& params, const ModelConfig& config,
                             const Matrix& truth, const LookaheadOptions& options = {});
/// For every t, regresses A over the (windowed) prefix x_1..x_t, warm-started from t-1,
/// then predicts x_{t+1} from the posterior means up to t and the prior mean at t+1.
LookaheadResult lookahead_glean(const pvrnn::NetworkParams& params, const ModelConfig& config,
                                const Matrix& truth, const LookaheadOptions& options = {});

/// sqrt of the mean over rows and columns of the squared difference.
double rmse(const Matrix& a, const Matrix& b);

}  // namespace glean::planner
