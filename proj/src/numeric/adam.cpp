#include "glean/numeric/adam.hpp"

#include <algorithm>
#include <cmath>

#include "glean/error.hpp"

namespace glean::numeric {

void adam_update(AdamState& state, std::span<double> param, std::span<const double> grad,
                 double lr) {
  if (param.size() != grad.size() || state.m.size() != param.size()) {
    throw DimensionError("adam_update: shape mismatch in block '" + state.name + "'");
  }
  if (!all_finite(grad)) {
    throw NumericalError("adam_update: non-finite gradient in block '" + state.name + "'");
  }
  if (std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; })) return;

  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

Vector adam_step(AdamState& state, const Vector& param, const Vector& grad, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");
  Vector out = param;
  adam_update(state, out, grad, lr);
  return out;
}

double clip_global_norm(std::span<const std::span<double>> blocks, double max_norm) {
  double sq = 0.0;
  for (auto b : blocks) sq += squared_norm(b);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto b : blocks) {
      for (double& g : b) g *= scale;
    }
  }
  return norm;
}

}  // namespace glean::numeric
