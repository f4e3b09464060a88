#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "glean/numeric/matrix.hpp"

namespace glean::numeric {

/// Moment estimates for one parameter block.
struct AdamState {
  AdamState() = default;
  AdamState(std::string block_name, std::size_t size, double epsilon_hat)
      : name(std::move(block_name)), m(size, 0.0), v(size, 0.0), epsilon(epsilon_hat) {}

  std::string name;
  Vector m;
  Vector v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam step applied in place: param -= lr * m_hat / (sqrt(v_hat) + eps).
///
/// A block whose gradient is identically zero received no gradient this step and is left
/// untouched (moments and step counter included). Throws NumericalError naming the block
/// on a non-finite gradient and DimensionError on a shape mismatch.
void adam_update(AdamState& state, std::span<double> param, std::span<const double> grad,
                 double lr);

Vector adam_step(AdamState& state, const Vector& param, const Vector& grad, double lr);

/// Global-norm clipping: scales every block by max_norm / ||g|| when ||g|| exceeds
/// max_norm. Returns the norm before clipping.
double clip_global_norm(std::span<const std::span<double>> blocks, double max_norm);

}  // namespace glean::numeric
