#pragma once

#include <functional>
#include <span>

#include "glean/numeric/matrix.hpp"

namespace glean::numeric {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
/// Throws NumericalError if any evaluation of f is non-finite.
Vector finite_diff_gradient(const ScalarFunction& f, std::span<const double> x, double h = 1e-5);

/// |a - b| / max(|a|, |b|, floor): relative error with an absolute floor for tiny values.
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace glean::numeric
