#include "glean/baselines/rnn.hpp"

#include <algorithm>
#include <cmath>

#include "glean/error.hpp"
#include "glean/pvrnn/model.hpp"

namespace glean::baselines {

using numeric::matvec_accumulate;
using numeric::matvec_transpose_accumulate;
using numeric::outer_accumulate;

RnnParams RnnParams::zeros(const ModelConfig& config, bool initial_latent) {
  RnnParams p;
  const int L = config.num_layers();
  p.layers.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto d = static_cast<std::size_t>(config.layers[l].d_size);
    auto& lp = p.layers[static_cast<std::size_t>(l)];
    lp.recurrent = Matrix(d, d);
    lp.top_down =
        l + 1 < L ? Matrix(d, static_cast<std::size_t>(config.layers[l + 1].d_size)) : Matrix();
    lp.initial = initial_latent ? Matrix(d, d) : Matrix();
  }
  const auto out = static_cast<std::size_t>(config.output_dim);
  const auto d0 = static_cast<std::size_t>(config.layers.front().d_size);
  p.input = Matrix(d0, out);
  p.output = Matrix(out, d0);
  p.output_bias.assign(out, 0.0);
  return p;
}

void RnnParams::set_zero() {
  for_each_block([](const std::string&, std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); });
}

bool RnnParams::operator==(const RnnParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (!(a.recurrent == b.recurrent && a.top_down == b.top_down && a.initial == b.initial)) {
      return false;
    }
  }
  return input == other.input && output == other.output && output_bias == other.output_bias;
}

void glorot_fill(RnnParams& params, numeric::SeededRng& rng) {
  auto fill = [&](Matrix& m) {
    if (m.empty()) return;
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (double& v : m.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
  };
  for (auto& lp : params.layers) {
    fill(lp.recurrent);
    fill(lp.top_down);
    fill(lp.initial);
  }
  fill(params.input);
  fill(params.output);
  std::fill(params.output_bias.begin(), params.output_bias.end(), 0.0);
}

namespace {

void check_drive(const InputDrive& drive, int steps, std::size_t dims) {
  const Matrix* m = drive.explicit_inputs != nullptr ? drive.explicit_inputs : drive.reference;
  if (m == nullptr) throw std::invalid_argument("rnn: input drive needs inputs or a reference");
  if (static_cast<int>(m->rows()) < steps || m->cols() != dims) {
    throw DimensionError("rnn: input matrix is " + std::to_string(m->rows()) + "x" +
                         std::to_string(m->cols()) + ", need " + std::to_string(steps) + "x" +
                         std::to_string(dims));
  }
}

}  // namespace

void rnn_rollout(const RnnParams& params, const ModelConfig& config, const InputDrive& drive,
                 std::span<const double> z1, int steps, RnnTrace& trace) {
  const int L = config.num_layers();
  const auto dims = static_cast<std::size_t>(config.output_dim);
  check_drive(drive, steps, dims);
  const bool latent = params.has_initial_latent();
  if (latent && z1.size() != static_cast<std::size_t>(config.total_d())) {
    throw DimensionError("rnn: z1 must have total_d entries");
  }
  const auto T = static_cast<std::size_t>(steps);
  trace.h.resize(static_cast<std::size_t>(L));
  trace.d.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto d = static_cast<std::size_t>(config.layers[l].d_size);
    trace.h[static_cast<std::size_t>(l)] = Matrix(T + 1, d);
    trace.d[static_cast<std::size_t>(l)] = Matrix(T + 1, d);
  }
  trace.inputs = Matrix(T, dims);
  trace.out = Matrix(T, dims);
  trace.z1.assign(z1.begin(), z1.end());

  std::vector<double> dr;
  for (std::size_t s = 1; s <= T; ++s) {
    auto u = trace.inputs.row(s - 1);
    if (drive.explicit_inputs != nullptr) {
      const auto e = drive.explicit_inputs->row(s - 1);
      std::copy(e.begin(), e.end(), u.begin());
    } else {
      const auto r = drive.reference->row(s - 1);
      if (s == 1) {
        std::copy(r.begin(), r.end(), u.begin());
      } else {
        const auto o = trace.out.row(s - 2);
        for (std::size_t k = 0; k < dims; ++k) u[k] = drive.blend * o[k] + (1.0 - drive.blend) * r[k];
      }
    }
    std::size_t off = 0;
    for (int l = 0; l < L; ++l) {
      const auto li = static_cast<std::size_t>(l);
      const auto& lp = params.layers[li];
      const auto prev = trace.d[li].row(s - 1);
      dr.assign(lp.recurrent.rows(), 0.0);
      matvec_accumulate(lp.recurrent, prev, dr);
      if (l + 1 < L) matvec_accumulate(lp.top_down, trace.d[li + 1].row(s - 1), dr);
      if (l == 0) matvec_accumulate(params.input, u, dr);
      if (latent && s == 1) matvec_accumulate(lp.initial, z1.subspan(off, lp.initial.cols()), dr);
      off += lp.recurrent.rows();
      pvrnn::leaky_update(trace.h[li].row(s - 1), dr, config.layers[li].tau, trace.h[li].row(s),
                          trace.d[li].row(s));
    }
    auto o = trace.out.row(s - 1);
    std::copy(params.output_bias.begin(), params.output_bias.end(), o.begin());
    matvec_accumulate(params.output, trace.d[0].row(s), o);
  }
}

double weighted_squared_error(const Matrix& out, const Matrix& targets,
                              std::span<const double> weights) {
  if (out.rows() != targets.rows() || out.cols() != targets.cols() ||
      weights.size() != out.rows()) {
    throw DimensionError("weighted_squared_error: shape mismatch");
  }
  double sum = 0.0;
  for (std::size_t s = 0; s < out.rows(); ++s) {
    if (weights[s] == 0.0) continue;
    double e = 0.0;
    for (std::size_t k = 0; k < out.cols(); ++k) {
      const double diff = out(s, k) - targets(s, k);
      e += diff * diff;
    }
    sum += weights[s] * e;
  }
  return 0.5 * sum;
}

void rnn_backward(const RnnParams& params, const ModelConfig& config, const RnnTrace& trace,
                  const InputDrive& drive, const Matrix& targets, std::span<const double> weights,
                  RnnGradients& out) {
  const int L = config.num_layers();
  const int S = trace.steps();
  const auto dims = static_cast<std::size_t>(config.output_dim);
  if (static_cast<int>(targets.rows()) != S || targets.cols() != dims ||
      static_cast<int>(weights.size()) != S) {
    throw DimensionError("rnn_backward: targets/weights do not match the trace");
  }
  const bool latent = params.has_initial_latent();
  const bool explicit_inputs = drive.explicit_inputs != nullptr;
  if (out.params.layers.size() == params.layers.size() &&
      out.params.has_initial_latent() == latent && out.params.input.cols() == dims) {
    out.params.set_zero();
  } else {
    out.params = RnnParams::zeros(config, latent);
  }
  out.inputs = explicit_inputs ? Matrix(static_cast<std::size_t>(S), dims) : Matrix();
  out.z1.assign(latent ? static_cast<std::size_t>(config.total_d()) : 0, 0.0);

  std::vector<Vector> gd(static_cast<std::size_t>(L)), gh(static_cast<std::size_t>(L)),
      gh_next(static_cast<std::size_t>(L)), carry(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto d = static_cast<std::size_t>(config.layers[l].d_size);
    gd[static_cast<std::size_t>(l)].assign(d, 0.0);
    gh[static_cast<std::size_t>(l)].assign(d, 0.0);
    gh_next[static_cast<std::size_t>(l)].assign(d, 0.0);
    carry[static_cast<std::size_t>(l)].assign(d, 0.0);  // dL/d(drive) at step s+1
  }
  Vector g_o(dims, 0.0), g_u(dims, 0.0), g_u_next(dims, 0.0);

  for (int s = S; s >= 1; --s) {
    const auto row = static_cast<std::size_t>(s - 1);
    const auto cur = static_cast<std::size_t>(s);
    const double w = weights[row];
    const auto o = trace.out.row(row);
    const auto y = targets.row(row);
    for (std::size_t k = 0; k < dims; ++k) {
      g_o[k] = w * (o[k] - y[k]);
      if (!explicit_inputs && s < S) g_o[k] += drive.blend * g_u_next[k];
    }
    outer_accumulate(out.params.output, g_o, trace.d[0].row(cur));
    for (std::size_t k = 0; k < dims; ++k) out.params.output_bias[k] += g_o[k];

    for (int l = 0; l < L; ++l) {
      const auto li = static_cast<std::size_t>(l);
      std::fill(gd[li].begin(), gd[li].end(), 0.0);
      if (l == 0) matvec_transpose_accumulate(params.output, g_o, gd[0]);
      if (s < S) {
        matvec_transpose_accumulate(params.layers[li].recurrent, carry[li], gd[li]);
        if (l >= 1) matvec_transpose_accumulate(params.layers[li - 1].top_down, carry[li - 1], gd[li]);
      }
    }

    std::size_t off = 0;
    for (int l = 0; l < L; ++l) {
      const auto li = static_cast<std::size_t>(l);
      const double tau = config.layers[li].tau;
      const double keep = 1.0 - 1.0 / tau;
      const auto d_t = trace.d[li].row(cur);
      for (std::size_t i = 0; i < gh[li].size(); ++i) {
        gh[li][i] = gd[li][i] * (1.0 - d_t[i] * d_t[i]) + keep * gh_next[li][i];
        carry[li][i] = gh[li][i] / tau;
      }
      auto& g = out.params.layers[li];
      outer_accumulate(g.recurrent, carry[li], trace.d[li].row(row));
      if (l + 1 < L) outer_accumulate(g.top_down, carry[li], trace.d[li + 1].row(row));
      if (latent && s == 1) {
        const auto n = g.initial.cols();
        outer_accumulate(g.initial, carry[li], std::span<const double>(trace.z1).subspan(off, n));
        matvec_transpose_accumulate(params.layers[li].initial, carry[li],
                                    std::span<double>(out.z1).subspan(off, n));
      }
      off += gh[li].size();
    }
    outer_accumulate(out.params.input, carry[0], trace.inputs.row(row));
    std::fill(g_u.begin(), g_u.end(), 0.0);
    matvec_transpose_accumulate(params.input, carry[0], g_u);
    if (explicit_inputs) std::copy(g_u.begin(), g_u.end(), out.inputs.row(row).begin());

    std::swap(gh, gh_next);
    std::swap(g_u, g_u_next);
  }
}

void accumulate(RnnParams& acc, const RnnParams& g) {
  std::vector<std::span<const double>> src;
  g.for_each_block([&](const std::string&, std::span<const double> v) { src.push_back(v); });
  std::size_t b = 0;
  acc.for_each_block([&](const std::string&, std::span<double> v) {
    if (src[b].size() != v.size()) throw DimensionError("accumulate: block shape mismatch");
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += src[b][k];
    ++b;
  });
}

void check_training_set(std::span<const Matrix> dataset, const ModelConfig& config) {
  config.validate();
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  if (config.seq_len < 2) throw ConfigError("train: sequences need at least 2 steps");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (static_cast<int>(dataset[i].rows()) != config.seq_len ||
        static_cast<int>(dataset[i].cols()) != config.output_dim) {
      throw ConfigError("train: sequence " + std::to_string(i) + " does not match the model");
    }
  }
}

ParamsAdam::ParamsAdam(const RnnParams& shape, double lr) : lr_(lr) {
  shape.for_each_block([&](const std::string& name, std::span<const double> v) {
    states_.emplace_back(name, v.size(), lr / 10.0);
  });
}

void ParamsAdam::step(RnnParams& params, const RnnParams& grads) {
  std::vector<std::span<const double>> g;
  grads.for_each_block([&](const std::string&, std::span<const double> v) { g.push_back(v); });
  std::size_t b = 0;
  params.for_each_block([&](const std::string&, std::span<double> v) {
    numeric::adam_update(states_[b], v, g[b], lr_);
    ++b;
  });
}

std::vector<double> dropout_weights(int steps, double p, numeric::SeededRng& rng) {
  std::vector<double> w(static_cast<std::size_t>(steps), 1.0);
  if (p > 0.0) {
    for (double& x : w) {
      if (rng.uniform() < p) x = 0.0;
    }
  }
  return w;
}

}  // namespace glean::baselines
