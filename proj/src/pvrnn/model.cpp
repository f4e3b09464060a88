#include "glean/pvrnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "glean/error.hpp"

namespace glean::pvrnn {

using numeric::matvec_accumulate;

CellState CellState::zeros(const ModelConfig& config) {
  CellState s;
  for (const auto& L : config.layers) {
    s.h.emplace_back(static_cast<std::size_t>(L.d_size), 0.0);
    s.d.emplace_back(static_cast<std::size_t>(L.d_size), 0.0);
  }
  return s;
}

void leaky_update(std::span<const double> h_prev, std::span<const double> drive, double tau,
                  std::span<double> h_out, std::span<double> d_out) {
  const double keep = 1.0 - 1.0 / tau;
  const double inv_tau = 1.0 / tau;
  for (std::size_t i = 0; i < h_out.size(); ++i) {
    h_out[i] = keep * h_prev[i] + inv_tau * drive[i];
    d_out[i] = std::tanh(h_out[i]);
  }
}

CellState mtrnn_cell(const CellState& prev, const std::vector<Vector>& z,
                     const NetworkParams& params, const ModelConfig& config) {
  const int L = config.num_layers();
  if (static_cast<int>(prev.h.size()) != L || static_cast<int>(prev.d.size()) != L ||
      static_cast<int>(z.size()) != L || static_cast<int>(params.layers.size()) != L) {
    throw DimensionError("mtrnn_cell: layer count mismatch");
  }
  CellState next = CellState::zeros(config);
  for (int l = 0; l < L; ++l) {
    const auto& lp = params.layers[l];
    if (prev.h[l].size() != lp.recurrent.rows()) {
      throw DimensionError("mtrnn_cell: h size mismatch at layer " + std::to_string(l));
    }
    Vector drive(lp.recurrent.rows(), 0.0);
    matvec_accumulate(lp.recurrent, prev.d[l], drive);
    matvec_accumulate(lp.latent, z[l], drive);
    if (l + 1 < L) matvec_accumulate(lp.top_down, prev.d[l + 1], drive);
    leaky_update(prev.h[l], drive, config.layers[l].tau, next.h[l], next.d[l]);
  }
  return next;
}

GaussianParams prior_params(std::span<const double> d_prev, const LayerParams& layer, int t,
                            double sigma_floor) {
  if (t < 1) throw std::invalid_argument("prior_params: t must be >= 1");
  const std::size_t z = layer.prior_mu.rows();
  GaussianParams p{Vector(z, 0.0), Vector(z, 1.0)};
  if (t == 1) return p;
  std::fill(p.sigma.begin(), p.sigma.end(), 0.0);
  matvec_accumulate(layer.prior_mu, d_prev, p.mu);
  matvec_accumulate(layer.prior_log_sigma, d_prev, p.sigma);
  for (std::size_t i = 0; i < z; ++i) {
    p.mu[i] = std::tanh(p.mu[i]);
    p.sigma[i] = std::max(std::exp(p.sigma[i]), sigma_floor);
  }
  return p;
}

GaussianParams posterior_params(std::span<const double> a_mu, std::span<const double> a_sigma,
                                double sigma_floor) {
  if (a_mu.size() != a_sigma.size()) throw DimensionError("posterior_params: size mismatch");
  GaussianParams q{Vector(a_mu.size()), Vector(a_mu.size())};
  for (std::size_t i = 0; i < a_mu.size(); ++i) {
    q.mu[i] = std::tanh(a_mu[i]);
    q.sigma[i] = std::max(std::exp(a_sigma[i]), sigma_floor);
  }
  return q;
}

KldValue kld_term(std::span<const double> mu_q, std::span<const double> sigma_q,
                  std::span<const double> mu_p, std::span<const double> sigma_p, double w_eff,
                  int t) {
  const std::size_t n = mu_q.size();
  if (sigma_q.size() != n || (t > 1 && (mu_p.size() != n || sigma_p.size() != n))) {
    throw DimensionError("kld_term: size mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mp = t == 1 ? 0.0 : mu_p[i];
    const double sp = t == 1 ? 1.0 : sigma_p[i];
    const double sq = sigma_q[i];
    if (std::isnan(sq) || std::isnan(sp)) throw NumericalError("kld_term: sigma is NaN");
    if (!(sq > 0.0) || !(sp > 0.0)) throw std::invalid_argument("kld_term: sigma must be > 0");
    const double diff = mp - mu_q[i];
    sum += std::log(sp / sq) + (diff * diff + sq * sq) / (2.0 * sp * sp) - 0.5;
  }
  return {w_eff * sum, sum};
}

// ---------------------------------------------------------------------------

Noise Noise::draw(const ModelConfig& config, int steps, numeric::SeededRng& rng) {
  Noise n;
  for (const auto& L : config.layers) {
    n.eps.emplace_back(static_cast<std::size_t>(steps), static_cast<std::size_t>(L.z_size));
  }
  // Step-major order so a longer draw shares its prefix with a shorter one.
  for (int t = 0; t < steps; ++t) {
    for (auto& m : n.eps) rng.fill_normal(m.row(static_cast<std::size_t>(t)));
  }
  return n;
}

Noise Noise::zeros(const ModelConfig& config, int steps) {
  Noise n;
  for (const auto& L : config.layers) {
    n.eps.emplace_back(static_cast<std::size_t>(steps), static_cast<std::size_t>(L.z_size));
  }
  return n;
}

void ForwardTrace::resize(const ModelConfig& config, int steps) {
  const auto T = static_cast<std::size_t>(steps);
  if (layers.size() == config.layers.size() && x.rows() == T &&
      x.cols() == static_cast<std::size_t>(config.output_dim)) {
    bool same = true;
    for (std::size_t l = 0; l < layers.size() && same; ++l) {
      same = layers[l].h.cols() == static_cast<std::size_t>(config.layers[l].d_size) &&
             layers[l].z.cols() == static_cast<std::size_t>(config.layers[l].z_size);
    }
    if (same) {
      for (auto& lt : layers) {
        std::fill(lt.h.row(0).begin(), lt.h.row(0).end(), 0.0);
        std::fill(lt.d.row(0).begin(), lt.d.row(0).end(), 0.0);
      }
      return;
    }
  }
  layers.clear();
  for (const auto& L : config.layers) {
    const auto d = static_cast<std::size_t>(L.d_size);
    const auto z = static_cast<std::size_t>(L.z_size);
    layers.push_back(LayerTrace{Matrix(T + 1, d), Matrix(T + 1, d), Matrix(T, z), Matrix(T, z),
                                Matrix(T, z), Matrix(T, z), Matrix(T, z), Matrix(T, z)});
  }
  x = Matrix(T, static_cast<std::size_t>(config.output_dim));
  source.assign(T, LatentSource::Prior);
  has_posterior.assign(T, 0);
}

void rollout(const NetworkParams& params, const ModelConfig& config,
             const AdaptationVars* adaptation, int posterior_steps, int record_steps,
             const Noise& noise, ForwardTrace& out, const RolloutOptions& options) {
  const int L = config.num_layers();
  if (static_cast<int>(noise.eps.size()) != L) throw DimensionError("rollout: noise layer count");
  const int T = static_cast<int>(noise.eps.front().rows());
  record_steps = std::max(record_steps, posterior_steps);
  if (record_steps > 0) {
    if (adaptation == nullptr) throw std::invalid_argument("rollout: posterior needs adaptation");
    if (adaptation->steps() < std::min(record_steps, T) ||
        adaptation->width() != config.total_z()) {
      throw DimensionError("rollout: adaptation shape " + std::to_string(adaptation->steps()) +
                           "x" + std::to_string(adaptation->width()) + " does not match model");
    }
  }
  out.resize(config, T);
  const double floor = config.sigma_floor;
  const double cap = options.sigma_cap;

  std::vector<double> drive;
  for (int t = 1; t <= T; ++t) {
    const auto row = static_cast<std::size_t>(t - 1);
    const bool recorded = t <= record_steps;
    const bool from_posterior = t <= posterior_steps;
    out.source[row] = from_posterior ? LatentSource::Posterior : LatentSource::Prior;
    out.has_posterior[row] = recorded ? 1 : 0;

    for (int l = 0; l < L; ++l) {
      const auto& lp = params.layers[l];
      auto& lt = out.layers[l];
      const auto zs = static_cast<std::size_t>(config.layers[l].z_size);
      const auto prev_d = lt.d.row(row);

      auto mu_p = lt.mu_p.row(row);
      auto sigma_p = lt.sigma_p.row(row);
      if (t == 1) {
        std::fill(mu_p.begin(), mu_p.end(), 0.0);
        std::fill(sigma_p.begin(), sigma_p.end(), 1.0);
      } else {
        std::fill(mu_p.begin(), mu_p.end(), 0.0);
        std::fill(sigma_p.begin(), sigma_p.end(), 0.0);
        matvec_accumulate(lp.prior_mu, prev_d, mu_p);
        matvec_accumulate(lp.prior_log_sigma, prev_d, sigma_p);
        for (std::size_t i = 0; i < zs; ++i) {
          mu_p[i] = std::tanh(mu_p[i]);
          sigma_p[i] = std::max(std::exp(sigma_p[i]), floor);
        }
      }

      auto mu_q = lt.mu_q.row(row);
      auto sigma_q = lt.sigma_q.row(row);
      if (recorded) {
        const auto off = static_cast<std::size_t>(config.z_offset(l));
        const auto a_mu = adaptation->mu.row(row);
        const auto a_sigma = adaptation->sigma.row(row);
        for (std::size_t i = 0; i < zs; ++i) {
          mu_q[i] = std::tanh(a_mu[off + i]);
          sigma_q[i] = std::max(std::exp(a_sigma[off + i]), floor);
        }
      } else {
        std::fill(mu_q.begin(), mu_q.end(), 0.0);
        std::fill(sigma_q.begin(), sigma_q.end(), 0.0);
      }

      const auto eps = noise.eps[l].row(row);
      auto z = lt.z.row(row);
      auto eps_out = lt.eps.row(row);
      for (std::size_t i = 0; i < zs; ++i) {
        const double mu = from_posterior ? mu_q[i] : mu_p[i];
        const double sigma = std::min(from_posterior ? sigma_q[i] : sigma_p[i], cap);
        eps_out[i] = eps[i];
        z[i] = mu + sigma * eps[i];
      }

      drive.assign(lp.recurrent.rows(), 0.0);
      matvec_accumulate(lp.recurrent, prev_d, drive);
      matvec_accumulate(lp.latent, z, drive);
      if (l + 1 < L) matvec_accumulate(lp.top_down, out.layers[l + 1].d.row(row), drive);
      leaky_update(lt.h.row(row), drive, config.layers[l].tau, lt.h.row(row + 1),
                   lt.d.row(row + 1));
    }

    auto x = out.x.row(row);
    std::copy(params.output_bias.begin(), params.output_bias.end(), x.begin());
    matvec_accumulate(params.output, out.layers.front().d.row(row + 1), x);
  }
}

ForwardTrace forward_prior(const NetworkParams& params, const ModelConfig& config,
                           numeric::SeededRng& rng, int steps, const RolloutOptions& options) {
  const Noise noise = Noise::draw(config, steps, rng);
  ForwardTrace trace;
  rollout(params, config, nullptr, 0, 0, noise, trace, options);
  return trace;
}

ForwardTrace forward_posterior(const NetworkParams& params, const AdaptationVars& adaptation,
                               const ModelConfig& config, numeric::SeededRng& rng, int steps,
                               const RolloutOptions& options) {
  if (adaptation.steps() != steps) {
    throw DimensionError("forward_posterior: adaptation has " +
                         std::to_string(adaptation.steps()) + " steps, rollout needs " +
                         std::to_string(steps));
  }
  const Noise noise = Noise::draw(config, steps, rng);
  ForwardTrace trace;
  rollout(params, config, &adaptation, steps, steps, noise, trace, options);
  return trace;
}

ForwardTrace forward_posterior(const NetworkParams& params, const AdaptationVars& adaptation,
                               const ModelConfig& config, const Noise& noise) {
  const int steps = static_cast<int>(noise.eps.front().rows());
  if (adaptation.steps() != steps) throw DimensionError("forward_posterior: step mismatch");
  ForwardTrace trace;
  rollout(params, config, &adaptation, steps, steps, noise, trace);
  return trace;
}

std::vector<ForwardTrace> regenerate_target(const NetworkParams& params,
                                            const AdaptationVars& adaptation,
                                            const ModelConfig& config, numeric::SeededRng& rng,
                                            int n_rollouts, const RolloutOptions& options) {
  const int steps = adaptation.steps();
  std::vector<ForwardTrace> traces(static_cast<std::size_t>(std::max(n_rollouts, 0)));
  for (auto& trace : traces) {
    const Noise noise = Noise::draw(config, steps, rng);
    rollout(params, config, &adaptation, 1, steps, noise, trace, options);
  }
  return traces;
}

// ---------------------------------------------------------------------------

ElboReport evaluate_bound(const ForwardTrace& trace, const Matrix& target,
                          std::span<const double> error_weights, const ModelConfig& config) {
  const int T = trace.steps();
  if (static_cast<int>(target.rows()) != T || target.cols() != trace.x.cols()) {
    throw DimensionError("bound: target is " + std::to_string(target.rows()) + "x" +
                         std::to_string(target.cols()) + ", trace has " + std::to_string(T) +
                         " steps");
  }
  if (static_cast<int>(error_weights.size()) != T) throw DimensionError("bound: weight length");

  ElboReport r;
  double sq = 0.0;
  for (int t = 0; t < T; ++t) {
    const double w = error_weights[static_cast<std::size_t>(t)];
    if (w == 0.0) continue;
    const auto x = trace.x.row(static_cast<std::size_t>(t));
    const auto y = target.row(static_cast<std::size_t>(t));
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    sq += w * s;
  }
  r.accuracy = -0.5 * sq;

  for (int t = 1; t <= T; ++t) {
    const auto row = static_cast<std::size_t>(t - 1);
    if (!trace.has_posterior[row]) continue;
    for (int l = 0; l < config.num_layers(); ++l) {
      const auto& lt = trace.layers[static_cast<std::size_t>(l)];
      const double w = t == 1 ? config.w_init : config.layers[static_cast<std::size_t>(l)].w;
      const KldValue k = kld_term(lt.mu_q.row(row), lt.sigma_q.row(row), lt.mu_p.row(row),
                                  lt.sigma_p.row(row), w, t);
      r.complexity += k.weighted;
      r.kld_pq += k.unweighted;
    }
  }
  r.elbo = r.accuracy - r.complexity;
  return r;
}

ElboReport elbo(const ForwardTrace& trace, const Matrix& target, const ModelConfig& config) {
  const std::vector<double> ones(static_cast<std::size_t>(trace.steps()), 1.0);
  return evaluate_bound(trace, target, ones, config);
}

Matrix kld_profile(const ForwardTrace& trace, const ModelConfig& config) {
  const int T = trace.steps();
  const int L = config.num_layers();
  Matrix out(static_cast<std::size_t>(T), static_cast<std::size_t>(L));
  for (int t = 1; t <= T; ++t) {
    const auto row = static_cast<std::size_t>(t - 1);
    if (!trace.has_posterior[row]) continue;
    for (int l = 0; l < L; ++l) {
      const auto& lt = trace.layers[static_cast<std::size_t>(l)];
      out(row, static_cast<std::size_t>(l)) =
          kld_term(lt.mu_q.row(row), lt.sigma_q.row(row), lt.mu_p.row(row), lt.sigma_p.row(row),
                   1.0, t)
              .unweighted;
    }
  }
  return out;
}

}  // namespace glean::pvrnn
