#include "glean/pvrnn/gradients.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "glean/error.hpp"

namespace glean::pvrnn {

using numeric::matvec_transpose_accumulate;
using numeric::outer_accumulate;

Gradients Gradients::zeros(const ModelConfig& config, int steps) {
  return Gradients{NetworkParams::zeros(config), AdaptationVars::zeros(config, steps)};
}

void Gradients::set_zero() {
  params.set_zero();
  adaptation.set_zero();
}

void backward(const NetworkParams& params, const ModelConfig& config, const ForwardTrace& trace,
              const Matrix& target, std::span<const double> error_weights, Gradients& out,
              const BackwardOptions& options) {
  const int T = trace.steps();
  const int L = config.num_layers();
  if (static_cast<int>(target.rows()) != T || target.cols() != trace.x.cols() ||
      static_cast<int>(error_weights.size()) != T) {
    throw DimensionError("backward: target/weights do not match trace length " +
                         std::to_string(T));
  }
  if (out.adaptation.steps() != T || out.adaptation.width() != config.total_z() ||
      out.params.layers.size() != params.layers.size()) {
    out = Gradients::zeros(config, T);
  } else {
    out.set_zero();
  }
  const double floor = config.sigma_floor;

  // Per-layer carries from step t+1: dL/dh_{t+1} and dL/d(prior pre-activations)_{t+1}.
  std::vector<Vector> gh_next(L), gh(L), gd(L), gpre_mu_next(L), gpre_sig_next(L), gpre_mu(L),
      gpre_sig(L), gz(L), drive(L);
  for (int l = 0; l < L; ++l) {
    const auto d = static_cast<std::size_t>(config.layers[l].d_size);
    const auto z = static_cast<std::size_t>(config.layers[l].z_size);
    gh_next[l].assign(d, 0.0);
    gh[l].assign(d, 0.0);
    gd[l].assign(d, 0.0);
    drive[l].assign(d, 0.0);
    gpre_mu_next[l].assign(z, 0.0);
    gpre_sig_next[l].assign(z, 0.0);
    gpre_mu[l].assign(z, 0.0);
    gpre_sig[l].assign(z, 0.0);
    gz[l].assign(z, 0.0);
  }
  Vector gx(static_cast<std::size_t>(config.output_dim), 0.0);

  for (int t = T; t >= 1; --t) {
    const auto row = static_cast<std::size_t>(t - 1);
    const auto cur = static_cast<std::size_t>(t);  // row of d_t / h_t in the trace

    // dL/dx_t
    const double ew = error_weights[row];
    const auto x = trace.x.row(row);
    const auto y = target.row(row);
    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] = ew * (x[k] - y[k]);

    // dL/dd^l_t
    for (int l = 0; l < L; ++l) {
      std::fill(gd[l].begin(), gd[l].end(), 0.0);
      if (l == 0 && ew != 0.0) {
        matvec_transpose_accumulate(params.output, gx, gd[0]);
        if (options.params) {
          outer_accumulate(out.params.output, gx, trace.layers[0].d.row(cur));
          for (std::size_t k = 0; k < gx.size(); ++k) out.params.output_bias[k] += gx[k];
        }
      }
      if (t < T) {
        const auto& lp = params.layers[l];
        // drive[l] holds gh_next[l] / tau_l from the previous iteration.
        matvec_transpose_accumulate(lp.recurrent, drive[l], gd[l]);
        if (l >= 1) matvec_transpose_accumulate(params.layers[l - 1].top_down, drive[l - 1], gd[l]);
        matvec_transpose_accumulate(lp.prior_mu, gpre_mu_next[l], gd[l]);
        matvec_transpose_accumulate(lp.prior_log_sigma, gpre_sig_next[l], gd[l]);
      }
    }

    for (int l = 0; l < L; ++l) {
      const auto& lc = config.layers[l];
      const auto& lp = params.layers[l];
      const auto& lt = trace.layers[l];
      const double keep = 1.0 - 1.0 / lc.tau;
      const double inv_tau = 1.0 / lc.tau;
      const auto d_t = lt.d.row(cur);
      for (std::size_t i = 0; i < gh[l].size(); ++i) {
        gh[l][i] = gd[l][i] * (1.0 - d_t[i] * d_t[i]) + keep * gh_next[l][i];
      }
      // Gradient w.r.t. the drive (W_dd d + W_zd z + W_td d_above) at step t.
      for (std::size_t i = 0; i < gh[l].size(); ++i) drive[l][i] = inv_tau * gh[l][i];

      const auto d_prev = lt.d.row(row);
      const auto z = lt.z.row(row);
      if (options.params) {
        outer_accumulate(out.params.layers[l].recurrent, drive[l], d_prev);
        outer_accumulate(out.params.layers[l].latent, drive[l], z);
        if (l + 1 < L) {
          outer_accumulate(out.params.layers[l].top_down, drive[l], trace.layers[l + 1].d.row(row));
        }
      }

      const auto zs = static_cast<std::size_t>(lc.z_size);
      std::fill(gz[l].begin(), gz[l].end(), 0.0);
      matvec_transpose_accumulate(lp.latent, drive[l], gz[l]);

      const auto mu_p = lt.mu_p.row(row);
      const auto sigma_p = lt.sigma_p.row(row);
      const auto mu_q = lt.mu_q.row(row);
      const auto sigma_q = lt.sigma_q.row(row);
      const auto eps = lt.eps.row(row);
      const bool posterior = trace.has_posterior[row] != 0;
      const bool sampled_posterior = trace.source[row] == LatentSource::Posterior;
      const double w = t == 1 ? config.w_init : lc.w;
      const auto off = static_cast<std::size_t>(config.z_offset(l));

      for (std::size_t i = 0; i < zs; ++i) {
        double g_mu_q = 0.0, g_sig_q = 0.0, g_mu_p = 0.0, g_sig_p = 0.0;
        if (posterior) {
          const double sp2 = sigma_p[i] * sigma_p[i];
          const double diff = mu_q[i] - mu_p[i];
          g_mu_q += w * diff / sp2;
          g_sig_q += w * (-1.0 / sigma_q[i] + sigma_q[i] / sp2);
          if (t > 1) {
            g_mu_p += -w * diff / sp2;
            g_sig_p += w * (1.0 / sigma_p[i] - (diff * diff + sigma_q[i] * sigma_q[i]) /
                                                   (sp2 * sigma_p[i]));
          }
        }
        if (sampled_posterior) {
          g_mu_q += gz[l][i];
          g_sig_q += gz[l][i] * eps[i];
        } else if (t > 1) {
          g_mu_p += gz[l][i];
          g_sig_p += gz[l][i] * eps[i];
        }
        if (posterior && options.adaptation) {
          out.adaptation.mu(row, off + i) = g_mu_q * (1.0 - mu_q[i] * mu_q[i]);
          out.adaptation.sigma(row, off + i) = sigma_q[i] > floor ? g_sig_q * sigma_q[i] : 0.0;
        }
        if (t > 1) {
          gpre_mu[l][i] = g_mu_p * (1.0 - mu_p[i] * mu_p[i]);
          gpre_sig[l][i] = sigma_p[i] > floor ? g_sig_p * sigma_p[i] : 0.0;
        } else {
          gpre_mu[l][i] = 0.0;
          gpre_sig[l][i] = 0.0;
        }
      }
      if (t > 1 && options.params) {
        outer_accumulate(out.params.layers[l].prior_mu, gpre_mu[l], d_prev);
        outer_accumulate(out.params.layers[l].prior_log_sigma, gpre_sig[l], d_prev);
      }
    }

    std::swap(gh_next, gh);
    std::swap(gpre_mu_next, gpre_mu);
    std::swap(gpre_sig_next, gpre_sig);
  }
}

}  // namespace glean::pvrnn
