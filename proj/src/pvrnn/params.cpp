#include "glean/pvrnn/params.hpp"

#include <cmath>

namespace glean::pvrnn {

namespace {

void glorot_fill(Matrix& m, numeric::SeededRng& rng) {
  if (m.empty()) return;
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& v : m.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
}

}  // namespace

NetworkParams NetworkParams::zeros(const ModelConfig& config) {
  NetworkParams p;
  const int L = config.num_layers();
  p.layers.resize(L);
  for (int l = 0; l < L; ++l) {
    const auto d = static_cast<std::size_t>(config.layers[l].d_size);
    const auto z = static_cast<std::size_t>(config.layers[l].z_size);
    auto& lp = p.layers[l];
    lp.recurrent = Matrix(d, d);
    lp.latent = Matrix(d, z);
    lp.top_down =
        l + 1 < L ? Matrix(d, static_cast<std::size_t>(config.layers[l + 1].d_size)) : Matrix();
    lp.prior_mu = Matrix(z, d);
    lp.prior_log_sigma = Matrix(z, d);
  }
  p.output = Matrix(static_cast<std::size_t>(config.output_dim),
                    static_cast<std::size_t>(config.layers.front().d_size));
  p.output_bias.assign(static_cast<std::size_t>(config.output_dim), 0.0);
  return p;
}

NetworkParams NetworkParams::glorot(const ModelConfig& config, numeric::SeededRng& rng) {
  NetworkParams p = zeros(config);
  for (auto& lp : p.layers) {
    glorot_fill(lp.recurrent, rng);
    glorot_fill(lp.latent, rng);
    glorot_fill(lp.top_down, rng);
    glorot_fill(lp.prior_mu, rng);
    glorot_fill(lp.prior_log_sigma, rng);
  }
  glorot_fill(p.output, rng);
  return p;
}

void NetworkParams::set_zero() {
  for_each_block([](const std::string&, std::span<double> v) {
    for (double& x : v) x = 0.0;
  });
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (!(a.recurrent == b.recurrent && a.latent == b.latent && a.top_down == b.top_down &&
          a.prior_mu == b.prior_mu && a.prior_log_sigma == b.prior_log_sigma)) {
      return false;
    }
  }
  return output == other.output && output_bias == other.output_bias;
}

AdaptationVars AdaptationVars::zeros(const ModelConfig& config, int steps) {
  const auto rows = static_cast<std::size_t>(steps);
  const auto cols = static_cast<std::size_t>(config.total_z());
  return AdaptationVars{Matrix(rows, cols), Matrix(rows, cols)};
}

void AdaptationVars::set_zero() {
  mu.fill(0.0);
  sigma.fill(0.0);
}

}  // namespace glean::pvrnn
