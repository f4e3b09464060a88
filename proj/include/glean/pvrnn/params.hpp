#pragma once

#include <span>
#include <string>
#include <vector>

#include "glean/numeric/matrix.hpp"
#include "glean/numeric/rng.hpp"
#include "glean/pvrnn/config.hpp"

namespace glean::pvrnn {

using numeric::Matrix;
using numeric::Vector;

struct LayerParams {
  Matrix recurrent;        // d^l_{t-1} -> h^l        (d x d)
  Matrix latent;           // z^l_t -> h^l            (d x z)
  Matrix top_down;         // d^{l+1}_{t-1} -> h^l    (d x d_above), empty at the top
  Matrix prior_mu;         // d^l_{t-1} -> mu^p pre-tanh   (z x d)
  Matrix prior_log_sigma;  // d^l_{t-1} -> sigma^p pre-exp (z x d)
};

/// All trainable weights of the generative model. The output head is affine in the
/// bottom-layer d and has no nonlinearity.
struct NetworkParams {
  std::vector<LayerParams> layers;
  Matrix output;       // output_dim x d_0
  Vector output_bias;  // output_dim

  static NetworkParams zeros(const ModelConfig& config);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)); output bias zero.
  static NetworkParams glorot(const ModelConfig& config, numeric::SeededRng& rng);

  /// Visits every block as (name, values) in a fixed order.
  template <typename F>
  void for_each_block(F&& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      fn(p + "recurrent", layers[l].recurrent.values());
      fn(p + "latent", layers[l].latent.values());
      fn(p + "top_down", layers[l].top_down.values());
      fn(p + "prior_mu", layers[l].prior_mu.values());
      fn(p + "prior_log_sigma", layers[l].prior_log_sigma.values());
    }
    fn(std::string("output"), output.values());
    fn(std::string("output_bias"), std::span<double>(output_bias));
  }
  template <typename F>
  void for_each_block(F&& fn) const {
    const_cast<NetworkParams*>(this)->for_each_block(
        [&](const std::string& name, std::span<double> v) {
          fn(name, std::span<const double>(v));
        });
  }

  void set_zero();
  bool operator==(const NetworkParams&) const;
};

/// Raw posterior parameters for one sequence: row t-1 holds A^mu_t (resp. A^sigma_t) for
/// all layers, layer l occupying columns [z_offset(l), z_offset(l) + z_size).
struct AdaptationVars {
  Matrix mu;
  Matrix sigma;

  static AdaptationVars zeros(const ModelConfig& config, int steps);
  int steps() const { return static_cast<int>(mu.rows()); }
  int width() const { return static_cast<int>(mu.cols()); }
  void set_zero();
  bool operator==(const AdaptationVars&) const = default;
};

}  // namespace glean::pvrnn
