#pragma once

#include <cstdint>
#include <vector>

namespace glean::pvrnn {

/// One MTRNN layer. Layer 0 is the bottom (fastest) layer.
struct LayerConfig {
  int d_size = 1;     // deterministic units
  int z_size = 0;     // stochastic units
  double tau = 1.0;   // time constant, >= 1
  double w = 0.0;     // meta-prior weighting this layer's KLD for t > 1
};

struct ModelConfig {
  std::vector<LayerConfig> layers;
  double w_init = 0.001;  // weight of the t = 1 KLD against N(0, I)
  int output_dim = 2;
  int seq_len = 30;
  double lr = 0.001;
  int epochs = 50000;
  double error_dropout = 0.1;
  std::uint64_t seed = 1;
  double sigma_floor = 1e-6;

  /// Throws ConfigError on any violated invariant (including tau strictly increasing
  /// from bottom to top).
  void validate() const;

  int num_layers() const { return static_cast<int>(layers.size()); }
  int total_z() const;
  int total_d() const;
  /// Column offset of layer l inside a row of AdaptationVars.
  int z_offset(int layer) const;
};

/// Two-layer network used for the 2D mobile-agent task: d = (20, 10), z = (2, 1),
/// tau = (4, 8). Meta-priors are filled in by the caller.
ModelConfig two_layer_2d_config(double w_bottom, double w_top);

}  // namespace glean::pvrnn
