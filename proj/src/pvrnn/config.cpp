#include "glean/pvrnn/config.hpp"

#include <string>

#include "glean/error.hpp"

namespace glean::pvrnn {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (layers.empty()) fail("at least one layer is required");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string tag = "layer " + std::to_string(l) + ": ";
    if (L.d_size < 1) fail(tag + "d_size must be >= 1");
    if (L.z_size < 0) fail(tag + "z_size must be >= 0");
    if (!(L.tau >= 1.0)) fail(tag + "tau must be >= 1");
    if (!(L.w >= 0.0)) fail(tag + "meta-prior w must be >= 0");
    if (l > 0 && !(L.tau > layers[l - 1].tau)) fail(tag + "tau must increase toward the top");
  }
  if (output_dim < 1) fail("output_dim must be >= 1");
  if (seq_len < 1) fail("seq_len must be >= 1");
  if (!(w_init >= 0.0)) fail("w_init must be >= 0");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (epochs < 0) fail("epochs must be >= 0");
  if (!(error_dropout >= 0.0 && error_dropout < 1.0)) fail("error_dropout must be in [0, 1)");
  if (!(sigma_floor > 0.0)) fail("sigma_floor must be > 0");
}

int ModelConfig::total_z() const {
  int n = 0;
  for (const auto& L : layers) n += L.z_size;
  return n;
}

int ModelConfig::total_d() const {
  int n = 0;
  for (const auto& L : layers) n += L.d_size;
  return n;
}

int ModelConfig::z_offset(int layer) const {
  int n = 0;
  for (int l = 0; l < layer; ++l) n += layers[l].z_size;
  return n;
}

ModelConfig two_layer_2d_config(double w_bottom, double w_top) {
  ModelConfig c;
  c.layers = {LayerConfig{20, 2, 4.0, w_bottom}, LayerConfig{10, 1, 8.0, w_top}};
  c.output_dim = 2;
  c.seq_len = 30;
  return c;
}

}  // namespace glean::pvrnn
