#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "glean/baselines/fm.hpp"
#include "glean/baselines/si.hpp"
#include "glean/pvrnn/params.hpp"

namespace glean::harness {

enum class ModelKind { PVRNN, FM, SI };

std::string kind_name(ModelKind kind);
/// Throws ConfigError for an unknown name.
ModelKind parse_kind(const std::string& name);

/// A trained model of any kind. Only the members matching `kind` are meaningful.
struct Checkpoint {
  ModelKind kind = ModelKind::PVRNN;
  pvrnn::ModelConfig config;
  pvrnn::NetworkParams pvrnn;
  std::vector<pvrnn::AdaptationVars> adaptation;  // PVRNN, one per training sequence
  baselines::FmParams fm;
  baselines::SiParams si;
  std::vector<baselines::InitialState> initial;   // SI, one per training sequence
};

/// Text container, one item per line, every real number as a C99 hex float so values
/// round-trip exactly:
///
///   glean-checkpoint 1
///   kind <PVRNN|FM|SI>
///   seed <u64>
///   w_init <x>  output_dim <n>  seq_len <n>  lr <x>  epochs <n>  error_dropout <x>
///   sigma_floor <x>                                  (each on its own line)
///   layers <L>
///   layer <d_size> <z_size> <tau> <w>                (L lines, bottom first)
///   block <name> <count>                             (then one line of <count> values)
///   ...
///   sequences <n>
///   block ...                                        (2 n per-sequence blocks)
///   end
///
/// PVRNN weight blocks are the NetworkParams blocks in for_each_block order; each training
/// sequence then has A_mu[i] and A_sigma[i] (row-major, seq_len x total_z). FM and SI
/// weight blocks are the RnnParams blocks; SI sequences have A1_mu[i] and A1_sigma[i]
/// (total_d values each) and FM has none. Empty blocks are written with count 0.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Inverse of save_checkpoint. Throws ConfigError when the file is missing and
/// FormatError (with the line number) when it is malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace glean::harness
