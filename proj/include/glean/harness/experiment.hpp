#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "glean/dataset/generator.hpp"
#include "glean/harness/checkpoint.hpp"
#include "glean/harness/spec_file.hpp"
#include "glean/pvrnn/train.hpp"

namespace glean::harness {

struct DatasetSpec {
  std::uint64_t seed = 0;
  int count = 60;
  double noise = 0.005;
  std::uint64_t test_seed = 0;
  int test_count = 20;
  std::uint64_t center_seed = 0;
  int center_count = 10;
};

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::PVRNN;
  pvrnn::ModelConfig config;
  double blend = 0.9;       // FM and SI training input blend
  double clip_norm = 50.0;  // SI
  std::filesystem::path checkpoint;  // empty: produced by the train stage
};

struct PriorGenSpec {
  std::vector<std::string> models;
  int rollouts = 60;
  std::uint64_t seed = 0;
};

struct RegenSpec {
  std::vector<std::string> models;
  int rollouts = 60;
  dataset::GoalLabel label = dataset::GoalLabel::Left;
  std::uint64_t seed = 0;
};

struct PlanStageSpec {
  std::vector<std::string> models;
  std::vector<std::string> center_models;  // also planned towards the untrained goals
  int repetitions = 10;
  int epochs = 500;
  double rate = 0.05;
  int candidates = 10;
  std::uint64_t seed = 0;
};

struct LookaheadStageSpec {
  std::vector<std::string> models;
  int count = 20;
  int window = 0;
  int regression_epochs = 30;
  int initial_epochs = 500;
  double rate = 0.05;
  double blend = 0.9;
  std::uint64_t seed = 0;
};

struct CompareSpec {
  std::string glean = "intermediate";
  std::string fm = "fm";
  std::string si = "si";
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  dataset::TaskGeometry geometry;
  DatasetSpec dataset;
  std::vector<ModelSpec> models;
  PriorGenSpec prior_gen;
  RegenSpec target_regen;
  PlanStageSpec plan;
  LookaheadStageSpec lookahead;
  CompareSpec compare;
  std::vector<std::string> stages;

  /// Throws ConfigError for an unknown name.
  const ModelSpec& model(const std::string& name) const;
};

/// Stage names in execution order.
const std::vector<std::string>& stage_names();

/// Builds the experiment from a spec file. Seeds not given explicitly are derived from
/// [experiment] seed. Throws ConfigError on unknown sections or keys, unknown model
/// names, bad values, or a referenced checkpoint that does not exist.
ExperimentSpec parse_experiment(const SpecFile& spec);

struct RunOptions {
  pvrnn::Execution execution = pvrnn::Execution::Parallel;
  std::function<void(const std::string&)> log;
};

/// Runs the given stages in execution order under `out_dir`. Each stage writes into its
/// own sub-directory and marks it complete at the end; a complete stage is skipped, never
/// rewritten. Inputs of every requested stage are checked before any compute starts
/// (ConfigError). `spec` is snapshotted into the run directory; a run directory holding a
/// different snapshot is refused.
void run_stages(const ExperimentSpec& experiment, const SpecFile& spec,
                const std::filesystem::path& out_dir, const std::vector<std::string>& stages,
                const RunOptions& options = {});

/// run_stages over the spec's own stage list.
void run_experiment(const ExperimentSpec& experiment, const SpecFile& spec,
                    const std::filesystem::path& out_dir, const RunOptions& options = {});

/// True when `stage` finished inside `out_dir`.
bool stage_complete(const std::filesystem::path& out_dir, const std::string& stage);

/// Plain-text summary of every run record found under `out_dir`.
std::string report(const std::filesystem::path& out_dir);

}  // namespace glean::harness
