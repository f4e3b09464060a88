#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "glean/dataset/generator.hpp"
#include "glean/numeric/matrix.hpp"
#include "glean/planner/planner.hpp"
#include "glean/pvrnn/model.hpp"

namespace glean::harness {

using numeric::Matrix;

enum class Region { Left, Right, Neither };

std::string region_name(Region region);

/// Goal region holding the point (closed disc of the goal radius), or Neither.
Region classify_endpoint(dataset::Point p, const dataset::TaskGeometry& geometry);
/// Left or Right, whichever goal centre is closer; Left on a tie.
Region nearest_goal(dataset::Point p, const dataset::TaskGeometry& geometry);

struct Metrics {
  double rmse = 0.0;
  double goal_deviation = 0.0;  // distance from the final state to the requested goal
  double kld_pq = 0.0;
  bool success = false;         // final state inside the target's goal region
  Region region = Region::Neither;
};

/// `goal` is the requested final state; success is judged against the region of the
/// truth's label (the central goal for Center) with the closed goal radius.
Metrics plan_metrics(const Matrix& plan, const dataset::Trajectory& truth,
                     std::span<const double> goal, double kld_pq,
                     const dataset::TaskGeometry& geometry);

struct GoalDistribution {
  double left = 0.0;  // percentages of endpoints inside each region
  double right = 0.0;
  double neither = 0.0;
  double nearest_left = 0.0;  // binary split by nearest goal centre
  double nearest_right = 0.0;
};

/// Endpoint statistics over the last row of every rollout. Throws DimensionError when
/// `rollouts` is empty.
GoalDistribution goal_distribution(std::span<const Matrix> rollouts,
                                   const dataset::TaskGeometry& geometry);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
};

Summary summarize(std::span<const double> values);

struct PlanEntry {
  int goal = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
  Metrics metrics;
};

/// Outcome of one pipeline stage. Everything in it is a pure function of the spec and
/// seeds; timing lives elsewhere so records compare byte for byte across reruns.
struct RunRecord {
  std::string stage;
  std::string model;         // model name from the spec
  std::string kind;          // PVRNN, FM or SI
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<PlanEntry> plans;
  std::map<std::string, Summary> aggregates;
  std::map<std::string, double> values;  // stage-specific scalars
};

/// Per-plan metrics paired with their ground truth, plus mean and sd of rmse,
/// goal_deviation, kld_pq and success over all entries. Throws DimensionError when the
/// lists differ in length.
RunRecord evaluate_plans(std::span<const planner::PlanResult> plans,
                         std::span<const dataset::Trajectory> truths,
                         std::span<const planner::PlanRequest> requests,
                         const dataset::TaskGeometry& geometry);

/// Recomputes the aggregates from the per-plan entries.
std::map<std::string, Summary> plan_aggregates(std::span<const PlanEntry> plans);

std::string to_json(const RunRecord& record);
RunRecord record_from_json(const std::string& text);
void write_record(const std::filesystem::path& path, const RunRecord& record);
RunRecord read_record(const std::filesystem::path& path);

struct KldSeries {
  Matrix mean;  // steps x layers
  Matrix sd;
};

/// Per-step, per-layer mean and sample sd of the unweighted KLD over the traces.
/// Throws DimensionError when `traces` is empty or their lengths differ.
KldSeries kld_timeseries(std::span<const pvrnn::ForwardTrace> traces,
                         const pvrnn::ModelConfig& config);

/// Columns t,layer,mean,sd with t 1-based and layer 0 at the bottom.
void write_kld_csv(const std::filesystem::path& path, const KldSeries& series);

/// Columns id,t,x,y for a set of rollouts or plans.
void write_paths_csv(const std::filesystem::path& path, std::span<const Matrix> paths);

}  // namespace glean::harness
