#pragma once

#include <cstdint>
#include <vector>

#include "glean/dataset/trajectory.hpp"

namespace glean::dataset {

/// Layout of the 2D branching task. Times are 1-based timesteps.
struct TaskGeometry {
  Point start{0.0, 0.0};
  Point branch{0.38, 0.42};
  Point left_goal{0.2, 0.8};
  Point right_goal{0.85, 0.3};
  double goal_radius = 0.12;
  double goal_spread = 0.05;    // std-dev of sampled goals around their centre
  double center_spread = 0.03;  // same, for the untrained central goals
  double start_jitter = 0.01;   // max distance of the start from `start`
  double max_step = 0.15;
  std::vector<Box> obstacles{
      {0.0, 0.35, 0.12, 0.6},
      {0.55, 0.0, 0.8, 0.12},
      {0.75, 0.65, 1.0, 1.0},
  };
  int steps = 30;
  int branch_step = 10;
  int branch_step_jitter = 1;  // branch reached at branch_step +- this
  int arrival_min = 20;
  int arrival_max = 30;
  int max_retries = 1000;

  Point goal_center(GoalLabel label) const;
  /// Midpoint of the two trained goal centres.
  Point center_goal() const;
  bool in_obstacle(Point p) const;
  bool in_goal_region(Point p, GoalLabel label) const;
  /// Throws ConfigError when a goal region touches an obstacle or timings are inconsistent.
  void validate() const;
};

/// Balanced left/right corpus. Each trajectory is a cubic Hermite spline through the start,
/// the branch point and a sampled goal, with stationary padding once the goal is reached,
/// plus per-point jitter of std-dev `noise_scale`. Trajectory i draws from
/// SeededRng::derive(seed, {i}); labels are a seeded shuffle of n/2 of each side.
/// Throws ConfigError for odd n and NumericalError if a trajectory cannot be placed clear
/// of the obstacles within max_retries.
std::vector<Trajectory> generate_dataset(std::uint64_t seed, int n, const TaskGeometry& geometry,
                                         double noise_scale);

/// Trajectories that go straight through the branch point to goals near the midpoint of
/// the two trained regions, outside both of them.
std::vector<Trajectory> generate_center_goal_set(std::uint64_t seed, int n,
                                                 const TaskGeometry& geometry);

/// Per-trajectory validity: positions in [0,1]^2, steps within max_step, no obstacle hits.
bool trajectory_valid(const Trajectory& trajectory, const TaskGeometry& geometry);

}  // namespace glean::dataset
