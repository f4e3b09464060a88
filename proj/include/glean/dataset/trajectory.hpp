#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "glean/numeric/matrix.hpp"

namespace glean::dataset {

using numeric::Matrix;

enum class GoalLabel { Left, Right, Center };

std::string label_name(GoalLabel label);
/// Throws std::invalid_argument for anything but "left", "right" or "center".
GoalLabel parse_label(const std::string& name);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

/// Axis-aligned obstacle; the boundary counts as inside.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool contains(Point p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

/// A T x 2 sequence of agent positions in [0, 1]^2.
struct Trajectory {
  Matrix positions;
  GoalLabel label = GoalLabel::Left;
  std::uint64_t seed = 0;

  int steps() const { return static_cast<int>(positions.rows()); }
  Point at(int row) const {
    return {positions(static_cast<std::size_t>(row), 0), positions(static_cast<std::size_t>(row), 1)};
  }
  Point start() const { return at(0); }
  Point end() const { return at(steps() - 1); }

  bool operator==(const Trajectory&) const = default;
};

std::vector<Matrix> positions_of(std::span<const Trajectory> trajectories);

/// Plain-text trajectory container.
///
///   line 1:  # glean-trajectories version=1 T=<steps> dims=<dims> count=<n>
///   then n * T rows, trajectory-major then time-major:
///            id,t,x,y,label,seed
///   id is 0-based, t is 1-based, coordinates are printed with 17 significant digits,
///   label is left|right|center and seed is the trajectory's unsigned 64-bit seed.
///   With dims != 2 the coordinate columns are c0..c{dims-1} in place of x,y.
void save_trajectories(const std::filesystem::path& path,
                       std::span<const Trajectory> trajectories);

/// Inverse of save_trajectories. Throws FormatError (with a line number) for a malformed
/// or truncated file; never returns partial data.
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

}  // namespace glean::dataset
