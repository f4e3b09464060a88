#include "glean/dataset/generator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glean/error.hpp"
#include "glean/numeric/rng.hpp"

namespace glean::dataset {

using numeric::SeededRng;

namespace {

constexpr std::uint64_t kLabelStream = 0x1abe1ULL;
constexpr std::uint64_t kCenterStream = 0xce17e7ULL;

struct Knot {
  double t;
  Point p;
  Point v;  // velocity per timestep
};

Point hermite(const Knot& a, const Knot& b, double t) {
  const double span = b.t - a.t;
  const double s = (t - a.t) / span;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return {h00 * a.p.x + h10 * span * a.v.x + h01 * b.p.x + h11 * span * b.v.x,
          h00 * a.p.y + h10 * span * a.v.y + h01 * b.p.y + h11 * span * b.v.y};
}

Point jittered_start(const TaskGeometry& g, SeededRng& rng) {
  double dx = std::abs(rng.normal()) * g.start_jitter * 0.5;
  double dy = std::abs(rng.normal()) * g.start_jitter * 0.5;
  const double r = std::hypot(dx, dy);
  if (r > g.start_jitter) {
    dx *= g.start_jitter / r;
    dy *= g.start_jitter / r;
  }
  return {g.start.x + dx, g.start.y + dy};
}

Point sample_goal(Point center, double spread, double radius, SeededRng& rng) {
  for (;;) {
    const Point p{center.x + spread * rng.normal(), center.y + spread * rng.normal()};
    if (distance(p, center) <= radius) return p;
  }
}

// Start -> branch -> goal, stationary after arrival. Jitter touches only the moving part,
// so the start and the padded goal stay exact.
Trajectory build(const TaskGeometry& g, Point start, Point goal, int branch_t, int arrive_t,
                 double noise_scale, SeededRng& rng) {
  const Point branch_v{(goal.x - start.x) / (arrive_t - 1), (goal.y - start.y) / (arrive_t - 1)};
  const Knot k0{1.0, start, {0.0, 0.0}};
  const Knot k1{static_cast<double>(branch_t), g.branch, branch_v};
  const Knot k2{static_cast<double>(arrive_t), goal, {0.0, 0.0}};

  Trajectory tr;
  tr.positions = Matrix(static_cast<std::size_t>(g.steps), 2);
  for (int t = 1; t <= g.steps; ++t) {
    Point p;
    if (t >= arrive_t) {
      p = goal;
    } else if (t <= branch_t) {
      p = hermite(k0, k1, t);
    } else {
      p = hermite(k1, k2, t);
    }
    if (t > 1 && t < arrive_t && noise_scale > 0.0) {
      p.x += noise_scale * rng.normal();
      p.y += noise_scale * rng.normal();
    }
    const auto row = static_cast<std::size_t>(t - 1);
    tr.positions(row, 0) = std::clamp(p.x, 0.0, 1.0);
    tr.positions(row, 1) = std::clamp(p.y, 0.0, 1.0);
  }
  return tr;
}

void check_count(int n, bool even) {
  if (n < 1) throw ConfigError("trajectory count must be >= 1, got " + std::to_string(n));
  if (even && n % 2 != 0) {
    throw ConfigError("balanced dataset needs an even count, got " + std::to_string(n));
  }
}

}  // namespace

Point TaskGeometry::goal_center(GoalLabel label) const {
  switch (label) {
    case GoalLabel::Left:
      return left_goal;
    case GoalLabel::Right:
      return right_goal;
    case GoalLabel::Center:
      return center_goal();
  }
  return center_goal();
}

Point TaskGeometry::center_goal() const {
  return {(left_goal.x + right_goal.x) / 2.0, (left_goal.y + right_goal.y) / 2.0};
}

bool TaskGeometry::in_obstacle(Point p) const {
  return std::any_of(obstacles.begin(), obstacles.end(), [&](const Box& b) { return b.contains(p); });
}

bool TaskGeometry::in_goal_region(Point p, GoalLabel label) const {
  return distance(p, goal_center(label)) <= goal_radius;
}

void TaskGeometry::validate() const {
  if (steps < 2) throw ConfigError("geometry: steps must be >= 2");
  if (goal_radius <= 0.0 || goal_spread < 0.0 || center_spread < 0.0 || max_step <= 0.0) {
    throw ConfigError("geometry: radii, spreads and max_step must be positive");
  }
  if (branch_step - branch_step_jitter < 2 ||
      branch_step + branch_step_jitter >= arrival_min || arrival_min > arrival_max ||
      arrival_max > steps) {
    throw ConfigError("geometry: need 2 <= branch step < arrival_min <= arrival_max <= steps");
  }
  for (const Box& b : obstacles) {
    if (b.x_min > b.x_max || b.y_min > b.y_max) throw ConfigError("geometry: inverted obstacle box");
    for (const Point c : {left_goal, right_goal}) {
      // Closest point of the box to the goal centre.
      const Point q{std::clamp(c.x, b.x_min, b.x_max), std::clamp(c.y, b.y_min, b.y_max)};
      if (distance(q, c) <= goal_radius) {
        throw ConfigError("geometry: a goal region overlaps an obstacle");
      }
    }
  }
  if (distance(left_goal, right_goal) <= 2.0 * goal_radius) {
    throw ConfigError("geometry: goal regions overlap");
  }
}

bool trajectory_valid(const Trajectory& tr, const TaskGeometry& g) {
  for (int t = 0; t < tr.steps(); ++t) {
    const Point p = tr.at(t);
    if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0) return false;
    if (g.in_obstacle(p)) return false;
    if (t > 0 && distance(p, tr.at(t - 1)) > g.max_step) return false;
  }
  return true;
}

std::vector<Trajectory> generate_dataset(std::uint64_t seed, int n, const TaskGeometry& geometry,
                                         double noise_scale) {
  check_count(n, true);
  geometry.validate();
  if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be >= 0");

  std::vector<GoalLabel> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < n / 2 ? GoalLabel::Left : GoalLabel::Right;
  auto shuffle_rng = SeededRng::derive(seed, {kLabelStream});
  for (int i = n - 1; i > 0; --i) {
    std::swap(labels[static_cast<std::size_t>(i)],
              labels[static_cast<std::size_t>(shuffle_rng.uniform_int(0, i))]);
  }

  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    auto rng = SeededRng::derive(seed, {idx});
    const GoalLabel label = labels[static_cast<std::size_t>(i)];
    bool placed = false;
    for (int attempt = 0; attempt < geometry.max_retries && !placed; ++attempt) {
      const Point start = jittered_start(geometry, rng);
      const int branch_t = rng.uniform_int(geometry.branch_step - geometry.branch_step_jitter,
                                           geometry.branch_step + geometry.branch_step_jitter);
      const int arrive_t = rng.uniform_int(geometry.arrival_min, geometry.arrival_max);
      const Point goal = sample_goal(geometry.goal_center(label), geometry.goal_spread,
                                     geometry.goal_radius, rng);
      Trajectory tr = build(geometry, start, goal, branch_t, arrive_t, noise_scale, rng);
      if (trajectory_valid(tr, geometry)) {
        tr.label = label;
        tr.seed = SeededRng::derive_seed(seed, {idx});
        out[static_cast<std::size_t>(i)] = std::move(tr);
        placed = true;
      }
    }
    if (!placed) {
      throw NumericalError("trajectory " + std::to_string(i) + " hits an obstacle after " +
                           std::to_string(geometry.max_retries) + " retries");
    }
  }
  return out;
}

std::vector<Trajectory> generate_center_goal_set(std::uint64_t seed, int n,
                                                 const TaskGeometry& geometry) {
  check_count(n, false);
  geometry.validate();
  const Point center = geometry.center_goal();
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    auto rng = SeededRng::derive(seed, {kCenterStream, idx});
    bool placed = false;
    for (int attempt = 0; attempt < geometry.max_retries && !placed; ++attempt) {
      const Point start = jittered_start(geometry, rng);
      const int branch_t = rng.uniform_int(geometry.branch_step - geometry.branch_step_jitter,
                                           geometry.branch_step + geometry.branch_step_jitter);
      const int arrive_t = rng.uniform_int(geometry.arrival_min, geometry.arrival_max);
      const Point goal{center.x + geometry.center_spread * rng.normal(),
                       center.y + geometry.center_spread * rng.normal()};
      if (geometry.in_goal_region(goal, GoalLabel::Left) ||
          geometry.in_goal_region(goal, GoalLabel::Right)) {
        continue;
      }
      Trajectory tr = build(geometry, start, goal, branch_t, arrive_t, 0.0, rng);
      if (trajectory_valid(tr, geometry)) {
        tr.label = GoalLabel::Center;
        tr.seed = SeededRng::derive_seed(seed, {kCenterStream, idx});
        out[static_cast<std::size_t>(i)] = std::move(tr);
        placed = true;
      }
    }
    if (!placed) {
      throw NumericalError("center trajectory " + std::to_string(i) + " could not be placed");
    }
  }
  return out;
}

}  // namespace glean::dataset
