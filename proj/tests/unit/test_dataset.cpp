#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "glean/dataset/generator.hpp"
#include "glean/error.hpp"

using namespace glean;
using namespace glean::dataset;

namespace {

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("balanced corpus") {
  const TaskGeometry g;
  const auto d = generate_dataset(7, 60, g, 0.005);
  REQUIRE(d.size() == 60);
  int left = 0, right = 0;
  for (const auto& t : d) {
    left += t.label == GoalLabel::Left;
    right += t.label == GoalLabel::Right;
  }
  CHECK(left == 30);
  CHECK(right == 30);
  CHECK_THROWS_AS(generate_dataset(7, 5, g, 0.005), ConfigError);
}

TEST_CASE("generated trajectories respect the task layout") {
  const TaskGeometry g;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    for (const auto& t : generate_dataset(seed, 40, g, 0.005)) {
      REQUIRE(t.steps() == 30);
      CHECK(trajectory_valid(t, g));
      CHECK(distance(t.start(), g.start) <= 0.01 + 1e-12);
      CHECK(distance(t.end(), g.goal_center(t.label)) <= g.goal_radius);
      for (int s = 0; s < t.steps(); ++s) {
        const Point p = t.at(s);
        REQUIRE(p.x >= 0.0);
        REQUIRE(p.x <= 1.0);
        REQUIRE(p.y >= 0.0);
        REQUIRE(p.y <= 1.0);
        REQUIRE_FALSE(g.in_obstacle(p));
        if (s > 0) REQUIRE(distance(p, t.at(s - 1)) <= 0.15);
      }
    }
  }
}

TEST_CASE("trajectories pass the branch point and then stop at the goal") {
  const TaskGeometry g;
  int padded = 0;
  for (const auto& t : generate_dataset(9, 20, g, 0.0)) {
    double nearest = 1e9;
    for (int s = 8; s <= 12; ++s) nearest = std::min(nearest, distance(t.at(s), g.branch));
    CHECK(nearest < 0.05);
    int arrived = 29;
    while (arrived > 0 && distance(t.at(arrived - 1), t.at(29)) == 0.0) --arrived;
    CHECK(arrived >= 19);
    padded += arrived < 29;
  }
  CHECK(padded > 0);
}

TEST_CASE("generation is deterministic") {
  const TaskGeometry g;
  CHECK(generate_dataset(3, 10, g, 0.005) == generate_dataset(3, 10, g, 0.005));
  CHECK(generate_dataset(3, 10, g, 0.0) == generate_dataset(3, 10, g, 0.0));
  CHECK_FALSE(generate_dataset(3, 10, g, 0.005) == generate_dataset(4, 10, g, 0.005));
  CHECK(generate_center_goal_set(5, 10, g) == generate_center_goal_set(5, 10, g));
}

TEST_CASE("center-goal set") {
  const TaskGeometry g;
  const auto set = generate_center_goal_set(11, 10, g);
  REQUIRE(set.size() == 10);
  for (const auto& t : set) {
    CHECK(t.label == GoalLabel::Center);
    CHECK_FALSE(g.in_goal_region(t.end(), GoalLabel::Left));
    CHECK_FALSE(g.in_goal_region(t.end(), GoalLabel::Right));
    CHECK(trajectory_valid(t, g));
  }
  CHECK(g.center_goal().x == doctest::Approx((0.2 + 0.85) / 2));
  CHECK(g.center_goal().y == doctest::Approx((0.8 + 0.3) / 2));
}

TEST_CASE("geometry validation") {
  TaskGeometry g;
  CHECK_NOTHROW(g.validate());
  g.obstacles.push_back({0.1, 0.7, 0.3, 0.9});
  CHECK_THROWS_AS(g.validate(), ConfigError);
  TaskGeometry h;
  h.arrival_min = 35;
  CHECK_THROWS_AS(h.validate(), ConfigError);
}

TEST_CASE("labels") {
  for (auto l : {GoalLabel::Left, GoalLabel::Right, GoalLabel::Center}) {
    CHECK(parse_label(label_name(l)) == l);
  }
  CHECK_THROWS_AS(parse_label("up"), std::invalid_argument);
}

TEST_CASE("trajectory files round-trip") {
  const auto d = generate_dataset(21, 8, TaskGeometry{}, 0.005);
  const auto path = temp("glean_unit_traj.csv");
  save_trajectories(path, d);
  CHECK(load_trajectories(path) == d);
  const auto c = generate_center_goal_set(2, 3, TaskGeometry{});
  save_trajectories(path, c);
  CHECK(load_trajectories(path) == c);
  std::filesystem::remove(path);
}

TEST_CASE("truncated or malformed files are rejected whole") {
  const auto d = generate_dataset(21, 4, TaskGeometry{}, 0.005);
  const auto path = temp("glean_unit_bad.csv");
  save_trajectories(path, d);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  in.close();
  const std::string text = ss.str();

  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_AS(load_trajectories(path), FormatError);

  std::string broken = text;
  const auto third = broken.find('\n', broken.find('\n') + 1) + 1;
  broken.insert(third, "garbage\n");
  {
    std::ofstream out(path);
    out << broken;
  }
  try {
    load_trajectories(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 3);
  }
  std::filesystem::remove(path);
  CHECK_THROWS(load_trajectories(path));
}

TEST_CASE("files with other lengths load") {
  Trajectory t;
  t.positions = Matrix::from_rows({{0.0, 0.0}, {0.1, 0.2}, {0.3, 0.3}});
  t.label = GoalLabel::Right;
  t.seed = 42;
  const auto path = temp("glean_unit_short.csv");
  save_trajectories(path, std::vector<Trajectory>{t});
  const auto back = load_trajectories(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == t);
  CHECK(back[0].steps() == 3);
  std::filesystem::remove(path);
}
