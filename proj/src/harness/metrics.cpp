#include "glean/harness/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "glean/error.hpp"

namespace glean::harness {

using nlohmann::json;

std::string region_name(Region region) {
  switch (region) {
    case Region::Left:
      return "left";
    case Region::Right:
      return "right";
    case Region::Neither:
      return "neither";
  }
  return "?";
}

namespace {

Region parse_region(const std::string& s) {
  if (s == "left") return Region::Left;
  if (s == "right") return Region::Right;
  if (s == "neither") return Region::Neither;
  throw FormatError(0, "unknown region '" + s + "'");
}

dataset::Point last_point(const Matrix& m) {
  if (m.rows() == 0 || m.cols() < 2) throw DimensionError("path needs at least one 2D row");
  return {m(m.rows() - 1, 0), m(m.rows() - 1, 1)};
}

}  // namespace

Region classify_endpoint(dataset::Point p, const dataset::TaskGeometry& geometry) {
  if (geometry.in_goal_region(p, dataset::GoalLabel::Left)) return Region::Left;
  if (geometry.in_goal_region(p, dataset::GoalLabel::Right)) return Region::Right;
  return Region::Neither;
}

Region nearest_goal(dataset::Point p, const dataset::TaskGeometry& geometry) {
  const double l = dataset::distance(p, geometry.left_goal);
  const double r = dataset::distance(p, geometry.right_goal);
  return l <= r ? Region::Left : Region::Right;
}

Metrics plan_metrics(const Matrix& plan, const dataset::Trajectory& truth,
                     std::span<const double> goal, double kld_pq,
                     const dataset::TaskGeometry& geometry) {
  if (plan.rows() != truth.positions.rows() || plan.cols() != truth.positions.cols()) {
    throw DimensionError("plan and truth differ in shape");
  }
  if (goal.size() != plan.cols()) throw DimensionError("goal has the wrong dimension");
  Metrics m;
  m.rmse = planner::rmse(plan, truth.positions);
  const auto last = plan.row(plan.rows() - 1);
  double sq = 0.0;
  for (std::size_t j = 0; j < goal.size(); ++j) sq += (last[j] - goal[j]) * (last[j] - goal[j]);
  m.goal_deviation = std::sqrt(sq);
  m.kld_pq = kld_pq;
  const dataset::Point end = last_point(plan);
  m.success = geometry.in_goal_region(end, truth.label);
  m.region = classify_endpoint(end, geometry);
  return m;
}

GoalDistribution goal_distribution(std::span<const Matrix> rollouts,
                                   const dataset::TaskGeometry& geometry) {
  if (rollouts.empty()) throw DimensionError("goal_distribution needs at least one rollout");
  std::size_t left = 0, right = 0, near_left = 0;
  for (const auto& r : rollouts) {
    const dataset::Point p = last_point(r);
    const Region region = classify_endpoint(p, geometry);
    left += region == Region::Left;
    right += region == Region::Right;
    near_left += nearest_goal(p, geometry) == Region::Left;
  }
  const double n = static_cast<double>(rollouts.size());
  GoalDistribution d;
  d.left = 100.0 * static_cast<double>(left) / n;
  d.right = 100.0 * static_cast<double>(right) / n;
  d.neither = 100.0 * static_cast<double>(rollouts.size() - left - right) / n;
  d.nearest_left = 100.0 * static_cast<double>(near_left) / n;
  d.nearest_right = 100.0 * static_cast<double>(rollouts.size() - near_left) / n;
  return d;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::map<std::string, Summary> plan_aggregates(std::span<const PlanEntry> plans) {
  std::vector<double> rmse, gd, kld, success;
  for (const auto& p : plans) {
    rmse.push_back(p.metrics.rmse);
    gd.push_back(p.metrics.goal_deviation);
    kld.push_back(p.metrics.kld_pq);
    success.push_back(p.metrics.success ? 1.0 : 0.0);
  }
  return {{"rmse", summarize(rmse)},
          {"goal_deviation", summarize(gd)},
          {"kld_pq", summarize(kld)},
          {"success", summarize(success)}};
}

RunRecord evaluate_plans(std::span<const planner::PlanResult> plans,
                         std::span<const dataset::Trajectory> truths,
                         std::span<const planner::PlanRequest> requests,
                         const dataset::TaskGeometry& geometry) {
  if (plans.size() != truths.size() || plans.size() != requests.size()) {
    throw DimensionError("evaluate_plans: plans, truths and requests differ in length");
  }
  RunRecord rec;
  rec.stage = "plan";
  for (std::size_t i = 0; i < plans.size(); ++i) {
    PlanEntry e;
    e.goal = static_cast<int>(i);
    e.seed = requests[i].seed;
    e.metrics = plan_metrics(plans[i].trajectory, truths[i], requests[i].goal, plans[i].kld_pq,
                             geometry);
    rec.plans.push_back(e);
  }
  rec.aggregates = plan_aggregates(rec.plans);
  return rec;
}

std::string to_json(const RunRecord& r) {
  json j;
  j["stage"] = r.stage;
  j["model"] = r.model;
  j["kind"] = r.kind;
  j["config"] = r.config;
  j["seeds"] = r.seeds;
  json plans = json::array();
  for (const auto& p : r.plans) {
    plans.push_back({{"goal", p.goal},
                     {"repetition", p.repetition},
                     {"seed", p.seed},
                     {"rmse", p.metrics.rmse},
                     {"goal_deviation", p.metrics.goal_deviation},
                     {"kld_pq", p.metrics.kld_pq},
                     {"success", p.metrics.success},
                     {"region", region_name(p.metrics.region)}});
  }
  j["plans"] = plans;
  json agg = json::object();
  for (const auto& [k, s] : r.aggregates) agg[k] = {{"mean", s.mean}, {"sd", s.sd}};
  j["aggregates"] = agg;
  j["values"] = r.values;
  return j.dump(2) + "\n";
}

RunRecord record_from_json(const std::string& text) {
  RunRecord r;
  try {
    const json j = json::parse(text);
    r.stage = j.at("stage").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    for (const auto& p : j.at("plans")) {
      PlanEntry e;
      e.goal = p.at("goal").get<int>();
      e.repetition = p.at("repetition").get<int>();
      e.seed = p.at("seed").get<std::uint64_t>();
      e.metrics.rmse = p.at("rmse").get<double>();
      e.metrics.goal_deviation = p.at("goal_deviation").get<double>();
      e.metrics.kld_pq = p.at("kld_pq").get<double>();
      e.metrics.success = p.at("success").get<bool>();
      e.metrics.region = parse_region(p.at("region").get<std::string>());
      r.plans.push_back(e);
    }
    for (const auto& [k, s] : j.at("aggregates").items()) {
      r.aggregates[k] = {s.at("mean").get<double>(), s.at("sd").get<double>()};
    }
    r.values = j.at("values").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw FormatError(0, std::string("run record: ") + e.what());
  }
  return r;
}

void write_record(const std::filesystem::path& path, const RunRecord& record) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json(record);
  if (!out) throw ConfigError("failed writing " + path.string());
}

RunRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return record_from_json(ss.str());
}

KldSeries kld_timeseries(std::span<const pvrnn::ForwardTrace> traces,
                         const pvrnn::ModelConfig& config) {
  if (traces.empty()) throw DimensionError("kld_timeseries needs at least one trace");
  const auto steps = static_cast<std::size_t>(traces.front().steps());
  const auto layers = static_cast<std::size_t>(config.num_layers());
  KldSeries s{Matrix(steps, layers), Matrix(steps, layers)};
  std::vector<Matrix> profiles;
  for (const auto& tr : traces) {
    if (static_cast<std::size_t>(tr.steps()) != steps) {
      throw DimensionError("kld_timeseries: traces differ in length");
    }
    profiles.push_back(pvrnn::kld_profile(tr, config));
  }
  std::vector<double> col(profiles.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t k = 0; k < profiles.size(); ++k) col[k] = profiles[k](t, l);
      const Summary sum = summarize(col);
      s.mean(t, l) = sum.mean;
      s.sd(t, l) = sum.sd;
    }
  }
  return s;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_kld_csv(const std::filesystem::path& path, const KldSeries& series) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "t,layer,mean,sd\n";
  for (std::size_t t = 0; t < series.mean.rows(); ++t) {
    for (std::size_t l = 0; l < series.mean.cols(); ++l) {
      out << t + 1 << ',' << l << ',' << num(series.mean(t, l)) << ',' << num(series.sd(t, l))
          << '\n';
    }
  }
}

void write_paths_csv(const std::filesystem::path& path, std::span<const Matrix> paths) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "id,t,x,y\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t t = 0; t < paths[i].rows(); ++t) {
      out << i << ',' << t + 1 << ',' << num(paths[i](t, 0)) << ',' << num(paths[i](t, 1)) << '\n';
    }
  }
}

}  // namespace glean::harness
