#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "glean/error.hpp"
#include "glean/harness/experiment.hpp"
#include "glean/harness/metrics.hpp"
#include "glean/harness/spec_file.hpp"
#include "glean/pvrnn/model.hpp"

using namespace glean;
using numeric::Vector;
using namespace glean::harness;
namespace fs = std::filesystem;

namespace {

dataset::Trajectory line(dataset::GoalLabel label, double x_end, double y_end) {
  dataset::Trajectory t;
  t.label = label;
  t.positions = Matrix(5, 2);
  for (std::size_t s = 0; s < 5; ++s) {
    t.positions(s, 0) = x_end * static_cast<double>(s) / 4.0;
    t.positions(s, 1) = y_end * static_cast<double>(s) / 4.0;
  }
  return t;
}

Vector last(const Matrix& m) {
  return {m(m.rows() - 1, 0), m(m.rows() - 1, 1)};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* const kTiny = GLEAN_TEST_DATA "/tiny.spec";

}  // namespace

TEST_CASE("spec file parsing") {
  const auto s = SpecFile::parse(
      "# comment\n"
      "[experiment]\n"
      "name = demo   # trailing\n"
      "seed = 12\n"
      "\n"
      "[plan]\n"
      "models = a, b ,c\n"
      "rate = 0.05\n"
      "epochs = 10\n");
  CHECK(s.text("experiment", "name") == "demo");
  CHECK(s.seed("experiment", "seed") == 12);
  CHECK(s.list("plan", "models") == std::vector<std::string>{"a", "b", "c"});
  CHECK(s.real("plan", "rate") == 0.05);
  CHECK(s.integer("plan", "epochs") == 10);
  CHECK(s.integer("plan", "missing", 3) == 3);
  CHECK_THROWS_AS(s.text("plan", "missing"), ConfigError);
  CHECK_THROWS_AS(s.integer("experiment", "name"), ConfigError);
  CHECK_THROWS_AS(s.real("plan", "models"), ConfigError);
  CHECK(SpecFile::parse(s.dump()).dump() == s.dump());

  auto line_of = [](const std::string& text) {
    try {
      SpecFile::parse(text);
    } catch (const FormatError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  CHECK(line_of("[a]\nx = 1\nnonsense\n") == 3);
  CHECK(line_of("[a]\nx = 1\nx = 2\n") == 3);
  CHECK(line_of("[a\n") == 1);
  CHECK(line_of("[a]\n[a]\n") == 2);
  CHECK(line_of("[a]\n = 4\n") == 2);
  CHECK_THROWS_AS(SpecFile::parse("[s]\nseed = -4\n").seed("s", "seed"), ConfigError);
}

TEST_CASE("plan metrics hand cases") {
  const dataset::TaskGeometry g;
  const auto truth = line(dataset::GoalLabel::Left, 0.2, 0.8);
  SUBCASE("plan equal to the truth") {
    const auto m = plan_metrics(truth.positions, truth, last(truth.positions), 0.5, g);
    CHECK(m.rmse == 0.0);
    CHECK(m.goal_deviation == 0.0);
    CHECK(m.success);
    CHECK(m.region == Region::Left);
    CHECK(m.kld_pq == 0.5);
  }
  SUBCASE("constant offset") {
    Matrix plan = truth.positions;
    for (double& x : plan.values()) x += 0.01;
    const auto m = plan_metrics(plan, truth, last(truth.positions), 0.0, g);
    CHECK(m.rmse == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(m.goal_deviation == doctest::Approx(0.01 * std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("endpoint on the region boundary counts as success") {
    dataset::TaskGeometry exact;
    exact.left_goal = {0.25, 0.75};
    exact.goal_radius = 0.125;
    Matrix plan = truth.positions;
    plan(4, 0) = 0.375;
    plan(4, 1) = 0.75;
    const auto m = plan_metrics(plan, truth, last(truth.positions), 0.0, exact);
    CHECK(m.success);
    CHECK(classify_endpoint({0.25, 0.625}, exact) == Region::Left);
    CHECK(classify_endpoint({0.25, 0.624}, exact) == Region::Neither);
  }
  SUBCASE("endpoint in the wrong region") {
    Matrix plan = truth.positions;
    plan(4, 0) = g.right_goal.x;
    plan(4, 1) = g.right_goal.y;
    const auto m = plan_metrics(plan, truth, last(truth.positions), 0.0, g);
    CHECK_FALSE(m.success);
    CHECK(m.region == Region::Right);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(plan_metrics(Matrix(4, 2), truth, last(truth.positions), 0.0, g), DimensionError);
  }
}

TEST_CASE("evaluate_plans pairs plans with truths") {
  const dataset::TaskGeometry g;
  const auto a = line(dataset::GoalLabel::Left, 0.2, 0.8);
  const auto b = line(dataset::GoalLabel::Right, 0.85, 0.3);
  std::vector<planner::PlanResult> plans(2);
  plans[0].trajectory = a.positions;
  plans[1].trajectory = a.positions;
  plans[0].kld_pq = 1.0;
  plans[1].kld_pq = 3.0;
  std::vector<planner::PlanRequest> requests(2);
  requests[0].goal = last(a.positions);
  requests[1].goal = last(b.positions);
  requests[0].seed = 5;
  const std::vector<dataset::Trajectory> truths{a, b};
  const auto r = evaluate_plans(plans, truths, requests, g);
  REQUIRE(r.plans.size() == 2);
  CHECK(r.plans[0].metrics.success);
  CHECK_FALSE(r.plans[1].metrics.success);
  CHECK(r.plans[0].seed == 5);
  CHECK(r.aggregates.at("kld_pq").mean == 2.0);
  CHECK(r.aggregates.at("kld_pq").sd == doctest::Approx(std::sqrt(2.0)));
  CHECK(r.aggregates.at("success").mean == 0.5);
  const std::vector<dataset::Trajectory> one{a};
  CHECK_THROWS_AS(evaluate_plans(plans, one, requests, g), DimensionError);
}

TEST_CASE("aggregates are recomputable from the entries") {
  numeric::SeededRng rng(3);
  std::vector<PlanEntry> entries(37);
  for (auto& e : entries) {
    e.metrics.rmse = rng.uniform();
    e.metrics.goal_deviation = rng.uniform();
    e.metrics.kld_pq = rng.uniform() * 10.0;
    e.metrics.success = rng.uniform() < 0.5;
  }
  const auto agg = plan_aggregates(entries);
  double sum = 0.0;
  for (const auto& e : entries) sum += e.metrics.rmse;
  CHECK(agg.at("rmse").mean == doctest::Approx(sum / 37.0).epsilon(1e-14));
  CHECK(summarize(std::vector<double>{4.0}).sd == 0.0);
  const auto s = summarize(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.sd == 1.0);
}

TEST_CASE("goal distribution percentages") {
  const dataset::TaskGeometry g;
  std::vector<Matrix> paths;
  auto end_at = [](double x, double y) { return Matrix::from_rows({{0.0, 0.0}, {x, y}}); };
  paths.push_back(end_at(0.2, 0.8));
  paths.push_back(end_at(0.85, 0.3));
  paths.push_back(end_at(0.5, 0.5));
  paths.push_back(end_at(0.3, 0.6));
  const auto d = goal_distribution(paths, g);
  CHECK(d.left == 25.0);
  CHECK(d.right == 25.0);
  CHECK(d.neither == 50.0);
  CHECK(d.left + d.right + d.neither == 100.0);
  CHECK(d.nearest_left + d.nearest_right == 100.0);
  CHECK(d.nearest_left == 50.0);
  CHECK_THROWS_AS(goal_distribution(std::vector<Matrix>{}, g), DimensionError);
}

TEST_CASE("run records round-trip through JSON") {
  RunRecord r;
  r.stage = "plan";
  r.model = "m";
  r.kind = "PVRNN";
  r.config = {{"lr", "0.001"}, {"epochs", "10"}};
  r.seeds = {{"model", 18446744073709551615ULL}, {"plan", 3}};
  PlanEntry e;
  e.goal = 2;
  e.repetition = 1;
  e.seed = 99;
  e.metrics = {0.1 / 3.0, 1e-7, 2.5, true, Region::Neither};
  r.plans = {e};
  r.aggregates = plan_aggregates(r.plans);
  r.values = {{"ratio", 1.0 / 7.0}};
  const auto text = to_json(r);
  const auto back = record_from_json(text);
  CHECK(to_json(back) == text);
  CHECK(back.plans[0].metrics.rmse == e.metrics.rmse);
  CHECK(back.seeds.at("model") == 18446744073709551615ULL);
  CHECK(back.values.at("ratio") == 1.0 / 7.0);
  CHECK_THROWS_AS(record_from_json("{\"stage\": 1}"), FormatError);
}

TEST_CASE("KLD time series") {
  pvrnn::ModelConfig c;
  c.layers = {{4, 1, 2.0, 0.1}, {3, 1, 4.0, 0.1}};
  c.seq_len = 6;
  numeric::SeededRng rng(8);
  const auto p = pvrnn::NetworkParams::glorot(c, rng);
  SUBCASE("no posterior means zero KLD") {
    std::vector<pvrnn::ForwardTrace> traces{pvrnn::forward_prior(p, c, rng, 6),
                                            pvrnn::forward_prior(p, c, rng, 6)};
    const auto s = kld_timeseries(traces, c);
    for (double x : s.mean.values()) CHECK(x == 0.0);
  }
  SUBCASE("a single trace has zero spread") {
    auto a = pvrnn::AdaptationVars::zeros(c, 6);
    a.mu(0, 0) = 1.0;
    std::vector<pvrnn::ForwardTrace> traces{pvrnn::forward_posterior(p, a, c, rng, 6)};
    const auto s = kld_timeseries(traces, c);
    CHECK(s.mean.rows() == 6);
    CHECK(s.mean.cols() == 2);
    CHECK(s.mean(0, 0) > 0.0);
    for (double x : s.sd.values()) CHECK(x == 0.0);
  }
  CHECK_THROWS_AS(kld_timeseries(std::vector<pvrnn::ForwardTrace>{}, c), DimensionError);
}

TEST_CASE("experiment specs are validated") {
  const auto base = SpecFile::load(kTiny);
  CHECK_NOTHROW(parse_experiment(base));
  auto with = [&](const std::string& extra) { return SpecFile::parse(base.text() + extra); };
  CHECK_THROWS_AS(parse_experiment(with("[bogus]\nx = 1\n")), ConfigError);
  CHECK_THROWS_AS(parse_experiment(with("[model.extra]\nkind = PVRNN\nspeed = 3\n")), ConfigError);
  CHECK_THROWS_AS(parse_experiment(with("[model.extra]\nkind = RNN\n")), ConfigError);
  CHECK_THROWS_AS(parse_experiment(with("[model.extra]\ncheckpoint = /no/such/file.ck\n")),
                  ConfigError);
  auto bad_model = base;
  bad_model.set("plan", "models", "glean, nobody");
  CHECK_THROWS_AS(parse_experiment(bad_model), ConfigError);
  auto odd = base;
  odd.set("dataset", "count", "7");
  CHECK_THROWS_AS(parse_experiment(odd), ConfigError);

  const auto e = parse_experiment(base);
  CHECK(e.model("glean").kind == ModelKind::PVRNN);
  CHECK(e.model("glean").config.layers[0].w == 0.01);
  CHECK(e.dataset.seed == numeric::SeededRng::derive_seed(5, {1}));
  CHECK(e.stages == stage_names());
}

TEST_CASE("stages check their inputs before computing") {
  const auto spec = SpecFile::load(kTiny);
  const auto e = parse_experiment(spec);
  const auto dir = fresh_dir("glean_unit_prereq");
  CHECK_THROWS_AS(run_stages(e, spec, dir, {"plan"}), ConfigError);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("pipeline reruns are identical and completed stages are kept") {
  const auto spec = SpecFile::load(kTiny);
  const auto e = parse_experiment(spec);
  const auto a = fresh_dir("glean_unit_run_a");
  const auto b = fresh_dir("glean_unit_run_b");
  run_experiment(e, spec, a);
  RunOptions serial;
  serial.execution = pvrnn::Execution::Serial;
  run_experiment(e, spec, b, serial);
  std::size_t compared = 0;
  for (const auto& f : fs::recursive_directory_iterator(a)) {
    if (!f.is_regular_file() || f.path().filename() == "timing.json") continue;
    const auto rel = fs::relative(f.path(), a);
    REQUIRE(fs::exists(b / rel));
    CHECK_MESSAGE(slurp(f.path()) == slurp(b / rel), rel.string());
    ++compared;
  }
  CHECK(compared > 20);
  for (const auto& s : stage_names()) CHECK(stage_complete(a, s));

  const auto before = fs::last_write_time(a / "train" / "glean.ck");
  run_experiment(e, spec, a);
  CHECK(fs::last_write_time(a / "train" / "glean.ck") == before);

  const auto r = read_record(a / "plan" / "glean.json");
  CHECK(r.plans.size() == 8);
  CHECK(r.aggregates.at("rmse").mean == plan_aggregates(r.plans).at("rmse").mean);
  CHECK(read_record(a / "plan" / "fm.json").plans.size() == 4);
  CHECK(report(a).find("[compare]") != std::string::npos);

  auto changed = spec;
  changed.set("plan", "epochs", "21");
  CHECK_THROWS_AS(run_experiment(parse_experiment(changed), changed, a), ConfigError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a checkpoint from another run can stand in for training") {
  const auto spec = SpecFile::load(kTiny);
  const auto e = parse_experiment(spec);
  const auto a = fresh_dir("glean_unit_ck_a");
  run_stages(e, spec, a, {"gen-data", "train"});
  auto reuse = spec;
  reuse.set("model.glean", "checkpoint", (a / "train" / "glean.ck").string());
  reuse.set("prior-gen", "models", "glean");
  const auto e2 = parse_experiment(reuse);
  const auto b = fresh_dir("glean_unit_ck_b");
  run_stages(e2, reuse, b, {"gen-data", "prior-gen"});
  CHECK(slurp(a / "train" / "glean.ck").size() > 0);
  CHECK(stage_complete(b, "prior-gen"));
  CHECK_FALSE(fs::exists(b / "train"));
  fs::remove_all(a);
  fs::remove_all(b);
}
