// Wall-clock comparison of the serial reference path and the OpenMP path for full-batch
// training epochs and candidate-parallel planning. Both paths must agree bit for bit.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>

#include "glean/dataset/generator.hpp"
#include "glean/numeric/parallel.hpp"
#include "glean/planner/planner.hpp"
#include "glean/pvrnn/train.hpp"

using namespace glean;
using Clock = std::chrono::steady_clock;

namespace {

template <class F>
double timed(F&& fn) {
  const auto t0 = Clock::now();
  fn();
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const char* what, double serial, double parallel, bool same) {
  std::printf("%-10s serial %8.3f s  openmp %8.3f s  speedup %5.2fx  identical %s\n", what,
              serial, parallel, serial / parallel, same ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP timings"};
  int sequences = 60, epochs = 200, plan_epochs = 100, candidates = 10, threads = 0;
  app.add_option("--sequences", sequences, "Training sequences")->check(CLI::PositiveNumber);
  app.add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
  app.add_option("--plan-epochs", plan_epochs, "Plan epochs")->check(CLI::PositiveNumber);
  app.add_option("--candidates", candidates, "Plan candidates")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "OpenMP threads, 0 for the default");
  CLI11_PARSE(app, argc, argv);
  numeric::set_thread_count(threads);
  std::printf("threads %d\n", numeric::thread_count());

  const auto data = dataset::positions_of(
      dataset::generate_dataset(1, sequences, dataset::TaskGeometry{}, 0.005));
  auto config = pvrnn::two_layer_2d_config(0.01, 0.005);
  config.epochs = epochs;

  pvrnn::TrainOptions serial_train, parallel_train;
  serial_train.execution = pvrnn::Execution::Serial;
  pvrnn::TrainResult a, b;
  const double ts = timed([&] { a = pvrnn::train(data, config, serial_train); });
  const double tp = timed([&] { b = pvrnn::train(data, config, parallel_train); });
  report("train", ts, tp, a.params == b.params);

  planner::PlanRequest request;
  request.initial = {data[0](0, 0), data[0](0, 1)};
  request.goal = {data[0](29, 0), data[0](29, 1)};
  request.epochs = plan_epochs;
  request.candidates = candidates;
  planner::PlanOptions serial_plan, parallel_plan;
  serial_plan.execution = pvrnn::Execution::Serial;
  planner::PlanResult p, q;
  const double ps = timed([&] { p = planner::plan_glean(a.params, config, request, serial_plan); });
  const double pp = timed([&] { q = planner::plan_glean(a.params, config, request, parallel_plan); });
  report("plan", ps, pp, p.trajectory == q.trajectory);
  return 0;
}
