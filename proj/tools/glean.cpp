#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "glean/error.hpp"
#include "glean/harness/experiment.hpp"
#include "glean/numeric/parallel.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

std::filesystem::path default_out_dir(const std::string& flag, const std::string& name) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("GLEAN_OUT_DIR"); env && *env) return env;
  return std::filesystem::path("runs") / name;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace glean;
  CLI::App app{"Goal-directed planning with PV-RNN and FM/SI baselines on the 2D agent task"};
  std::string spec_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool serial = false;
  app.add_option("--spec", spec_path, "Experiment spec file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed, overrides [experiment] seed");
  app.add_option("--out-dir", out_dir,
                 "Run directory (default: $GLEAN_OUT_DIR, else runs/<experiment name>)");
  app.add_option("--threads", threads, "Worker threads, 0 for the OpenMP default")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--serial", serial, "Run every loop on the calling thread");
  app.fallthrough();

  for (const auto& stage : harness::stage_names()) {
    app.add_subcommand(stage, "Run the " + stage + " stage");
  }
  app.add_subcommand("report", "Summarise the run records in the run directory");
  // Several stages may be chained: glean --spec s gen-data train plan
  app.require_subcommand(1, 0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    numeric::set_thread_count(threads);
    std::vector<std::string> stages;
    bool want_report = false;
    for (const auto* sub : app.get_subcommands()) {
      if (sub->get_name() == "report") {
        want_report = true;
      } else {
        stages.push_back(sub->get_name());
      }
    }
    std::filesystem::path out;
    if (!stages.empty()) {
      if (spec_path.empty()) throw ConfigError("--spec is required for " + stages.front());
      auto spec = harness::SpecFile::load(spec_path);
      if (app.count("--seed")) spec.set("experiment", "seed", std::to_string(seed));
      const auto experiment = harness::parse_experiment(spec);
      out = default_out_dir(out_dir, experiment.name);
      harness::RunOptions options;
      options.execution = serial ? pvrnn::Execution::Serial : pvrnn::Execution::Parallel;
      options.log = [](const std::string& s) { std::cerr << s << '\n'; };
      harness::run_stages(experiment, spec, out, stages, options);
    } else {
      std::string name = "experiment";
      if (!spec_path.empty()) {
        name = harness::parse_experiment(harness::SpecFile::load(spec_path)).name;
      }
      out = default_out_dir(out_dir, name);
    }
    if (want_report) std::cout << harness::report(out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
