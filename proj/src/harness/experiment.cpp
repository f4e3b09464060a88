#include "glean/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "glean/baselines/fm.hpp"
#include "glean/baselines/si.hpp"
#include "glean/error.hpp"
#include "glean/harness/metrics.hpp"
#include "glean/numeric/parallel.hpp"
#include "glean/numeric/rng.hpp"
#include "glean/planner/planner.hpp"

namespace glean::harness {

namespace fs = std::filesystem;
using numeric::SeededRng;

namespace {

// Tags under which default seeds are derived from the master seed.
enum SeedTag : std::uint64_t {
  kDataTag = 1,
  kTestTag = 2,
  kCenterTag = 3,
  kPriorTag = 4,
  kRegenTag = 5,
  kPlanTag = 6,
  kLookaheadTag = 7,
  kModelTag = 100,
};

const char* const kComplete = "COMPLETE";

void check_keys(const SpecFile& spec, const std::string& section,
                const std::set<std::string>& allowed) {
  for (const auto& k : spec.keys(section)) {
    if (!allowed.count(k)) throw ConfigError("spec: unknown key '" + k + "' in [" + section + "]");
  }
}

int positive(const SpecFile& spec, const std::string& section, const std::string& key,
             int fallback, int minimum = 1) {
  const long long v = spec.integer(section, key, fallback);
  if (v < minimum || v > 100000000) {
    throw ConfigError("spec: [" + section + "] " + key + " must be >= " + std::to_string(minimum));
  }
  return static_cast<int>(v);
}

void parse_model(const SpecFile& spec, const std::string& section, std::uint64_t master,
                 std::size_t index, ExperimentSpec& e) {
  check_keys(spec, section,
             {"kind", "w_bottom", "w_top", "w_init", "epochs", "lr", "error_dropout", "seed",
              "blend", "clip_norm", "checkpoint"});
  ModelSpec m;
  m.name = section.substr(std::string("model.").size());
  if (m.name.empty()) throw ConfigError("spec: model section without a name");
  m.kind = parse_kind(spec.text(section, "kind", "PVRNN"));
  m.config = pvrnn::two_layer_2d_config(spec.real(section, "w_bottom", 0.0),
                                        spec.real(section, "w_top", 0.0));
  m.config.w_init = spec.real(section, "w_init", m.config.w_init);
  m.config.epochs = positive(spec, section, "epochs", m.config.epochs, 0);
  m.config.lr = spec.real(section, "lr", m.config.lr);
  m.config.error_dropout = spec.real(section, "error_dropout", m.config.error_dropout);
  m.config.seed = spec.seed(section, "seed", SeededRng::derive_seed(master, {kModelTag + index}));
  m.config.seq_len = e.geometry.steps;
  m.blend = spec.real(section, "blend", m.blend);
  m.clip_norm = spec.real(section, "clip_norm", m.clip_norm);
  if (m.blend < 0.0 || m.blend > 1.0) throw ConfigError("spec: [" + section + "] blend outside [0,1]");
  m.config.validate();
  if (spec.has(section, "checkpoint")) {
    m.checkpoint = spec.text(section, "checkpoint");
    if (!fs::exists(m.checkpoint)) {
      throw ConfigError("spec: [" + section + "] checkpoint " + m.checkpoint.string() +
                        " does not exist");
    }
  }
  e.models.push_back(std::move(m));
}

std::vector<std::string> model_list(const SpecFile& spec, const std::string& section,
                                    const std::string& key, const ExperimentSpec& e) {
  auto names = spec.list(section, key, {});
  for (const auto& n : names) e.model(n);
  return names;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, std::string> config_map(const ModelSpec& m) {
  const auto& c = m.config;
  std::map<std::string, std::string> out{
      {"kind", kind_name(m.kind)},     {"w_init", fmt(c.w_init)},
      {"lr", fmt(c.lr)},               {"epochs", std::to_string(c.epochs)},
      {"error_dropout", fmt(c.error_dropout)}, {"seq_len", std::to_string(c.seq_len)},
      {"seed", std::to_string(c.seed)}};
  for (std::size_t l = 0; l < c.layers.size(); ++l) {
    const auto& L = c.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    out[p + "d"] = std::to_string(L.d_size);
    out[p + "z"] = std::to_string(L.z_size);
    out[p + "tau"] = fmt(L.tau);
    out[p + "w"] = fmt(L.w);
  }
  if (m.kind != ModelKind::PVRNN) out["blend"] = fmt(m.blend);
  if (m.kind == ModelKind::SI) out["clip_norm"] = fmt(m.clip_norm);
  return out;
}

RunRecord base_record(const std::string& stage, const ModelSpec& m) {
  RunRecord r;
  r.stage = stage;
  r.model = m.name;
  r.kind = kind_name(m.kind);
  r.config = config_map(m);
  r.seeds["model"] = m.config.seed;
  return r;
}

class Run {
 public:
  Run(const ExperimentSpec& e, const fs::path& out, const RunOptions& o)
      : e_(e), out_(out), opt_(o) {}

  void log(const std::string& s) const {
    if (opt_.log) opt_.log(s);
  }

  fs::path dir(const std::string& stage) const { return out_ / stage; }

  fs::path checkpoint_path(const ModelSpec& m) const {
    return m.checkpoint.empty() ? dir("train") / (m.name + ".ck") : m.checkpoint;
  }

  const Checkpoint& checkpoint(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const ModelSpec& m = e_.model(name);
    Checkpoint ck = load_checkpoint(checkpoint_path(m));
    if (ck.kind != m.kind) {
      throw ConfigError("checkpoint for '" + name + "' holds a " + kind_name(ck.kind) + " model");
    }
    return cache_.emplace(name, std::move(ck)).first->second;
  }

  const std::vector<dataset::Trajectory>& data(const std::string& which) {
    auto it = data_.find(which);
    if (it != data_.end()) return it->second;
    return data_.emplace(which, dataset::load_trajectories(dir("gen-data") / (which + ".csv")))
        .first->second;
  }

  void gen_data() {
    const auto& d = e_.dataset;
    const auto train = dataset::generate_dataset(d.seed, d.count, e_.geometry, d.noise);
    const auto test = dataset::generate_dataset(d.test_seed, d.test_count, e_.geometry, d.noise);
    const auto center = dataset::generate_center_goal_set(d.center_seed, d.center_count, e_.geometry);
    dataset::save_trajectories(dir("gen-data") / "train.csv", train);
    dataset::save_trajectories(dir("gen-data") / "test.csv", test);
    dataset::save_trajectories(dir("gen-data") / "center.csv", center);
    RunRecord r;
    r.stage = "gen-data";
    r.config = {{"noise", fmt(d.noise)}, {"steps", std::to_string(e_.geometry.steps)}};
    r.seeds = {{"train", d.seed}, {"test", d.test_seed}, {"center", d.center_seed}};
    r.values = {{"train", static_cast<double>(train.size())},
                {"test", static_cast<double>(test.size())},
                {"center", static_cast<double>(center.size())}};
    write_record(dir("gen-data") / "data.json", r);
  }

  void train() {
    const auto sequences = dataset::positions_of(data("train"));
    for (const auto& m : e_.models) {
      if (!m.checkpoint.empty()) {
        log("train: " + m.name + " uses " + m.checkpoint.string());
        continue;
      }
      const int every = std::max(1, m.config.epochs / 10);
      Checkpoint ck;
      ck.kind = m.kind;
      ck.config = m.config;
      RunRecord r = base_record("train", m);
      std::ofstream hist(dir("train") / (m.name + "_history.csv"));
      switch (m.kind) {
        case ModelKind::PVRNN: {
          pvrnn::TrainOptions o;
          o.execution = opt_.execution;
          o.on_epoch = [&](int ep, const pvrnn::EpochStats& s) {
            if (ep % every == 0) {
              log("train " + m.name + " epoch " + std::to_string(ep) + " elbo " + fmt(s.elbo));
            }
          };
          auto res = pvrnn::train(sequences, m.config, o);
          hist << "epoch,accuracy,complexity,elbo,kld_pq\n";
          for (std::size_t i = 0; i < res.history.size(); ++i) {
            const auto& s = res.history[i];
            hist << i << ',' << fmt(s.accuracy) << ',' << fmt(s.complexity) << ','
                 << fmt(s.elbo) << ',' << fmt(s.kld_pq) << '\n';
          }
          if (!res.history.empty()) {
            const auto& s = res.history.back();
            r.values["accuracy"] = s.accuracy;
            r.values["complexity"] = s.complexity;
            r.values["elbo"] = s.elbo;
            r.values["kld_pq"] = s.kld_pq;
          }
          posterior_summary(res.params, res.adaptation, m.config, sequences, r);
          ck.pvrnn = std::move(res.params);
          ck.adaptation = std::move(res.adaptation);
          break;
        }
        case ModelKind::FM: {
          baselines::FmTrainOptions o;
          o.blend = m.blend;
          o.execution = opt_.execution;
          o.on_epoch = [&](int ep, double loss) {
            if (ep % every == 0) log("train " + m.name + " epoch " + std::to_string(ep) + " loss " + fmt(loss));
          };
          auto res = baselines::train_fm(sequences, m.config, o);
          write_loss(hist, res.history, r);
          ck.fm = std::move(res.params);
          break;
        }
        case ModelKind::SI: {
          baselines::SiTrainOptions o;
          o.blend = m.blend;
          o.clip_norm = m.clip_norm;
          o.execution = opt_.execution;
          o.on_epoch = [&](int ep, double loss) {
            if (ep % every == 0) log("train " + m.name + " epoch " + std::to_string(ep) + " loss " + fmt(loss));
          };
          auto res = baselines::train_si(sequences, m.config, o);
          write_loss(hist, res.history, r);
          ck.si = std::move(res.params);
          ck.initial = std::move(res.initial);
          break;
        }
      }
      save_checkpoint(dir("train") / (m.name + ".ck"), ck);
      write_record(dir("train") / (m.name + ".json"), r);
    }
  }

  void prior_gen() {
    for (const auto& name : e_.prior_gen.models) {
      const Checkpoint& ck = pvrnn_checkpoint(name, "prior-gen");
      auto rng = SeededRng::derive(e_.prior_gen.seed, {0});
      std::vector<Matrix> paths;
      for (int i = 0; i < e_.prior_gen.rollouts; ++i) {
        paths.push_back(pvrnn::forward_prior(ck.pvrnn, ck.config, rng, ck.config.seq_len).x);
      }
      RunRecord r = base_record("prior-gen", e_.model(name));
      r.seeds["rollouts"] = e_.prior_gen.seed;
      put_distribution(goal_distribution(paths, e_.geometry), r);
      write_paths_csv(dir("prior-gen") / (name + "_paths.csv"), paths);
      write_record(dir("prior-gen") / (name + ".json"), r);
    }
  }

  void target_regen() {
    const auto& train = data("train");
    const auto it = std::find_if(train.begin(), train.end(), [&](const dataset::Trajectory& t) {
      return t.label == e_.target_regen.label;
    });
    if (it == train.end()) {
      throw ConfigError("target-regen: no training sequence has label " +
                        dataset::label_name(e_.target_regen.label));
    }
    const auto seq = static_cast<std::size_t>(it - train.begin());
    for (const auto& name : e_.target_regen.models) {
      const Checkpoint& ck = pvrnn_checkpoint(name, "target-regen");
      if (seq >= ck.adaptation.size()) throw ConfigError("target-regen: checkpoint lacks sequence");
      auto rng = SeededRng::derive(e_.target_regen.seed, {0});
      const auto traces = pvrnn::regenerate_target(ck.pvrnn, ck.adaptation[seq], ck.config, rng,
                                                   e_.target_regen.rollouts);
      std::vector<Matrix> paths;
      for (const auto& t : traces) paths.push_back(t.x);
      const KldSeries kld = kld_timeseries(traces, ck.config);
      RunRecord r = base_record("target-regen", e_.model(name));
      r.seeds["rollouts"] = e_.target_regen.seed;
      r.values["sequence"] = static_cast<double>(seq);
      put_distribution(goal_distribution(paths, e_.geometry), r);
      put_spike(kld, r);
      write_kld_csv(dir("target-regen") / (name + "_kld.csv"), kld);
      write_paths_csv(dir("target-regen") / (name + "_paths.csv"), paths);
      write_record(dir("target-regen") / (name + ".json"), r);
    }
  }

  void plan() {
    const auto& p = e_.plan;
    for (const auto& name : p.models) {
      plan_set(name, data("test"), "", kPlanTag);
    }
    for (const auto& name : p.center_models) {
      plan_set(name, data("center"), "_center", kCenterTag);
    }
  }

  void lookahead() {
    const auto& spec = e_.lookahead;
    const auto& test = data("test");
    const int n = std::min<int>(spec.count, static_cast<int>(test.size()));
    for (const auto& name : spec.models) {
      const Checkpoint& ck = checkpoint(name);
      RunRecord r = base_record("lookahead", e_.model(name));
      r.seeds["lookahead"] = spec.seed;
      r.config["window"] = std::to_string(spec.window);
      r.config["regression_epochs"] = std::to_string(spec.regression_epochs);
      r.config["initial_epochs"] = std::to_string(spec.initial_epochs);
      r.config["lookahead_blend"] = fmt(spec.blend);
      r.plans.resize(static_cast<std::size_t>(n));
      numeric::for_each_index(r.plans.size(), opt_.execution == pvrnn::Execution::Parallel,
                              [&](std::size_t i) {
        planner::LookaheadOptions o;
        o.window = spec.window;
        o.regression_epochs = spec.regression_epochs;
        o.initial_epochs = spec.initial_epochs;
        o.rate = spec.rate;
        o.blend = spec.blend;
        o.seed = SeededRng::derive_seed(spec.seed, {i});
        const auto& truth = test[i].positions;
        planner::LookaheadResult res;
        switch (ck.kind) {
          case ModelKind::PVRNN:
            res = planner::lookahead_glean(ck.pvrnn, ck.config, truth, o);
            break;
          case ModelKind::FM:
            res = planner::lookahead_fm(ck.fm, ck.config, truth, o);
            break;
          case ModelKind::SI:
            res = planner::lookahead_si(ck.si, ck.config, truth, o);
            break;
        }
        PlanEntry& entry = r.plans[i];
        entry.goal = static_cast<int>(i);
        entry.seed = o.seed;
        entry.metrics.rmse = res.rmse;
      });
      std::vector<double> rm;
      for (const auto& pe : r.plans) rm.push_back(pe.metrics.rmse);
      r.aggregates["rmse"] = summarize(rm);
      write_record(dir("lookahead") / (name + ".json"), r);
    }
  }

  void compare() {
    const auto& c = e_.compare;
    RunRecord r;
    r.stage = "compare";
    r.model = c.glean;
    r.config = {{"glean", c.glean}, {"fm", c.fm}, {"si", c.si}};
    const std::vector<std::pair<std::string, std::string>> roles{
        {"glean", c.glean}, {"fm", c.fm}, {"si", c.si}};
    double look_min = 0.0, look_max = 0.0;
    bool first = true;
    for (const auto& [role, name] : roles) {
      const RunRecord plan = read_record(dir("plan") / (name + ".json"));
      const RunRecord look = read_record(dir("lookahead") / (name + ".json"));
      r.values["plan_rmse_" + role] = plan.aggregates.at("rmse").mean;
      r.values["plan_gd_" + role] = plan.aggregates.at("goal_deviation").mean;
      r.values["plan_kld_" + role] = plan.aggregates.at("kld_pq").mean;
      const double lr = look.aggregates.at("rmse").mean;
      r.values["lookahead_rmse_" + role] = lr;
      look_min = first ? lr : std::min(look_min, lr);
      look_max = first ? lr : std::max(look_max, lr);
      first = false;
    }
    r.values["fm_over_glean"] = r.values["plan_rmse_fm"] / r.values["plan_rmse_glean"];
    r.values["si_over_glean"] = r.values["plan_rmse_si"] / r.values["plan_rmse_glean"];
    r.values["lookahead_spread"] = look_max / look_min;
    write_record(dir("compare") / "compare.json", r);
  }

 private:
  const Checkpoint& pvrnn_checkpoint(const std::string& name, const std::string& stage) {
    if (e_.model(name).kind != ModelKind::PVRNN) {
      throw ConfigError(stage + " needs a PVRNN model, '" + name + "' is not one");
    }
    return checkpoint(name);
  }

  static void write_loss(std::ofstream& hist, const std::vector<double>& history, RunRecord& r) {
    hist << "epoch,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) hist << i << ',' << fmt(history[i]) << '\n';
    if (!history.empty()) r.values["loss"] = history.back();
  }

  static void posterior_summary(const pvrnn::NetworkParams& params,
                                const std::vector<pvrnn::AdaptationVars>& adaptation,
                                const pvrnn::ModelConfig& config,
                                const std::vector<Matrix>& sequences, RunRecord& r) {
    const Noise still = Noise::zeros(config, config.seq_len);
    double first = 0.0, later = 0.0, rmse = 0.0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const auto tr = pvrnn::forward_posterior(params, adaptation[i], config, still);
      const Matrix k = pvrnn::kld_profile(tr, config);
      for (std::size_t t = 0; t < k.rows(); ++t) {
        for (std::size_t l = 0; l < k.cols(); ++l) (t == 0 ? first : later) += k(t, l);
      }
      rmse += planner::rmse(tr.x, sequences[i]);
    }
    r.values["mean_path_kld_pq_t1"] = first;
    r.values["mean_path_kld_pq_later"] = later;
    r.values["reconstruction_rmse"] = rmse / static_cast<double>(sequences.size());
  }
  using Noise = pvrnn::Noise;

  static void put_distribution(const GoalDistribution& d, RunRecord& r) {
    r.values["left"] = d.left;
    r.values["right"] = d.right;
    r.values["neither"] = d.neither;
    r.values["nearest_left"] = d.nearest_left;
    r.values["nearest_right"] = d.nearest_right;
  }

  // KLD at t = 2 against the mean over t > 2, per layer and summed over layers.
  static void put_spike(const KldSeries& kld, RunRecord& r) {
    const std::size_t T = kld.mean.rows(), L = kld.mean.cols();
    if (T < 3) return;
    double t2_total = 0.0, later_total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      double later = 0.0;
      for (std::size_t t = 2; t < T; ++t) later += kld.mean(t, l);
      later /= static_cast<double>(T - 2);
      const std::string p = "layer" + std::to_string(l) + "_";
      r.values[p + "kld_t1"] = kld.mean(0, l);
      r.values[p + "kld_t2"] = kld.mean(1, l);
      r.values[p + "kld_later_mean"] = later;
      t2_total += kld.mean(1, l);
      later_total += later;
    }
    r.values["kld_t2"] = t2_total;
    r.values["kld_later_mean"] = later_total;
    r.values["t2_spike_ratio"] = later_total > 0.0 ? t2_total / later_total : 0.0;
  }

  void plan_set(const std::string& name, const std::vector<dataset::Trajectory>& goals,
                const std::string& suffix, std::uint64_t tag) {
    const auto& p = e_.plan;
    const Checkpoint& ck = checkpoint(name);
    const ModelSpec& m = e_.model(name);
    // FM planning is deterministic, so one repetition says everything.
    const int reps = m.kind == ModelKind::FM ? 1 : p.repetitions;
    const std::size_t items = goals.size() * static_cast<std::size_t>(reps);
    std::vector<PlanEntry> entries(items);
    std::vector<Matrix> paths(items);
    const bool parallel = opt_.execution == pvrnn::Execution::Parallel;
    // Repetitions run in parallel; candidates inside one plan then stay serial.
    planner::PlanOptions po;
    po.execution = pvrnn::Execution::Serial;
    numeric::for_each_index(items, parallel, [&](std::size_t i) {
      const std::size_t g = i / static_cast<std::size_t>(reps);
      const int rep = static_cast<int>(i % static_cast<std::size_t>(reps));
      const auto& truth = goals[g].positions;
      planner::PlanRequest q;
      q.initial.assign(truth.row(0).begin(), truth.row(0).end());
      q.goal.assign(truth.row(truth.rows() - 1).begin(), truth.row(truth.rows() - 1).end());
      q.horizon = static_cast<int>(truth.rows());
      q.rate = p.rate;
      q.epochs = p.epochs;
      q.candidates = p.candidates;
      q.seed = SeededRng::derive_seed(p.seed, {tag, g, static_cast<std::uint64_t>(rep)});
      planner::PlanResult res;
      switch (ck.kind) {
        case ModelKind::PVRNN:
          res = planner::plan_glean(ck.pvrnn, ck.config, q, po);
          break;
        case ModelKind::FM:
          res = planner::plan_fm(ck.fm, ck.config, q, po);
          break;
        case ModelKind::SI:
          res = planner::plan_si(ck.si, ck.config, q, po);
          break;
      }
      PlanEntry& e = entries[i];
      e.goal = static_cast<int>(g);
      e.repetition = rep;
      e.seed = q.seed;
      e.metrics = plan_metrics(res.trajectory, goals[g], q.goal, res.kld_pq, e_.geometry);
      paths[i] = std::move(res.trajectory);
    });
    log("plan " + name + suffix + ": " + std::to_string(items) + " plans");
    RunRecord r = base_record("plan", m);
    r.seeds["plan"] = p.seed;
    r.config["plan_epochs"] = std::to_string(p.epochs);
    r.config["plan_rate"] = fmt(p.rate);
    r.config["candidates"] = std::to_string(p.candidates);
    r.config["goal_set"] = suffix.empty() ? "test" : "center";
    r.plans = std::move(entries);
    r.aggregates = plan_aggregates(r.plans);
    write_paths_csv(dir("plan") / (name + suffix + "_paths.csv"), paths);
    write_record(dir("plan") / (name + suffix + ".json"), r);
  }

  const ExperimentSpec& e_;
  fs::path out_;
  RunOptions opt_;
  std::map<std::string, Checkpoint> cache_;
  std::map<std::string, std::vector<dataset::Trajectory>> data_;
};

std::size_t stage_index(const std::string& stage) {
  const auto& names = stage_names();
  const auto it = std::find(names.begin(), names.end(), stage);
  if (it == names.end()) throw ConfigError("unknown stage '" + stage + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const ModelSpec& ExperimentSpec::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw ConfigError("spec: unknown model '" + name + "'");
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"gen-data",  "train",     "prior-gen", "target-regen",
                                              "plan",      "lookahead", "compare"};
  return names;
}

ExperimentSpec parse_experiment(const SpecFile& spec) {
  ExperimentSpec e;
  for (const auto& s : spec.sections()) {
    static const std::set<std::string> known{"", "experiment", "dataset", "prior-gen",
                                             "target-regen", "plan", "lookahead", "compare"};
    if (!known.count(s) && s.rfind("model.", 0) != 0) {
      throw ConfigError("spec: unknown section [" + s + "]");
    }
  }
  if (!spec.keys("").empty()) throw ConfigError("spec: keys outside any section");

  check_keys(spec, "experiment", {"name", "seed", "stages"});
  e.name = spec.text("experiment", "name", e.name);
  e.seed = spec.seed("experiment", "seed", e.seed);
  e.stages = spec.list("experiment", "stages", stage_names());
  for (const auto& s : e.stages) stage_index(s);
  const std::uint64_t master = e.seed;
  auto derived = [&](std::uint64_t tag) { return SeededRng::derive_seed(master, {tag}); };

  check_keys(spec, "dataset",
             {"seed", "count", "noise", "test_seed", "test_count", "center_seed", "center_count"});
  auto& d = e.dataset;
  d.seed = spec.seed("dataset", "seed", derived(kDataTag));
  d.count = positive(spec, "dataset", "count", d.count);
  d.noise = spec.real("dataset", "noise", d.noise);
  if (d.noise < 0.0) throw ConfigError("spec: [dataset] noise must be >= 0");
  d.test_seed = spec.seed("dataset", "test_seed", derived(kTestTag));
  d.test_count = positive(spec, "dataset", "test_count", d.test_count);
  d.center_seed = spec.seed("dataset", "center_seed", derived(kCenterTag));
  d.center_count = positive(spec, "dataset", "center_count", d.center_count);
  if (d.count % 2 || d.test_count % 2) throw ConfigError("spec: dataset counts must be even");

  std::size_t index = 0;
  for (const auto& s : spec.sections()) {
    if (s.rfind("model.", 0) == 0) parse_model(spec, s, master, index++, e);
  }
  std::set<std::string> names;
  for (const auto& m : e.models) {
    if (!names.insert(m.name).second) throw ConfigError("spec: model '" + m.name + "' repeated");
  }

  check_keys(spec, "prior-gen", {"models", "rollouts", "seed"});
  e.prior_gen.models = model_list(spec, "prior-gen", "models", e);
  e.prior_gen.rollouts = positive(spec, "prior-gen", "rollouts", e.prior_gen.rollouts);
  e.prior_gen.seed = spec.seed("prior-gen", "seed", derived(kPriorTag));

  check_keys(spec, "target-regen", {"models", "rollouts", "label", "seed"});
  e.target_regen.models = model_list(spec, "target-regen", "models", e);
  e.target_regen.rollouts = positive(spec, "target-regen", "rollouts", e.target_regen.rollouts);
  try {
    e.target_regen.label = dataset::parse_label(spec.text("target-regen", "label", "left"));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("spec: [target-regen] ") + ex.what());
  }
  e.target_regen.seed = spec.seed("target-regen", "seed", derived(kRegenTag));

  check_keys(spec, "plan",
             {"models", "center_models", "repetitions", "epochs", "rate", "candidates", "seed"});
  auto& p = e.plan;
  p.models = model_list(spec, "plan", "models", e);
  p.center_models = model_list(spec, "plan", "center_models", e);
  p.repetitions = positive(spec, "plan", "repetitions", p.repetitions);
  p.epochs = positive(spec, "plan", "epochs", p.epochs, 0);
  p.rate = spec.real("plan", "rate", p.rate);
  if (p.rate <= 0.0) throw ConfigError("spec: [plan] rate must be > 0");
  p.candidates = positive(spec, "plan", "candidates", p.candidates);
  p.seed = spec.seed("plan", "seed", derived(kPlanTag));

  check_keys(spec, "lookahead",
             {"models", "count", "window", "regression_epochs", "initial_epochs", "rate", "blend",
              "seed"});
  auto& l = e.lookahead;
  l.models = model_list(spec, "lookahead", "models", e);
  l.count = positive(spec, "lookahead", "count", l.count);
  l.window = positive(spec, "lookahead", "window", l.window, 0);
  l.regression_epochs = positive(spec, "lookahead", "regression_epochs", l.regression_epochs, 0);
  l.initial_epochs = positive(spec, "lookahead", "initial_epochs", l.initial_epochs, 0);
  l.rate = spec.real("lookahead", "rate", l.rate);
  l.blend = spec.real("lookahead", "blend", l.blend);
  if (l.rate <= 0.0 || l.blend < 0.0 || l.blend > 1.0) {
    throw ConfigError("spec: [lookahead] needs rate > 0 and blend in [0,1]");
  }
  l.seed = spec.seed("lookahead", "seed", derived(kLookaheadTag));

  check_keys(spec, "compare", {"glean", "fm", "si"});
  e.compare.glean = spec.text("compare", "glean", e.compare.glean);
  e.compare.fm = spec.text("compare", "fm", e.compare.fm);
  e.compare.si = spec.text("compare", "si", e.compare.si);
  return e;
}

bool stage_complete(const fs::path& out_dir, const std::string& stage) {
  return fs::exists(out_dir / stage / kComplete);
}

void run_stages(const ExperimentSpec& e, const SpecFile& spec, const fs::path& out,
                const std::vector<std::string>& stages, const RunOptions& options) {
  std::vector<bool> wanted(stage_names().size(), false);
  for (const auto& s : stages) wanted[stage_index(s)] = true;
  auto available = [&](const std::string& s) { return wanted[stage_index(s)] || stage_complete(out, s); };
  auto require = [&](const std::string& stage, const std::string& needs) {
    if (wanted[stage_index(stage)] && !stage_complete(out, stage) && !available(needs)) {
      throw ConfigError(stage + " needs the " + needs + " stage in " + out.string());
    }
  };
  for (const auto& s : {"train", "prior-gen", "target-regen", "plan", "lookahead"}) {
    require(s, "gen-data");
  }
  // Models without an explicit checkpoint come from the train stage.
  auto needs_training = [&](const std::vector<std::string>& names) {
    return std::any_of(names.begin(), names.end(),
                       [&](const std::string& n) { return e.model(n).checkpoint.empty(); });
  };
  const std::vector<std::pair<std::string, const std::vector<std::string>*>> users{
      {"prior-gen", &e.prior_gen.models}, {"target-regen", &e.target_regen.models},
      {"plan", &e.plan.models},           {"lookahead", &e.lookahead.models}};
  for (const auto& [stage, names] : users) {
    if (needs_training(*names)) require(stage, "train");
  }
  if (wanted[stage_index("compare")] && !stage_complete(out, "compare")) {
    require("compare", "plan");
    require("compare", "lookahead");
    for (const auto& n : {e.compare.glean, e.compare.fm, e.compare.si}) {
      e.model(n);
      const auto& pm = e.plan.models;
      const auto& lm = e.lookahead.models;
      if (std::find(pm.begin(), pm.end(), n) == pm.end() ||
          std::find(lm.begin(), lm.end(), n) == lm.end()) {
        throw ConfigError("compare: model '" + n + "' must be in [plan] and [lookahead] models");
      }
    }
  }
  for (const auto& m : e.models) {
    if (!m.checkpoint.empty() && !fs::exists(m.checkpoint)) {
      throw ConfigError("checkpoint " + m.checkpoint.string() + " does not exist");
    }
  }

  fs::create_directories(out);
  const fs::path snapshot = out / "spec.txt";
  const std::string text = spec.dump();
  if (fs::exists(snapshot)) {
    if (read_file(snapshot) != text) {
      throw ConfigError(out.string() + " holds a run of a different spec");
    }
  } else {
    std::ofstream(snapshot) << text;
  }

  Run run(e, out, options);
  for (const auto& stage : stage_names()) {
    if (!wanted[stage_index(stage)]) continue;
    if (stage_complete(out, stage)) {
      run.log(stage + ": already complete");
      continue;
    }
    fs::create_directories(out / stage);
    run.log(stage + ": start");
    const auto t0 = std::chrono::steady_clock::now();
    if (stage == "gen-data") run.gen_data();
    if (stage == "train") run.train();
    if (stage == "prior-gen") run.prior_gen();
    if (stage == "target-regen") run.target_regen();
    if (stage == "plan") run.plan();
    if (stage == "lookahead") run.lookahead();
    if (stage == "compare") run.compare();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream(out / stage / "timing.json") << "{\"seconds\": " << secs << "}\n";
    std::ofstream(out / stage / kComplete) << "";
    run.log(stage + ": done in " + std::to_string(secs) + " s");
  }
}

void run_experiment(const ExperimentSpec& e, const SpecFile& spec, const fs::path& out,
                    const RunOptions& options) {
  run_stages(e, spec, out, e.stages, options);
}

std::string report(const fs::path& out) {
  if (!fs::exists(out)) throw ConfigError("no run directory at " + out.string());
  std::ostringstream os;
  for (const auto& stage : stage_names()) {
    const fs::path d = out / stage;
    if (!fs::exists(d)) continue;
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(d)) {
      if (f.path().extension() == ".json" && f.path().filename() != "timing.json") {
        files.push_back(f.path());
      }
    }
    std::sort(files.begin(), files.end());
    os << "[" << stage << "]" << (stage_complete(out, stage) ? "" : " (incomplete)") << '\n';
    for (const auto& f : files) {
      const RunRecord r = read_record(f);
      os << "  " << f.stem().string();
      for (const auto& [k, s] : r.aggregates) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " %s=%.4g+-%.2g", k.c_str(), s.mean, s.sd);
        os << buf;
      }
      for (const auto& [k, v] : r.values) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " %s=%.4g", k.c_str(), v);
        os << buf;
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace glean::harness
