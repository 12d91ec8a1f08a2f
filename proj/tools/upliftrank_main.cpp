// Command-line front end: gen, prep, train, eval, simulate, compare.
// Every run writes deterministic artifacts plus a resolved-config snapshot
// under --out; all randomness flows from the --seed flag.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "upliftrank/barrier.hpp"
#include "upliftrank/core.hpp"
#include "upliftrank/drm.hpp"
#include "upliftrank/eval.hpp"
#include "upliftrank/ingest.hpp"
#include "upliftrank/nn.hpp"
#include "upliftrank/rlearner.hpp"
#include "upliftrank/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uplift;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct CommonOpts {
  std::string out = ".";
  std::uint64_t seed = 0;
};

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_resolved_config(const json& cfg, const fs::path& out_dir) {
  write_json(cfg, out_dir / "config.resolved.json");
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> parse_grid(const std::string& spec) {
  // "5:100:5" (percent range) or "15,20,30" (percent list)
  std::vector<double> grid;
  if (spec.find(':') != std::string::npos) {
    int lo = 0, hi = 0, step = 0;
    if (std::sscanf(spec.c_str(), "%d:%d:%d", &lo, &hi, &step) != 3 ||
        step <= 0) {
      throw InvalidConfigError("bad grid spec '" + spec + "'");
    }
    for (int q = lo; q <= hi; q += step) grid.push_back(q / 100.0);
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      grid.push_back(std::stod(tok) / 100.0);
    }
  }
  if (grid.empty() || grid.back() != 1.0) {
    throw InvalidConfigError("grid must end at 100 percent");
  }
  return grid;
}

std::vector<int> parse_layers(const std::string& spec) {
  std::vector<int> layers;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) layers.push_back(std::stoi(tok));
  return layers;
}

ingest::SyntheticConfig synthetic_from_flags(Eigen::Index n, int d,
                                             double noise_sd,
                                             const std::string& treat_prob) {
  auto cfg = ingest::SyntheticConfig::defaults(n, d);
  cfg.noise_sd = noise_sd;
  if (treat_prob == "logistic") {
    cfg.treat_prob.logistic = true;
    cfg.treat_prob.w = VectorXd::Zero(d);
    cfg.treat_prob.w[0] = 1.0;
  } else {
    cfg.treat_prob.e = std::stod(treat_prob);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Model files: one JSON with a kind tag, dispatched at scoring time.

struct LoadedModel {
  std::string kind;
  nn::ScorerParams scorer;               // drm / constrained
  rlearner::DualityModel duality;        // duality
  rlearner::RidgeModel ridge;            // rlearner
  std::uint64_t random_seed = 0;         // random
};

LoadedModel load_model(const std::string& path) {
  const json j = load_json(path);
  LoadedModel m;
  m.kind = j.at("kind").get<std::string>();
  if (m.kind == "drm" || m.kind == "constrained") {
    m.scorer = nn::checkpoint_from_json(j.at("checkpoint"));
  } else if (m.kind == "duality") {
    m.duality = rlearner::duality_from_json(j.at("model"));
  } else if (m.kind == "rlearner") {
    m.ridge = rlearner::ridge_from_json(j.at("model"));
  } else if (m.kind == "random") {
    m.random_seed = j.at("seed").get<std::uint64_t>();
  } else if (m.kind == "oracle") {
    // scored from a ground-truth file at eval time
  } else {
    throw SchemaError("unknown model kind '" + m.kind + "' in " + path);
  }
  return m;
}

VectorXd score_model(const LoadedModel& m, const MatrixXd& x,
                     const ingest::GroundTruth* gt) {
  if (m.kind == "drm" || m.kind == "constrained") {
    return nn::forward(m.scorer, x);
  }
  if (m.kind == "duality") {
    return rlearner::duality_score(m.duality.tau_r, m.duality.tau_c,
                                   m.duality.lambda, x);
  }
  if (m.kind == "rlearner") {
    return m.ridge.predict(x);
  }
  if (m.kind == "random") {
    Rng rng(RngSeed{m.random_seed});
    VectorXd s(x.rows());
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = rng.uniform01();
    return s;
  }
  if (m.kind == "oracle") {
    if (!gt) {
      throw InvalidConfigError(
          "oracle model needs --groundtruth with tau values");
    }
    if (gt->tau_r_true.size() != x.rows()) {
      throw ShapeMismatchError(
          "ground-truth file does not match the dataset row count");
    }
    return gt->tau_r_true.array() / gt->tau_c_true.array().max(1e-12);
  }
  throw SchemaError("unknown model kind '" + m.kind + "'");
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string data;
  std::string model = "drm";
  std::string groundtruth;
  std::string objective = "ratio";
  std::string propensity = "none";
  std::string layers;
  std::string split = "0.6,0.2,0.2";
  std::uint64_t split_seed = 0;
  int iters = 1500;
  double lr = 0.001;
  double reg = 0.0;
  double alpha = 1.5;
  int batch_size = 0;
  double percentage = 0.4;
  double budget = 0.0;
  double t0 = 0.5, dt = 0.1, t_max = 50.0;
  int every = 10;
  std::string lambda_grid;
};

ingest::SplitRatios split_from_flag(const std::string& spec) {
  ingest::SplitRatios r;
  if (std::sscanf(spec.c_str(), "%lf,%lf,%lf", &r.train, &r.val, &r.test) !=
      3) {
    throw InvalidConfigError("bad --split '" + spec + "'");
  }
  r.validate();
  return r;
}

std::optional<drm::PropensityWeights> propensity_from_flag(
    const std::string& kind, const Dataset& ds) {
  if (kind == "none") return std::nullopt;
  if (kind == "constant") {
    return drm::PropensityWeights::constant(ds.t());
  }
  if (kind == "logistic") {
    const auto model = rlearner::fit_propensity(ds.x(), ds.t());
    return drm::PropensityWeights::from_estimates(ds.t(),
                                                  model.predict(ds.x()));
  }
  throw InvalidConfigError("unknown propensity kind '" + kind + "'");
}

json train_one_model(const std::string& kind, const Dataset& train,
                     const Dataset& val, const TrainFlags& flags,
                     std::uint64_t seed, std::vector<drm::TraceRow>* trace,
                     bool* barrier_trace) {
  json model_file;
  model_file["kind"] = kind;
  *barrier_trace = false;

  if (kind == "drm" || kind == "constrained") {
    drm::TrainConfig tc;
    tc.iterations = flags.iters;
    tc.lr = flags.lr;
    tc.l2_reg = flags.reg;
    tc.batch_size = flags.batch_size;
    tc.seed = RngSeed{seed};
    if (!flags.layers.empty()) tc.layer_sizes = parse_layers(flags.layers);
    if (flags.objective == "linear") {
      tc.objective.mode = drm::ObjectiveMode::kLinear;
      tc.objective.alpha = flags.alpha;
    } else if (flags.objective == "double-rectified") {
      tc.objective.mode = drm::ObjectiveMode::kDoubleRectified;
    } else if (flags.objective != "ratio") {
      throw InvalidConfigError("unknown objective '" + flags.objective + "'");
    }
    tc.objective.propensity = propensity_from_flag(flags.propensity, train);

    json train_cfg;
    train_cfg["iterations"] = tc.iterations;
    train_cfg["lr"] = tc.lr;
    train_cfg["objective"] = flags.objective;
    train_cfg["propensity"] = flags.propensity;

    if (kind == "drm") {
      const auto result = drm::train_drm(train, tc);
      *trace = result.trace;
      model_file["checkpoint"] = nn::checkpoint_to_json(result.params,
                                                        train_cfg);
    } else {
      barrier::ConstrainedTrainConfig cc;
      cc.base = tc;
      cc.constraint = flags.budget > 0.0
                          ? barrier::Constraint::make_budget(flags.budget)
                          : barrier::Constraint::make_percentage(
                                flags.percentage);
      cc.anneal.t0 = flags.t0;
      cc.anneal.dt = flags.dt;
      cc.anneal.every = flags.every;
      cc.anneal.t_max = flags.t_max;
      train_cfg["constraint"] =
          flags.budget > 0.0 ? "budget" : "percentage";
      const auto result = barrier::train_constrained(train, cc);
      *trace = result.trace;
      *barrier_trace = true;
      model_file["checkpoint"] = nn::checkpoint_to_json(result.params,
                                                        train_cfg);
    }
    return model_file;
  }

  if (kind == "rlearner" || kind == "duality") {
    const auto prop = flags.propensity == "logistic"
                          ? rlearner::fit_propensity(train.x(), train.t())
                          : rlearner::fit_propensity_constant(train.t());
    rlearner::RLearnerOptions value_opt;
    value_opt.reg = flags.reg;
    const auto tau_r = rlearner::rlearner_fit(train, value_opt, prop);
    if (kind == "rlearner") {
      model_file["model"] = rlearner::ridge_to_json(tau_r);
      return model_file;
    }
    rlearner::RLearnerOptions cost_opt;
    cost_opt.outcome = rlearner::Outcome::kCost;
    cost_opt.reg = flags.reg;
    const auto tau_c = rlearner::rlearner_fit(train, cost_opt, prop);
    rlearner::DualityModel duality;
    duality.tau_r = tau_r;
    duality.tau_c = tau_c;
    std::vector<double> grid = rlearner::default_lambda_grid();
    if (!flags.lambda_grid.empty()) {
      grid.clear();
      std::stringstream ss(flags.lambda_grid);
      std::string tok;
      while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
    }
    duality.lambda = rlearner::select_lambda(tau_r, tau_c, val, grid);
    model_file["model"] = rlearner::duality_to_json(duality);
    return model_file;
  }

  if (kind == "random") {
    model_file["seed"] = seed;
    return model_file;
  }
  if (kind == "oracle") {
    return model_file;  // nothing to fit
  }
  throw InvalidConfigError("unknown model kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

int cmd_gen(const CommonOpts& common, Eigen::Index n, int d, double noise_sd,
            const std::string& treat_prob) {
  const fs::path out = ensure_out_dir(common.out);
  const auto cfg = synthetic_from_flags(n, d, noise_sd, treat_prob);
  const auto [ds, gt] = ingest::generate_synthetic(cfg, RngSeed{common.seed});
  ingest::write_csv(ds, (out / "dataset.csv").string());
  ingest::write_groundtruth_csv(gt, (out / "groundtruth.csv").string());

  json meta;
  meta["source"] = "synthetic";
  meta["n"] = static_cast<long>(ds.n());
  meta["d"] = static_cast<long>(ds.d());
  meta["seed"] = common.seed;
  meta["noise_sd"] = noise_sd;
  meta["treat_prob"] = treat_prob;
  write_json(meta, out / "dataset.meta.json");

  json resolved = meta;
  resolved["command"] = "gen";
  resolved["out"] = common.out;
  write_resolved_config(resolved, out);
  std::cout << "wrote " << (out / "dataset.csv").string() << " (" << ds.n()
            << " samples, d=" << ds.d() << ")\n";
  return kExitOk;
}

int cmd_prep(const CommonOpts& common, const std::string& recipe,
             const std::string& raw_path, const std::string& manifest_path,
             Eigen::Index subsample) {
  const fs::path out = ensure_out_dir(common.out);
  std::vector<std::string> warnings;
  Dataset ds;
  json manifest_json;
  if (recipe == "census") {
    auto manifest = ingest::CensusManifest::defaults();
    if (!manifest_path.empty()) {
      manifest = ingest::CensusManifest::from_json(load_json(manifest_path));
    }
    auto raw = ingest::load_raw_table(raw_path);
    if (subsample > 0) {
      raw = ingest::subsample_rows(raw, subsample, RngSeed{common.seed});
    }
    ds = ingest::build_census(raw, manifest, &warnings);
    manifest_json = manifest.to_json();
  } else if (recipe == "covtype") {
    auto manifest = ingest::CovtypeManifest::defaults();
    if (!manifest_path.empty()) {
      manifest = ingest::CovtypeManifest::from_json(load_json(manifest_path));
    }
    // covtype.data ships headerless; fall back to canonical names.
    std::ifstream probe(raw_path);
    if (!probe) throw Error("cannot open " + raw_path);
    std::string first_line;
    std::getline(probe, first_line);
    probe.close();
    const bool has_header =
        first_line.find("Elevation") != std::string::npos ||
        first_line.find("elevation") != std::string::npos;
    auto raw = has_header
                   ? ingest::load_raw_table(raw_path)
                   : ingest::load_raw_table(raw_path,
                                            ingest::covtype_column_names());
    if (subsample > 0) {
      raw = ingest::subsample_rows(raw, subsample, RngSeed{common.seed});
    }
    ds = ingest::build_covtype(raw, manifest, &warnings);
    manifest_json = manifest.to_json();
  } else {
    throw InvalidConfigError("unknown recipe '" + recipe +
                             "' (expected census or covtype)");
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  ingest::write_csv(ds, (out / "dataset.csv").string());

  json meta;
  meta["source"] = recipe;
  meta["raw"] = raw_path;
  meta["n"] = static_cast<long>(ds.n());
  meta["d"] = static_cast<long>(ds.d());
  meta["seed"] = common.seed;
  meta["subsample"] = static_cast<long>(subsample);
  meta["manifest"] = manifest_json;
  meta["warnings"] = warnings;
  write_json(meta, out / "dataset.meta.json");

  json resolved = meta;
  resolved["command"] = "prep";
  resolved["out"] = common.out;
  write_resolved_config(resolved, out);
  std::cout << "wrote " << (out / "dataset.csv").string() << " (" << ds.n()
            << " samples, d=" << ds.d() << ")\n";
  return kExitOk;
}

int cmd_train(const CommonOpts& common, const TrainFlags& flags) {
  const fs::path out = ensure_out_dir(common.out);
  const Dataset full = ingest::load_csv(flags.data);
  const auto ratios = split_from_flag(flags.split);
  const auto parts =
      ingest::split_dataset(full, ratios, RngSeed{flags.split_seed});

  std::vector<drm::TraceRow> trace;
  bool barrier_trace = false;
  json model_file = train_one_model(flags.model, parts.train, parts.val,
                                    flags, common.seed, &trace,
                                    &barrier_trace);
  write_json(model_file, out / "model.json");
  if (!trace.empty()) {
    drm::write_trace_csv(trace, (out / "trace.csv").string(), barrier_trace);
  }

  json resolved;
  resolved["command"] = "train";
  resolved["data"] = flags.data;
  resolved["model"] = flags.model;
  resolved["iters"] = flags.iters;
  resolved["lr"] = flags.lr;
  resolved["reg"] = flags.reg;
  resolved["objective"] = flags.objective;
  resolved["propensity"] = flags.propensity;
  resolved["percentage"] = flags.percentage;
  resolved["budget"] = flags.budget;
  resolved["split"] = flags.split;
  resolved["split_seed"] = flags.split_seed;
  resolved["seed"] = common.seed;
  resolved["out"] = common.out;
  write_resolved_config(resolved, out);
  std::cout << "wrote " << (out / "model.json").string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonOpts& common, const std::string& data,
             const std::string& model_path, const std::string& gt_path,
             const std::string& split, std::uint64_t split_seed,
             const std::string& subset, const std::string& grid_spec,
             const std::string& gen_grid_spec,
             const std::string& gen_propensity, const std::string& gen_mode,
             double alpha) {
  const fs::path out = ensure_out_dir(common.out);
  const Dataset full = ingest::load_csv(data);

  std::optional<ingest::GroundTruth> gt;
  if (!gt_path.empty()) gt = ingest::load_groundtruth_csv(gt_path);

  Dataset target = full;
  std::vector<Eigen::Index> target_rows(static_cast<std::size_t>(full.n()));
  std::iota(target_rows.begin(), target_rows.end(), Eigen::Index{0});
  if (subset != "all") {
    // Recompute the deterministic split and keep the requested part. Row
    // provenance is tracked so ground truth stays aligned.
    const auto ratios = split_from_flag(split);
    Rng rng(RngSeed{split_seed});
    const auto perm = rng.permutation(full.n());
    const auto cut1 = static_cast<Eigen::Index>(
        std::floor(static_cast<double>(full.n()) * ratios.train));
    const auto cut2 = static_cast<Eigen::Index>(std::floor(
        static_cast<double>(full.n()) * (ratios.train + ratios.val)));
    if (subset == "train") {
      target_rows.assign(perm.begin(), perm.begin() + cut1);
    } else if (subset == "val") {
      target_rows.assign(perm.begin() + cut1, perm.begin() + cut2);
    } else if (subset == "test") {
      target_rows.assign(perm.begin() + cut2, perm.end());
    } else {
      throw InvalidConfigError("unknown subset '" + subset + "'");
    }
    target = full.subset(target_rows);
  }

  std::optional<ingest::GroundTruth> target_gt;
  if (gt) {
    if (gt->tau_r_true.size() != full.n()) {
      throw ShapeMismatchError("ground truth does not match the dataset");
    }
    ingest::GroundTruth sub;
    const auto m = static_cast<Eigen::Index>(target_rows.size());
    sub.tau_r_true = VectorXd(m);
    sub.tau_c_true = VectorXd(m);
    sub.propensity_true = VectorXd(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = target_rows[static_cast<std::size_t>(k)];
      sub.tau_r_true[k] = gt->tau_r_true[i];
      sub.tau_c_true[k] = gt->tau_c_true[i];
      sub.propensity_true[k] = gt->propensity_true[i];
    }
    target_gt = std::move(sub);
  }

  const LoadedModel model = load_model(model_path);
  const VectorXd scores =
      score_model(model, target.x(), target_gt ? &*target_gt : nullptr);

  auto curve = eval::cost_curve(scores, target, parse_grid(grid_spec));
  for (double q : curve.skipped) {
    std::cerr << "warning: skipped q=" << q
              << " (prefix lacks a cohort)\n";
  }
  curve.aucc = eval::aucc(curve);
  eval::write_curve_csv(curve, (out / "curve.csv").string());

  json summary;
  summary["model"] = model.kind;
  summary["n"] = static_cast<long>(target.n());
  summary["subset"] = subset;
  summary["aucc"] = curve.aucc;
  summary["grid"] = curve.grid;

  if (!gen_grid_spec.empty()) {
    const auto qs = parse_grid(gen_grid_spec);
    const auto w = [&]() -> drm::PropensityWeights {
      if (gen_propensity == "logistic") {
        const auto pm = rlearner::fit_propensity(target.x(), target.t());
        return drm::PropensityWeights::from_estimates(target.t(),
                                                      pm.predict(target.x()));
      }
      return drm::PropensityWeights::constant(target.t());
    }();
    const auto mode =
        gen_mode == "linear" ? eval::GenMode::kLinear : eval::GenMode::kRatio;
    json rows = json::array();
    for (double q : qs) {
      json row;
      row["q"] = q;
      row["score"] =
          eval::generalization_score(scores, target, q, w, mode, alpha);
      rows.push_back(row);
    }
    summary["generalization"] = rows;
    summary["generalization_propensity"] = gen_propensity;
    summary["generalization_mode"] = gen_mode;
  }
  write_json(summary, out / "summary.json");

  json resolved;
  resolved["command"] = "eval";
  resolved["data"] = data;
  resolved["model"] = model_path;
  resolved["subset"] = subset;
  resolved["split"] = split;
  resolved["split_seed"] = split_seed;
  resolved["grid"] = grid_spec;
  resolved["gen_grid"] = gen_grid_spec;
  resolved["seed"] = common.seed;
  resolved["out"] = common.out;
  write_resolved_config(resolved, out);

  std::cout << "aucc " << curve.aucc << "\n";
  return kExitOk;
}

int cmd_simulate(const CommonOpts& common, Eigen::Index n, int d,
                 double noise_sd, int cycles, double explore_fraction,
                 double percentage, double budget,
                 double exploit_treat_prob,
                 const std::vector<std::string>& model_specs) {
  const fs::path out = ensure_out_dir(common.out);
  const auto gen = synthetic_from_flags(n, d, noise_sd, "0.5");

  std::vector<sim::ExperimentLog> logs;
  json cycles_json = json::array();
  for (int cycle = 0; cycle < cycles; ++cycle) {
    const auto pop =
        sim::make_population(gen, RngSeed{common.seed + 1000003ull * cycle});

    std::vector<sim::ScorerHandle> handles;
    for (const std::string& spec : model_specs) {
      if (spec == "oracle") {
        handles.push_back({"oracle", [gen](const MatrixXd& x) {
                             const auto g =
                                 ingest::evaluate_ground_truth(gen, x);
                             return VectorXd(g.tau_r_true.array() /
                                             g.tau_c_true.array().max(1e-12));
                           }});
      } else if (spec == "random") {
        const std::uint64_t rs = common.seed + 77777ull * (cycle + 1);
        handles.push_back({"random", [rs](const MatrixXd& x) {
                             Rng r(RngSeed{rs});
                             VectorXd s(x.rows());
                             for (Eigen::Index i = 0; i < s.size(); ++i) {
                               s[i] = r.uniform01();
                             }
                             return s;
                           }});
      } else {
        auto loaded = std::make_shared<LoadedModel>(load_model(spec));
        const std::string id = fs::path(spec).stem().string();
        handles.push_back({id, [loaded](const MatrixXd& x) {
                             return score_model(*loaded, x, nullptr);
                           }});
      }
    }

    sim::CycleConfig cc;
    cc.population_size = n;
    cc.explore_fraction = explore_fraction;
    cc.exploit_cutoff = budget > 0.0
                            ? barrier::Constraint::make_budget(budget)
                            : barrier::Constraint::make_percentage(percentage);
    cc.exploit_treat_prob = exploit_treat_prob;
    cc.seed = RngSeed{common.seed + 17ull * cycle + 1};

    auto log = sim::run_cycle(pop, gen, handles, cc);
    log.cycle = cycle;
    const auto metrics = sim::evaluate_cycle(log);
    json arms = json::object();
    for (const auto& [arm, m] : metrics) {
      json row;
      row["R"] = m.r;
      row["efficiency_gain"] = m.gain;
      arms[arm] = row;
    }
    json cj;
    cj["cycle"] = cycle;
    cj["arms"] = arms;
    cycles_json.push_back(cj);
    logs.push_back(std::move(log));
  }
  sim::write_log_csv(logs, (out / "log.csv").string());

  json summary;
  summary["cycles"] = cycles_json;
  summary["n"] = static_cast<long>(n);
  write_json(summary, out / "summary.json");

  json resolved;
  resolved["command"] = "simulate";
  resolved["n"] = static_cast<long>(n);
  resolved["d"] = d;
  resolved["cycles"] = cycles;
  resolved["explore_fraction"] = explore_fraction;
  resolved["percentage"] = percentage;
  resolved["budget"] = budget;
  resolved["models"] = model_specs;
  resolved["seed"] = common.seed;
  resolved["out"] = common.out;
  write_resolved_config(resolved, out);
  std::cout << "wrote " << (out / "log.csv").string() << "\n";
  return kExitOk;
}

int thread_budget(std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t cap = std::min<std::size_t>(hw, jobs);
  if (const char* env = std::getenv("UPLIFT_RANK_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) cap = std::min<std::size_t>(cap, parsed);
  }
  return static_cast<int>(std::max<std::size_t>(cap, 1));
}

int cmd_compare(const CommonOpts& common, const std::string& data,
                const std::string& gt_path, Eigen::Index n, int d,
                double noise_sd, const std::vector<std::string>& model_kinds,
                TrainFlags flags) {
  const fs::path out = ensure_out_dir(common.out);

  Dataset full;
  std::optional<ingest::GroundTruth> gt;
  std::string dataset_name;
  if (!data.empty()) {
    full = ingest::load_csv(data);
    dataset_name = data;
    if (!gt_path.empty()) gt = ingest::load_groundtruth_csv(gt_path);
  } else {
    const auto cfg = synthetic_from_flags(n, d, noise_sd, "0.5");
    auto pair = ingest::generate_synthetic(cfg, RngSeed{common.seed});
    full = std::move(pair.first);
    gt = std::move(pair.second);
    dataset_name = "synthetic";
  }

  const auto ratios = split_from_flag(flags.split);
  Rng rng(RngSeed{flags.split_seed});
  const auto perm = rng.permutation(full.n());
  const auto cut1 = static_cast<Eigen::Index>(
      std::floor(static_cast<double>(full.n()) * ratios.train));
  const auto cut2 = static_cast<Eigen::Index>(std::floor(
      static_cast<double>(full.n()) * (ratios.train + ratios.val)));
  const std::vector<Eigen::Index> train_rows(perm.begin(),
                                             perm.begin() + cut1);
  const std::vector<Eigen::Index> val_rows(perm.begin() + cut1,
                                           perm.begin() + cut2);
  const std::vector<Eigen::Index> test_rows(perm.begin() + cut2, perm.end());
  const Dataset train = full.subset(train_rows);
  const Dataset val = full.subset(val_rows);
  const Dataset test = full.subset(test_rows);

  std::optional<ingest::GroundTruth> test_gt;
  if (gt) {
    ingest::GroundTruth sub;
    const auto m = static_cast<Eigen::Index>(test_rows.size());
    sub.tau_r_true = VectorXd(m);
    sub.tau_c_true = VectorXd(m);
    sub.propensity_true = VectorXd(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = test_rows[static_cast<std::size_t>(k)];
      sub.tau_r_true[k] = gt->tau_r_true[i];
      sub.tau_c_true[k] = gt->tau_c_true[i];
      sub.propensity_true[k] = gt->propensity_true[i];
    }
    test_gt = std::move(sub);
  }

  // Train the requested models; each has an independent seed so parallel
  // execution cannot change results.
  struct Entry {
    std::string kind;
    json model_file;
    double aucc = 0.0;
    std::string error;
  };
  std::vector<Entry> entries(model_kinds.size());
  const int threads = thread_budget(model_kinds.size());
  std::vector<std::thread> workers;
  std::size_t next = 0;
  std::mutex mu;
  auto work = [&]() {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= model_kinds.size()) return;
        k = next++;
      }
      Entry& entry = entries[k];
      entry.kind = model_kinds[k];
      try {
        std::vector<drm::TraceRow> trace;
        bool barrier_trace = false;
        entry.model_file = train_one_model(
            entry.kind, train, val, flags,
            common.seed + 101ull * (k + 1), &trace, &barrier_trace);
      } catch (const Error& e) {
        entry.error = e.what();
      }
    }
  };
  for (int w = 0; w < threads; ++w) workers.emplace_back(work);
  for (auto& w : workers) w.join();

  json table = json::array();
  double duality_aucc = 0.0;
  bool have_duality = false;
  for (Entry& entry : entries) {
    if (!entry.error.empty()) continue;
    LoadedModel model;
    model.kind = entry.kind;
    if (entry.kind == "drm" || entry.kind == "constrained") {
      model.scorer = nn::checkpoint_from_json(entry.model_file["checkpoint"]);
    } else if (entry.kind == "duality") {
      model.duality = rlearner::duality_from_json(entry.model_file["model"]);
    } else if (entry.kind == "rlearner") {
      model.ridge = rlearner::ridge_from_json(entry.model_file["model"]);
    } else if (entry.kind == "random") {
      model.random_seed = entry.model_file["seed"].get<std::uint64_t>();
    }
    try {
      const VectorXd scores =
          score_model(model, test.x(), test_gt ? &*test_gt : nullptr);
      auto curve = eval::cost_curve(scores, test);
      entry.aucc = eval::aucc(curve);
      eval::write_curve_csv(curve,
                            (out / ("curve_" + entry.kind + ".csv")).string());
      if (entry.kind == "duality") {
        duality_aucc = entry.aucc;
        have_duality = true;
      }
    } catch (const Error& e) {
      entry.error = e.what();
    }
  }

  for (const Entry& entry : entries) {
    json row;
    row["algorithm"] = entry.kind;
    row["dataset"] = dataset_name;
    if (entry.error.empty()) {
      row["aucc"] = entry.aucc;
      if (have_duality && duality_aucc > 0.0) {
        row["improvement_vs_duality"] =
            (entry.aucc - duality_aucc) / duality_aucc;
      } else {
        row["improvement_vs_duality"] = nullptr;
      }
    } else {
      row["error"] = entry.error;
    }
    table.push_back(row);
  }

  json summary;
  summary["dataset"] = dataset_name;
  summary["n_test"] = static_cast<long>(test.n());
  summary["rows"] = table;
  write_json(summary, out / "summary.json");

  json resolved;
  resolved["command"] = "compare";
  resolved["dataset"] = dataset_name;
  resolved["models"] = model_kinds;
  resolved["iters"] = flags.iters;
  resolved["split"] = flags.split;
  resolved["split_seed"] = flags.split_seed;
  resolved["seed"] = common.seed;
  resolved["out"] = common.out;
  write_resolved_config(resolved, out);

  std::cout << "algorithm,dataset,aucc,improvement_vs_duality\n";
  for (const Entry& entry : entries) {
    std::cout << entry.kind << ',' << dataset_name << ',';
    if (entry.error.empty()) {
      std::cout << entry.aucc << ',';
      if (have_duality && duality_aucc > 0.0) {
        std::cout << (entry.aucc - duality_aucc) / duality_aucc;
      } else {
        std::cout << "n/a";
      }
    } else {
      std::cout << "error: " << entry.error << ',';
    }
    std::cout << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment-effect ranking: train, evaluate, and simulate "
               "value-vs-cost ranking models"};
  app.require_subcommand(1);
  app.fallthrough();  // allow `gen --config file` as well as `--config file gen`
  app.set_config("--config", "", "Config file with a [subcommand] section");
  app.allow_config_extras(false);  // unknown keys are rejected

  CommonOpts common;

  // --- gen ---
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  Eigen::Index gen_n = 20000;
  int gen_d = 10;
  double gen_noise = 0.5;
  std::string gen_treat = "0.5";
  gen->add_option("--n", gen_n, "Sample count");
  gen->add_option("--d", gen_d, "Feature dimension");
  gen->add_option("--noise-sd", gen_noise, "Outcome noise std dev");
  gen->add_option("--treat-prob", gen_treat,
                  "Constant probability or 'logistic'");
  gen->add_option("--seed", common.seed, "Random seed");
  gen->add_option("--out", common.out, "Output directory");

  // --- prep ---
  auto* prep =
      app.add_subcommand("prep", "Build a public-dataset experiment table");
  std::string prep_recipe, prep_raw, prep_manifest;
  Eigen::Index prep_subsample = 0;
  prep->add_option("--recipe", prep_recipe, "census or covtype")->required();
  prep->add_option("--raw", prep_raw, "Raw CSV path")->required();
  prep->add_option("--manifest", prep_manifest, "Manifest JSON override");
  prep->add_option("--subsample", prep_subsample,
                   "Keep a seeded row subsample of the raw table");
  prep->add_option("--seed", common.seed, "Random seed");
  prep->add_option("--out", common.out, "Output directory");

  // --- train ---
  auto* train = app.add_subcommand("train", "Fit a ranking model");
  TrainFlags tf;
  train->add_option("--data", tf.data, "Dataset CSV (native format)")
      ->required();
  train->add_option("--model", tf.model,
                    "drm|constrained|duality|rlearner|random|oracle");
  train->add_option("--iters", tf.iters, "Optimizer iterations");
  train->add_option("--lr", tf.lr, "Learning rate");
  train->add_option("--reg", tf.reg, "L2 weight");
  train->add_option("--alpha", tf.alpha, "Linear-objective cost weight");
  train->add_option("--batch-size", tf.batch_size, "0 = full batch");
  train->add_option("--layers", tf.layers, "Comma widths, e.g. 10,8,1");
  train->add_option("--objective", tf.objective,
                    "ratio|linear|double-rectified");
  train->add_option("--propensity", tf.propensity,
                    "none|constant|logistic");
  train->add_option("--percentage", tf.percentage,
                    "Constrained model percentage target");
  train->add_option("--budget", tf.budget,
                    "Constrained model budget (overrides percentage)");
  train->add_option("--t0", tf.t0, "Barrier start temperature");
  train->add_option("--dt", tf.dt, "Barrier temperature increment");
  train->add_option("--every", tf.every, "Steps between increments");
  train->add_option("--tmax", tf.t_max, "Temperature cap");
  train->add_option("--lambda-grid", tf.lambda_grid,
                    "Comma lambda values for duality selection");
  train->add_option("--split", tf.split, "train,val,test fractions");
  train->add_option("--split-seed", tf.split_seed, "Split permutation seed");
  train->add_option("--seed", common.seed, "Random seed");
  train->add_option("--out", common.out, "Output directory");

  // --- eval ---
  auto* ev = app.add_subcommand("eval", "Cost curve, AUCC, generalization");
  std::string ev_data, ev_model, ev_gt;
  std::string ev_split = "0.6,0.2,0.2";
  std::uint64_t ev_split_seed = 0;
  std::string ev_subset = "test";
  std::string ev_grid = "5:100:5";
  std::string ev_gen_grid;
  std::string ev_gen_prop = "constant";
  std::string ev_gen_mode = "ratio";
  double ev_alpha = 1.5;
  ev->add_option("--data", ev_data, "Dataset CSV")->required();
  ev->add_option("--model", ev_model, "model.json path")->required();
  ev->add_option("--groundtruth", ev_gt, "groundtruth.csv (oracle scoring)");
  ev->add_option("--split", ev_split, "train,val,test fractions");
  ev->add_option("--split-seed", ev_split_seed, "Split permutation seed");
  ev->add_option("--subset", ev_subset, "train|val|test|all");
  ev->add_option("--grid", ev_grid, "Cost-curve grid, lo:hi:step percent");
  ev->add_option("--gen-grid", ev_gen_grid,
                 "Generalization q grid (e.g. 15,20,30,40,60,80,100)");
  ev->add_option("--gen-propensity", ev_gen_prop, "constant|logistic");
  ev->add_option("--gen-mode", ev_gen_mode, "ratio|linear");
  ev->add_option("--alpha", ev_alpha, "Linear-mode cost weight");
  ev->add_option("--seed", common.seed, "Random seed");
  ev->add_option("--out", common.out, "Output directory");

  // --- simulate ---
  auto* simc = app.add_subcommand("simulate", "Explore/exploit cycles");
  Eigen::Index sim_n = 10000;
  int sim_d = 10;
  double sim_noise = 0.5;
  int sim_cycles = 1;
  double sim_explore = 0.2;
  double sim_pct = 0.4;
  double sim_budget = 0.0;
  double sim_treat = 0.5;
  std::vector<std::string> sim_models;
  simc->add_option("--n", sim_n, "Population size per cycle");
  simc->add_option("--d", sim_d, "Feature dimension");
  simc->add_option("--noise-sd", sim_noise, "Outcome noise std dev");
  simc->add_option("--cycles", sim_cycles, "Cycle count");
  simc->add_option("--explore-fraction", sim_explore, "Explore share");
  simc->add_option("--percentage", sim_pct, "Exploit percentage cutoff");
  simc->add_option("--budget", sim_budget,
                   "Exploit budget cutoff (overrides percentage)");
  simc->add_option("--exploit-treat-prob", sim_treat,
                   "Treatment probability inside exploit arms");
  simc->add_option("--models", sim_models,
                   "model.json paths or 'oracle'/'random'")
      ->delimiter(',');
  simc->add_option("--seed", common.seed, "Random seed");
  simc->add_option("--out", common.out, "Output directory");

  // --- compare ---
  auto* cmp = app.add_subcommand(
      "compare", "Train several models and tabulate test AUCC");
  std::string cmp_data, cmp_gt;
  Eigen::Index cmp_n = 20000;
  int cmp_d = 10;
  double cmp_noise = 0.5;
  std::vector<std::string> cmp_models = {"random", "rlearner", "duality",
                                         "drm", "constrained"};
  TrainFlags cmp_tf;
  cmp->add_option("--data", cmp_data, "Dataset CSV (omit to generate)");
  cmp->add_option("--groundtruth", cmp_gt, "groundtruth.csv for oracle");
  cmp->add_option("--n", cmp_n, "Synthetic sample count");
  cmp->add_option("--d", cmp_d, "Synthetic feature dimension");
  cmp->add_option("--noise-sd", cmp_noise, "Synthetic noise std dev");
  cmp->add_option("--models", cmp_models, "Model kinds to compare")
      ->delimiter(',');
  cmp->add_option("--iters", cmp_tf.iters, "Optimizer iterations");
  cmp->add_option("--lr", cmp_tf.lr, "Learning rate");
  cmp->add_option("--reg", cmp_tf.reg, "L2 / ridge weight");
  cmp->add_option("--percentage", cmp_tf.percentage,
                  "Constrained percentage target");
  cmp->add_option("--propensity", cmp_tf.propensity, "none|constant|logistic");
  cmp->add_option("--split", cmp_tf.split, "train,val,test fractions");
  cmp->add_option("--split-seed", cmp_tf.split_seed, "Split seed");
  cmp->add_option("--seed", common.seed, "Random seed");
  cmp->add_option("--out", common.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage or help text
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(common, gen_n, gen_d, gen_noise, gen_treat);
    }
    if (prep->parsed()) {
      return cmd_prep(common, prep_recipe, prep_raw, prep_manifest,
                      prep_subsample);
    }
    if (train->parsed()) {
      return cmd_train(common, tf);
    }
    if (ev->parsed()) {
      return cmd_eval(common, ev_data, ev_model, ev_gt, ev_split,
                      ev_split_seed, ev_subset, ev_grid, ev_gen_grid,
                      ev_gen_prop, ev_gen_mode, ev_alpha);
    }
    if (simc->parsed()) {
      return cmd_simulate(common, sim_n, sim_d, sim_noise, sim_cycles,
                          sim_explore, sim_pct, sim_budget, sim_treat,
                          sim_models);
    }
    if (cmp->parsed()) {
      return cmd_compare(common, cmp_data, cmp_gt, cmp_n, cmp_d, cmp_noise,
                         cmp_models, cmp_tf);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
