#include "upliftrank/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "upliftrank/eval.hpp"

namespace uplift::sim {

void CycleConfig::validate() const {
  if (population_size < 10) {
    throw InvalidConfigError("population size must be >= 10");
  }
  if (!(explore_fraction > 0.0 && explore_fraction < 1.0)) {
    throw InvalidConfigError("explore fraction must lie in (0, 1)");
  }
  for (double p : {treat_prob_explore, exploit_treat_prob}) {
    if (!(p > 0.0 && p < 1.0)) {
      throw InvalidConfigError("treatment probabilities must lie in (0, 1)");
    }
  }
}

Population make_population(const ingest::SyntheticConfig& cfg, RngSeed seed) {
  cfg.validate();
  Rng rng(seed);
  Population pop;
  pop.x = ingest::draw_features(cfg.n, cfg.d, rng);
  pop.gt = ingest::evaluate_ground_truth(cfg, pop.x);
  return pop;
}

namespace {

// Rows selected for one arm, in selection order.
struct ArmRows {
  std::string label;
  Strategy strategy;
  std::vector<Eigen::Index> members;
};

std::vector<Eigen::Index> select_exploit(
    const std::vector<Eigen::Index>& pool, const VectorXd& scores,
    const ingest::GroundTruth& gt, const barrier::Constraint& cutoff) {
  // scores[k] corresponds to pool[k]
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[static_cast<Eigen::Index>(a)] !=
        scores[static_cast<Eigen::Index>(b)]) {
      return scores[static_cast<Eigen::Index>(a)] >
             scores[static_cast<Eigen::Index>(b)];
    }
    return pool[a] < pool[b];
  });

  std::vector<Eigen::Index> selected;
  if (cutoff.kind == barrier::Constraint::Kind::kPercentage) {
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(
            cutoff.percentage * static_cast<double>(pool.size()))),
        0, pool.size());
    for (std::size_t j = 0; j < k; ++j) selected.push_back(pool[order[j]]);
  } else {
    double cum = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
      const Eigen::Index i = pool[order[j]];
      const double cost = std::max(0.0, gt.tau_c_true[i]);
      if (cum + cost > cutoff.budget) break;
      cum += cost;
      selected.push_back(i);
    }
  }
  return selected;
}

}  // namespace

ExperimentLog run_cycle(const Population& pop,
                        const ingest::SyntheticConfig& outcome_model,
                        const std::vector<ScorerHandle>& models,
                        const CycleConfig& cfg) {
  cfg.validate();
  outcome_model.validate();
  const Eigen::Index n = pop.x.rows();
  if (n != cfg.population_size) {
    throw ShapeMismatchError("population size does not match config");
  }
  Rng rng(cfg.seed);

  const auto perm = rng.permutation(n);
  const auto n_explore = static_cast<Eigen::Index>(std::llround(
      cfg.explore_fraction * static_cast<double>(n)));

  std::vector<ArmRows> arms;
  arms.push_back({"explore", Strategy::kExplore,
                  {perm.begin(), perm.begin() + n_explore}});

  // Exploit arms draw from the remaining pool, one model at a time.
  std::vector<Eigen::Index> pool(perm.begin() + n_explore, perm.end());
  std::sort(pool.begin(), pool.end());
  for (const ScorerHandle& model : models) {
    MatrixXd pool_x(static_cast<Eigen::Index>(pool.size()), pop.x.cols());
    for (std::size_t k = 0; k < pool.size(); ++k) {
      pool_x.row(static_cast<Eigen::Index>(k)) = pop.x.row(pool[k]);
    }
    const VectorXd scores = model.score(pool_x);
    if (scores.size() != pool_x.rows()) {
      throw ShapeMismatchError("model '" + model.id +
                               "' returned wrong score count");
    }
    const auto selected =
        select_exploit(pool, scores, pop.gt, cfg.exploit_cutoff);
    arms.push_back({model.id, Strategy::kExploit, selected});
    std::vector<Eigen::Index> rest;
    rest.reserve(pool.size() - selected.size());
    std::vector<Eigen::Index> sorted_sel = selected;
    std::sort(sorted_sel.begin(), sorted_sel.end());
    std::set_difference(pool.begin(), pool.end(), sorted_sel.begin(),
                        sorted_sel.end(), std::back_inserter(rest));
    pool = std::move(rest);
  }

  // Assign treatment per arm, then realize outcomes in one pass.
  std::vector<Eigen::Index> members;
  std::vector<std::string> arm_labels;
  std::vector<Strategy> strategies;
  std::vector<int> treat;
  for (const ArmRows& arm : arms) {
    const double p = arm.strategy == Strategy::kExplore
                         ? cfg.treat_prob_explore
                         : cfg.exploit_treat_prob;
    for (Eigen::Index i : arm.members) {
      members.push_back(i);
      arm_labels.push_back(arm.label);
      strategies.push_back(arm.strategy);
      treat.push_back(rng.bernoulli(p) ? 1 : 0);
    }
  }

  const auto m = static_cast<Eigen::Index>(members.size());
  MatrixXd x(m, pop.x.cols());
  VectorXi t(m);
  std::vector<std::string> ids;
  ids.reserve(members.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    x.row(k) = pop.x.row(members[static_cast<std::size_t>(k)]);
    t[k] = treat[static_cast<std::size_t>(k)];
    ids.push_back("u" + std::to_string(members[static_cast<std::size_t>(k)]));
  }
  VectorXd y_r, y_c;
  ingest::realize_outcomes(outcome_model, x, t, rng, &y_r, &y_c);

  ExperimentLog log;
  log.ds = Dataset(std::move(ids), std::move(x), std::move(t), std::move(y_r),
                   std::move(y_c), std::move(strategies), "simulated cycle");
  log.arm = std::move(arm_labels);
  return log;
}

std::map<std::string, ArmMetrics> evaluate_cycle(const ExperimentLog& log) {
  std::map<std::string, std::vector<Eigen::Index>> rows_by_arm;
  for (Eigen::Index i = 0; i < log.ds.n(); ++i) {
    rows_by_arm[log.arm[static_cast<std::size_t>(i)]].push_back(i);
  }
  const auto explore_it = rows_by_arm.find("explore");
  if (explore_it == rows_by_arm.end()) {
    throw InvalidConfigError("log has no explore arm");
  }
  const double r_explore = eval::slope_r(log.ds.subset(explore_it->second));

  std::map<std::string, ArmMetrics> metrics;
  for (const auto& [arm, rows] : rows_by_arm) {
    ArmMetrics m;
    m.r = arm == "explore" ? r_explore : eval::slope_r(log.ds.subset(rows));
    m.gain =
        arm == "explore" ? 0.0 : eval::efficiency_gain(m.r, r_explore);
    metrics.emplace(arm, m);
  }
  return metrics;
}

void write_log_csv(const std::vector<ExperimentLog>& logs,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  if (logs.empty()) throw InvalidConfigError("no logs to write");
  const Eigen::Index d = logs.front().ds.d();
  out << "id,strategy,t,y_r,y_c";
  for (Eigen::Index j = 0; j < d; ++j) out << ",f" << j;
  out << ",cycle,arm\n";
  char buf[64];
  for (const ExperimentLog& log : logs) {
    for (Eigen::Index i = 0; i < log.ds.n(); ++i) {
      out << log.ds.ids()[static_cast<std::size_t>(i)] << ','
          << to_string(log.ds.strategy()[static_cast<std::size_t>(i)]) << ','
          << log.ds.t()[i];
      std::snprintf(buf, sizeof(buf), ",%.12g", log.ds.y_r()[i]);
      out << buf;
      std::snprintf(buf, sizeof(buf), ",%.12g", log.ds.y_c()[i]);
      out << buf;
      for (Eigen::Index j = 0; j < d; ++j) {
        std::snprintf(buf, sizeof(buf), ",%.12g", log.ds.x()(i, j));
        out << buf;
      }
      out << ',' << log.cycle << ',' << log.arm[static_cast<std::size_t>(i)]
          << "\n";
    }
  }
}

}  // namespace uplift::sim
