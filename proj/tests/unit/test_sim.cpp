#include <doctest.h>

#include <cmath>
#include <set>

#include "upliftrank/drm.hpp"
#include "upliftrank/eval.hpp"
#include "upliftrank/sim.hpp"

using namespace uplift;

namespace {

sim::CycleConfig base_config(Eigen::Index n, std::uint64_t seed) {
  sim::CycleConfig cfg;
  cfg.population_size = n;
  cfg.explore_fraction = 0.2;
  cfg.exploit_cutoff = barrier::Constraint::make_percentage(0.4);
  cfg.seed = RngSeed{seed};
  return cfg;
}

sim::ScorerHandle oracle_scorer(const ingest::SyntheticConfig& gen) {
  return {"oracle", [gen](const MatrixXd& x) {
            const auto gt = ingest::evaluate_ground_truth(gen, x);
            return VectorXd(gt.tau_r_true.array() /
                            gt.tau_c_true.array().max(1e-12));
          }};
}

}  // namespace

TEST_CASE("explore-only cycle logs exactly the explore sample") {
  const auto cfg = ingest::SyntheticConfig::defaults(1000, 3);
  const auto pop = sim::make_population(cfg, RngSeed{130});
  const auto log = sim::run_cycle(pop, cfg, {}, base_config(1000, 131));
  CHECK(log.ds.n() == 200);  // 0.2 * 1000, exact
  for (Eigen::Index i = 0; i < log.ds.n(); ++i) {
    CHECK(log.arm[static_cast<std::size_t>(i)] == "explore");
    CHECK(log.ds.strategy()[static_cast<std::size_t>(i)] ==
          Strategy::kExplore);
  }
}

TEST_CASE("arms are disjoint and every member appears once") {
  const auto cfg = ingest::SyntheticConfig::defaults(500, 3);
  const auto pop = sim::make_population(cfg, RngSeed{132});
  std::vector<sim::ScorerHandle> models;
  models.push_back({"m1", [](const MatrixXd& x) {
                      return VectorXd(x.col(0));
                    }});
  models.push_back({"m2", [](const MatrixXd& x) {
                      return VectorXd((-x.col(0)).eval());
                    }});
  const auto log = sim::run_cycle(pop, cfg, models, base_config(500, 133));

  std::set<std::string> seen;
  for (const auto& id : log.ds.ids()) {
    CHECK(seen.insert(id).second);
  }
  std::set<std::string> arms(log.arm.begin(), log.arm.end());
  CHECK(arms == std::set<std::string>{"explore", "m1", "m2"});
  // 100 explore + 160 (40% of 400) + 96 (40% of 240)
  CHECK(log.ds.n() == 100 + 160 + 96);
}

TEST_CASE("explore treatment is independent of features") {
  const auto cfg = ingest::SyntheticConfig::defaults(10000, 3);
  for (std::uint64_t seed : {140ull, 141ull, 142ull}) {
    const auto pop = sim::make_population(cfg, RngSeed{seed});
    auto cycle = base_config(10000, seed + 1);
    cycle.explore_fraction = 0.9;
    const auto log = sim::run_cycle(pop, cfg, {}, cycle);
    const Eigen::Index n = log.ds.n();
    const VectorXd t = log.ds.t().cast<double>();
    const double t_mean = t.mean();
    for (int j = 0; j < 3; ++j) {
      const VectorXd xj = log.ds.x().col(j);
      const double cov =
          ((xj.array() - xj.mean()) * (t.array() - t_mean)).mean();
      const double corr =
          cov / std::sqrt(xj.squaredNorm() / n - xj.mean() * xj.mean()) /
          std::sqrt(t_mean * (1.0 - t_mean));
      // |t-stat| ~ |corr| * sqrt(n) < 4
      CHECK(std::abs(corr) * std::sqrt(static_cast<double>(n)) < 4.0);
    }
  }
}

TEST_CASE("oracle arm beats explore on clean populations") {
  auto gen = ingest::SyntheticConfig::defaults(4000, 3);
  gen.noise_sd = 0.0;
  const auto pop = sim::make_population(gen, RngSeed{134});
  std::vector<sim::ScorerHandle> models = {oracle_scorer(gen)};
  auto cycle = base_config(4000, 135);
  const auto log = sim::run_cycle(pop, gen, models, cycle);
  const auto metrics = sim::evaluate_cycle(log);
  REQUIRE(metrics.count("oracle") == 1);
  REQUIRE(metrics.count("explore") == 1);
  CHECK(metrics.at("oracle").gain > 0.0);
  CHECK(metrics.at("explore").gain == 0.0);
}

TEST_CASE("zero cost effect makes the explore slope undefined") {
  auto gen = ingest::SyntheticConfig::defaults(200, 2);
  gen.noise_sd = 0.0;
  gen.tau_c.w.setZero();
  gen.tau_c.b = 0.0;
  gen.tau_c.form = ingest::TauForm::kLinear;  // tau_c identically zero
  gen.mu0_c.w.setZero();
  gen.mu0_c.b = 0.0;
  const auto pop = sim::make_population(gen, RngSeed{136});
  const auto log = sim::run_cycle(pop, gen, {}, base_config(200, 137));
  CHECK_THROWS_AS(sim::evaluate_cycle(log), UndefinedError);
}

TEST_CASE("budget cutoff spends within the budget on true costs") {
  auto gen = ingest::SyntheticConfig::defaults(600, 3);
  const auto pop = sim::make_population(gen, RngSeed{138});
  std::vector<sim::ScorerHandle> models;
  models.push_back({"m", [](const MatrixXd& x) {
                      return VectorXd(x.col(0));
                    }});
  auto cycle = base_config(600, 139);
  const double budget = 25.0;
  cycle.exploit_cutoff = barrier::Constraint::make_budget(budget);
  const auto log = sim::run_cycle(pop, gen, models, cycle);

  double spend = 0.0;
  for (Eigen::Index i = 0; i < log.ds.n(); ++i) {
    if (log.arm[static_cast<std::size_t>(i)] != "m") continue;
    const std::string& id = log.ds.ids()[static_cast<std::size_t>(i)];
    const auto pop_index = std::stol(id.substr(1));  // ids are "u<index>"
    spend += std::max(0.0, pop.gt.tau_c_true[pop_index]);
  }
  CHECK(spend <= budget + 1e-9);
}

TEST_CASE("retraining on explore data closes the loop") {
  auto gen = ingest::SyntheticConfig::defaults(3000, 3);
  gen.noise_sd = 0.1;
  const auto pop0 = sim::make_population(gen, RngSeed{150});
  const auto log0 = sim::run_cycle(pop0, gen, {}, base_config(3000, 151));

  // Train on the cycle-0 explore rows.
  drm::TrainConfig tc;
  tc.iterations = 200;
  tc.seed = RngSeed{152};
  const auto trained = drm::train_drm(log0.ds, tc);

  // Score the next cycle's population and compare with a random ranking.
  const auto pop1 = sim::make_population(gen, RngSeed{153});
  VectorXi t1(pop1.x.rows());
  Rng rng(RngSeed{154});
  for (Eigen::Index i = 0; i < t1.size(); ++i) {
    t1[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  VectorXd y_r, y_c;
  Rng outcome_rng(RngSeed{155});
  ingest::realize_outcomes(gen, pop1.x, t1, outcome_rng, &y_r, &y_c);
  const Dataset next({}, pop1.x, t1, y_r, y_c);

  const VectorXd model_scores = nn::forward(trained.params, next.x());
  VectorXd random_scores(next.n());
  for (Eigen::Index i = 0; i < next.n(); ++i) {
    random_scores[i] = rng.uniform01();
  }
  const double aucc_model = eval::aucc(eval::cost_curve(model_scores, next));
  const double aucc_random = eval::aucc(eval::cost_curve(random_scores, next));
  CHECK(aucc_model > aucc_random);
}

TEST_CASE("cycle config validation") {
  auto cfg = base_config(5, 1);
  CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
  cfg = base_config(100, 1);
  cfg.explore_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
}
