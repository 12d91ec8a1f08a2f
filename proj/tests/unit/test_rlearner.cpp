#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "helpers.hpp"
#include "upliftrank/ingest.hpp"
#include "upliftrank/rlearner.hpp"

#include <nlohmann/json.hpp>

using namespace uplift;

namespace {

// Exhaustive search over 2^n selections: the independent optimum oracle.
struct BruteForceResult {
  double best_return = -std::numeric_limits<double>::infinity();
  double best_spend = 0.0;
};

BruteForceResult brute_force_budget(const VectorXd& tau_r,
                                    const VectorXd& tau_c, double budget) {
  const int n = static_cast<int>(tau_r.size());
  BruteForceResult best;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double ret = 0.0, spend = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        ret += tau_r[i];
        spend += tau_c[i];
      }
    }
    if (spend <= budget && ret > best.best_return) {
      best.best_return = ret;
      best.best_spend = spend;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("ridge recovers an exact linear relationship") {
  Rng rng(RngSeed{90});
  MatrixXd x(50, 4);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
  }
  VectorXd w_true(4);
  w_true << 1.5, -2.0, 0.25, 3.0;
  const VectorXd y = (x * w_true).array() + 0.7;
  const auto m = rlearner::fit_ridge(x, y, 0.0);
  const VectorXd resid = y - m.predict(x);
  CHECK(resid.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(m.intercept == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("ridge closed form for mean-zero orthonormal columns") {
  // With X'X = I and centered columns, w_j = (X'(y - mean(y)))_j / (1 + r).
  MatrixXd x(4, 2);
  const double s = 1.0 / std::sqrt(2.0);
  x << s, 0, -s, 0, 0, s, 0, -s;
  VectorXd y(4);
  y << 2.0, 1.0, 5.0, -1.0;
  const double r = 0.3;
  const auto m = rlearner::fit_ridge(x, y, r);
  const VectorXd expected = (x.transpose() * (y.array() - y.mean()).matrix()) /
                            (1.0 + r);
  CHECK((m.weights - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ridge on constant outcome returns the constant") {
  MatrixXd x = MatrixXd::Random(20, 3);
  const auto m = rlearner::fit_ridge(x, VectorXd::Constant(20, 4.2), 0.0);
  CHECK(m.weights.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(m.intercept == doctest::Approx(4.2));
}

TEST_CASE("ridge rejects rank-deficient designs at zero regularization") {
  MatrixXd x(10, 3);
  Rng rng(RngSeed{91});
  for (Eigen::Index i = 0; i < 10; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = 2.0 * x(i, 0);  // collinear
    x(i, 2) = rng.normal();
  }
  VectorXd y(10);
  for (Eigen::Index i = 0; i < 10; ++i) y[i] = rng.normal();
  CHECK_THROWS_AS(rlearner::fit_ridge(x, y, 0.0), SingularSystemError);
  CHECK_NOTHROW(rlearner::fit_ridge(x, y, 1e-6));
}

TEST_CASE("logistic propensity is near 0.5 for unconfounded treatment") {
  Rng rng(RngSeed{92});
  const Eigen::Index n = 4000;
  MatrixXd x(n, 3);
  VectorXi t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    t[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  const auto m = rlearner::fit_propensity(x, t);
  const VectorXd e = m.predict(x);
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (e[i] > 0.45 && e[i] < 0.55) ++inside;
  }
  CHECK(static_cast<double>(inside) / static_cast<double>(n) > 0.95);
}

TEST_CASE("extreme predictions are clipped at the propensity bounds") {
  rlearner::PropensityModel m;
  m.kind = rlearner::PropensityModel::Kind::kLogistic;
  m.weights = VectorXd::Constant(1, 10.0);
  m.intercept = 0.0;
  MatrixXd x(3, 1);
  x << -5.0, 0.0, 5.0;
  const VectorXd e = m.predict(x);
  CHECK(e[0] == 0.01);
  CHECK(e[1] == 0.5);
  CHECK(e[2] == 0.99);
}

TEST_CASE("separable data drives the fitted propensity to the extremes") {
  // 500 mean-gradient steps at lr 0.1 separate the clusters strongly but do
  // not reach the clip bounds; the bounds themselves are a predict contract.
  MatrixXd x(40, 1);
  VectorXi t(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = i < 20 ? -3.0 + 0.01 * static_cast<double>(i)
                     : 3.0 + 0.01 * static_cast<double>(i);
    t[i] = i < 20 ? 0 : 1;
  }
  const auto m = rlearner::fit_propensity(x, t);
  const VectorXd e = m.predict(x);
  CHECK(e.minCoeff() < 0.05);
  CHECK(e.maxCoeff() > 0.95);
  CHECK(e.minCoeff() >= 0.01);
  CHECK(e.maxCoeff() <= 0.99);
}

TEST_CASE("constant propensity is the treated fraction") {
  VectorXi t(4);
  t << 1, 1, 0, 0;
  const auto m = rlearner::fit_propensity_constant(t);
  CHECK(m.e_hat == 0.5);
  CHECK(m.predict(MatrixXd::Zero(3, 2)) == VectorXd::Constant(3, 0.5));
}

TEST_CASE("rlearner identifies a constant effect exactly") {
  // Paired design: every feature row appears once treated and once as
  // control, so the fitted outcome mean and propensity are exact and the
  // two-step decomposition recovers the constant effect to solver precision.
  Rng rng(RngSeed{93});
  const Eigen::Index pairs = 200;
  MatrixXd x(2 * pairs, 3);
  VectorXi t(2 * pairs);
  VectorXd yr(2 * pairs);
  for (Eigen::Index k = 0; k < pairs; ++k) {
    VectorXd row(3);
    for (int j = 0; j < 3; ++j) row[j] = rng.normal();
    x.row(2 * k) = row.transpose();
    x.row(2 * k + 1) = row.transpose();
    t[2 * k] = 1;
    t[2 * k + 1] = 0;
    yr[2 * k] = 2.0;   // mu0 = 0, tau = 2
    yr[2 * k + 1] = 0.0;
  }
  const Dataset ds({}, x, t, yr, VectorXd::Zero(2 * pairs));
  const auto prop = rlearner::fit_propensity_constant(ds.t());
  const auto tau = rlearner::rlearner_fit(ds, {}, prop);
  const VectorXd pred = tau.predict(ds.x());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    CHECK(pred[i] == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("rlearner recovers linear effect coefficients") {
  ingest::SyntheticConfig cfg = ingest::SyntheticConfig::defaults(5000, 5);
  cfg.noise_sd = 0.1;
  cfg.tau_r.w = VectorXd::Zero(5);
  cfg.tau_r.w << 1.0, -0.5, 0.25, 0.0, 2.0;
  cfg.tau_r.b = 0.5;
  cfg.tau_r.form = ingest::TauForm::kLinear;
  const auto [ds, gt] = ingest::generate_synthetic(cfg, RngSeed{94});
  const auto prop = rlearner::fit_propensity_constant(ds.t());
  const auto tau = rlearner::rlearner_fit(ds, {}, prop);
  const double cosine = tau.weights.dot(cfg.tau_r.w) /
                        (tau.weights.norm() * cfg.tau_r.w.norm());
  CHECK(cosine > 0.99);
}

TEST_CASE("combined outcome with lambda 0 equals the value model") {
  Rng rng(RngSeed{95});
  const Dataset ds = test::random_dataset(rng, 60, 3);
  const auto prop = rlearner::fit_propensity_constant(ds.t());
  rlearner::RLearnerOptions value_opt;
  rlearner::RLearnerOptions combined_opt;
  combined_opt.outcome = rlearner::Outcome::kCombined;
  combined_opt.lambda = 0.0;
  const auto a = rlearner::rlearner_fit(ds, value_opt, prop);
  const auto b = rlearner::rlearner_fit(ds, combined_opt, prop);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-12));
}

TEST_CASE("combined model is linear in lambda") {
  Rng rng(RngSeed{96});
  const Dataset ds = test::random_dataset(rng, 80, 4);
  const auto prop = rlearner::fit_propensity_constant(ds.t());
  const double lambda = 0.7;

  rlearner::RLearnerOptions value_opt;
  rlearner::RLearnerOptions cost_opt;
  cost_opt.outcome = rlearner::Outcome::kCost;
  rlearner::RLearnerOptions combined_opt;
  combined_opt.outcome = rlearner::Outcome::kCombined;
  combined_opt.lambda = lambda;

  const auto value_model = rlearner::rlearner_fit(ds, value_opt, prop);
  const auto cost_model = rlearner::rlearner_fit(ds, cost_opt, prop);
  const auto combined = rlearner::rlearner_fit(ds, combined_opt, prop);

  const VectorXd direct = combined.predict(ds.x());
  const VectorXd composed =
      value_model.predict(ds.x()) - lambda * cost_model.predict(ds.x());
  CHECK((direct - composed).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("duality with slack budget selects all positive returns") {
  VectorXd tau_r(4), tau_c(4);
  tau_r << 3.0, -1.0, 0.5, 2.0;
  tau_c << 1.0, 1.0, 1.0, 1.0;
  const auto sol = rlearner::duality_solve(tau_r, tau_c, 100.0);
  CHECK(sol.converged);
  CHECK(sol.lambda == 0.0);
  CHECK(sol.z[0] == 1.0);
  CHECK(sol.z[1] == 0.0);
  CHECK(sol.z[2] == 1.0);
  CHECK(sol.z[3] == 1.0);
  // Complementary slackness: lambda * (spend - B) == 0.
  CHECK(sol.lambda * (sol.spend - 100.0) == 0.0);
}

TEST_CASE("two-user duality equilibrium") {
  VectorXd tau_r(2), tau_c(2);
  tau_r << 3.0, 1.0;
  tau_c << 2.0, 2.0;
  const auto sol = rlearner::duality_solve(tau_r, tau_c, 2.0);
  CHECK(sol.z[0] == 1.0);
  CHECK(sol.z[1] == 0.0);
  CHECK(sol.spend == doctest::Approx(2.0));
  CHECK(sol.lambda > 0.5);
  CHECK(sol.lambda <= 1.5);
}

TEST_CASE("duality matches brute force on small instances") {
  Rng rng(RngSeed{97});
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4 + static_cast<int>(rng.bounded(9));  // n <= 12
    VectorXd tau_r(n), tau_c(n);
    for (int i = 0; i < n; ++i) {
      tau_r[i] = rng.normal() * 2.0;
      tau_c[i] = rng.uniform(0.05, 2.0);
    }
    const double budget = rng.uniform(0.5, 4.0);
    const auto sol =
        rlearner::duality_solve(tau_r, tau_c, budget, 0.005, 2000000);
    const auto best = brute_force_budget(tau_r, tau_c, budget);

    const double got = tau_r.dot(sol.z);
    CHECK(sol.spend <= budget + 1e-9);
    // Within one marginal user of the enumerated optimum.
    const double slack = tau_r.cwiseAbs().maxCoeff();
    CHECK(got >= best.best_return - slack - 1e-9);

    // Bang-bang optimality at the final lambda: 1[s >= 0] maximizes
    // sum z_i s_i over every corner of [0,1]^n.
    const double rule_value = sol.s.cwiseMax(0.0).sum();
    double corner_best = -std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      double v = 0.0;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) v += sol.s[i];
      }
      corner_best = std::max(corner_best, v);
    }
    CHECK(rule_value == doctest::Approx(corner_best).epsilon(1e-12));
  }
}

TEST_CASE("duality score behaviors") {
  rlearner::RidgeModel mr;
  mr.weights = VectorXd::Ones(2);
  mr.intercept = 0.5;
  rlearner::RidgeModel mc = mr;
  const MatrixXd x = MatrixXd::Random(10, 2);

  SUBCASE("lambda 0 returns the value predictions") {
    CHECK(rlearner::duality_score(mr, mc, 0.0, x) == mr.predict(x));
  }
  SUBCASE("identical models at lambda 1 cancel") {
    const VectorXd s = rlearner::duality_score(mr, mc, 1.0, x);
    CHECK(s.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("ordering is invariant to constant shifts of tau_r") {
    rlearner::RidgeModel shifted = mr;
    shifted.intercept += 17.0;
    const VectorXd a = rlearner::duality_score(mr, mc, 0.3, x);
    const VectorXd b = rlearner::duality_score(shifted, mc, 0.3, x);
    std::vector<Eigen::Index> oa(10), ob(10);
    std::iota(oa.begin(), oa.end(), Eigen::Index{0});
    std::iota(ob.begin(), ob.end(), Eigen::Index{0});
    std::sort(oa.begin(), oa.end(),
              [&](Eigen::Index i, Eigen::Index j) { return a[i] > a[j]; });
    std::sort(ob.begin(), ob.end(),
              [&](Eigen::Index i, Eigen::Index j) { return b[i] > b[j]; });
    CHECK(oa == ob);
  }
  SUBCASE("negative lambda is rejected") {
    CHECK_THROWS_AS(rlearner::duality_score(mr, mc, -0.1, x),
                    InvalidConfigError);
  }
}

TEST_CASE("lambda grid contains the published default values") {
  const auto grid = rlearner::default_lambda_grid();
  REQUIRE(grid.size() == 6);
  CHECK(grid[0] == 0.001);
  CHECK(grid[3] == 0.05);
  CHECK(grid[5] == 0.5);
}

TEST_CASE("select_lambda returns a grid member") {
  ingest::SyntheticConfig cfg = ingest::SyntheticConfig::defaults(800, 3);
  cfg.noise_sd = 0.2;
  const auto [ds, gt] = ingest::generate_synthetic(cfg, RngSeed{98});
  const auto prop = rlearner::fit_propensity_constant(ds.t());
  rlearner::RLearnerOptions cost_opt;
  cost_opt.outcome = rlearner::Outcome::kCost;
  const auto mr = rlearner::rlearner_fit(ds, {}, prop);
  const auto mc = rlearner::rlearner_fit(ds, cost_opt, prop);
  const double lambda = rlearner::select_lambda(mr, mc, ds);
  const auto grid = rlearner::default_lambda_grid();
  CHECK(std::find(grid.begin(), grid.end(), lambda) != grid.end());
}

TEST_CASE("model json round trips") {
  rlearner::DualityModel m;
  m.tau_r.weights = VectorXd::Random(3);
  m.tau_r.intercept = 0.25;
  m.tau_c.weights = VectorXd::Random(3);
  m.tau_c.intercept = -1.0;
  m.lambda = 0.05;
  const auto j = rlearner::duality_to_json(m);
  CHECK(j.at("kind") == "duality");
  const auto back = rlearner::duality_from_json(j);
  CHECK(back.lambda == 0.05);
  CHECK((back.tau_r.weights - m.tau_r.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.tau_c.intercept == m.tau_c.intercept);

  rlearner::PropensityModel pm;
  pm.kind = rlearner::PropensityModel::Kind::kLogistic;
  pm.e_hat = 0.4;
  pm.weights = VectorXd::Random(2);
  pm.intercept = 0.1;
  const auto pj = rlearner::propensity_to_json(pm);
  const auto pback = rlearner::propensity_from_json(pj);
  CHECK(pback.kind == rlearner::PropensityModel::Kind::kLogistic);
  CHECK(pback.intercept == pm.intercept);
}
