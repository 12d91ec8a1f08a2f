#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "upliftrank/drm.hpp"
#include "upliftrank/ingest.hpp"
#include "upliftrank/mathutil.hpp"

using namespace uplift;

namespace {

VectorXi tags(const std::vector<int>& t) {
  VectorXi v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = t[i];
  }
  return v;
}

VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(),
                                    static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST_CASE("effectiveness_probs on equal scores is uniform per cohort") {
  const auto probs =
      drm::effectiveness_probs(vec({0.0, 0.0, 1.0}), tags({1, 1, 0}));
  CHECK(probs.p[0] == doctest::Approx(0.5));
  CHECK(probs.p[1] == doctest::Approx(0.5));
  CHECK(probs.p[2] == doctest::Approx(1.0));
}

TEST_CASE("effectiveness_probs closed form for ln2 gap") {
  const auto probs = drm::effectiveness_probs(
      vec({std::log(2.0), 0.0, 0.3}), tags({1, 1, 0}));
  CHECK(probs.p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(probs.p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("effectiveness_probs requires both cohorts") {
  CHECK_THROWS_AS(drm::effectiveness_probs(vec({1.0, 2.0}), tags({1, 1})),
                  EmptyCohortError);
}

TEST_CASE("effectiveness_probs preserves ranking and normalization") {
  Rng rng(RngSeed{31});
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.bounded(40));
    VectorXd s(n);
    VectorXi t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = rng.normal() * 5.0;
      t[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    t[0] = 1;
    t[1] = 0;
    const auto probs = drm::effectiveness_probs(s, t);

    double sums[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(probs.p[i] > 0.0);
      sums[t[i]] += probs.p[i];
    }
    CHECK(std::abs(sums[0] - 1.0) < 1e-9);
    CHECK(std::abs(sums[1] - 1.0) < 1e-9);

    // argsort(p) == argsort(s) within each cohort
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (t[i] == t[j] && s[i] < s[j]) CHECK(probs.p[i] < probs.p[j]);
      }
    }
  }
}

TEST_CASE("effectiveness_probs is shift-invariant per cohort") {
  Rng rng(RngSeed{32});
  VectorXd s(8);
  VectorXi t(8);
  for (Eigen::Index i = 0; i < 8; ++i) {
    s[i] = rng.normal();
    t[i] = i % 2 == 0 ? 1 : 0;
  }
  const auto base = drm::effectiveness_probs(s, t);
  VectorXd shifted = s;
  for (Eigen::Index i = 0; i < 8; ++i) {
    shifted[i] += t[i] == 1 ? 7.5 : -2.25;
  }
  const auto moved = drm::effectiveness_probs(shifted, t);
  CHECK((base.p - moved.p).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("tau_hat with uniform probabilities is the cohort-mean gap") {
  const auto probs =
      drm::effectiveness_probs(vec({0, 0, 0, 0}), tags({1, 1, 0, 0}));
  CHECK(drm::tau_hat(probs, vec({2, 4, 1, 1}), tags({1, 1, 0, 0})) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("tau_hat of a constant outcome is zero") {
  const auto probs =
      drm::effectiveness_probs(vec({0.3, -1, 2, 0}), tags({1, 1, 0, 0}));
  CHECK(drm::tau_hat(probs, vec({5, 5, 5, 5}), tags({1, 1, 0, 0})) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("tau_hat at saturated scores picks the top pair") {
  // Score gap >= 20 concentrates the softmax on one user per cohort.
  const auto t = tags({1, 1, 0, 0});
  const auto probs =
      drm::effectiveness_probs(vec({20.0, 0.0, 25.0, 0.0}), t);
  const auto y = vec({7.0, -3.0, 2.5, 100.0});
  CHECK(drm::tau_hat(probs, y, t) == doctest::Approx(7.0 - 2.5).epsilon(1e-6));
}

TEST_CASE("drm_objective with uniform probabilities matches the softplus oracle") {
  // Treated means 3 / 2.3, control means 1 / 0.1 (the worked example row).
  MatrixXd x = MatrixXd::Zero(4, 2);
  const auto t = tags({1, 1, 0, 0});
  Dataset ds({}, x, t, vec({3, 3, 1, 1}), vec({2.3, 2.3, 0.1, 0.1}));
  auto p = nn::init_params({2, 1}, RngSeed{0});
  p.weights[0].setZero();  // uniform probabilities

  const double tau_r = 2.0;
  const double tau_c = 2.2;
  const double oracle = tau_r / (std::log1p(std::exp(tau_c)) + 1e-6);
  CHECK(drm::drm_objective(p, ds) == doctest::Approx(oracle).epsilon(1e-12));

  const auto est = drm::evaluate_taus(p, ds, {});
  CHECK(est.tau_r == doctest::Approx(tau_r).epsilon(1e-12));
  CHECK(est.tau_c == doctest::Approx(tau_c).epsilon(1e-12));
}

TEST_CASE("drm_objective is zero when values are flat") {
  MatrixXd x = MatrixXd::Random(6, 2);
  const auto t = tags({1, 1, 1, 0, 0, 0});
  Dataset ds({}, x, t, vec({4, 4, 4, 4, 4, 4}), vec({1, 2, 1, 0.5, 1, 2}));
  const auto p = nn::init_params({2, 1}, RngSeed{5});
  CHECK(drm::drm_objective(p, ds) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("l2 penalty strictly decreases the objective at saturation") {
  MatrixXd x(4, 1);
  x << 1, -1, 1, -1;
  const auto t = tags({1, 1, 0, 0});
  Dataset ds({}, x, t, vec({3, 1, 1, 0}), vec({1, 1, 1, 1}));
  auto small = nn::init_params({1, 1}, RngSeed{0});
  small.weights[0](0, 0) = 30.0;  // tanh fully saturated
  auto large = small;
  large.weights[0](0, 0) = 60.0;
  const double reg = 0.01;
  CHECK(drm::drm_objective(small, ds, reg) >
        drm::drm_objective(large, ds, reg));
  CHECK(drm::drm_objective(small, ds, 0.0) ==
        doctest::Approx(drm::drm_objective(large, ds, 0.0)).epsilon(1e-12));
}

TEST_CASE("propensity weights validate and clip") {
  const auto t = tags({1, 0, 1, 0});
  const auto w = drm::PropensityWeights::from_estimates(
      t, vec({0.999, 0.5, 0.001, 0.4}));
  CHECK(w.e_hat == 0.5);
  CHECK(w.e_x[0] == 0.99);
  CHECK(w.e_x[2] == 0.01);
}

TEST_CASE("tau_hat_propensity reduces to tau_hat at constant propensity") {
  Rng rng(RngSeed{41});
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.bounded(30));
    VectorXd s(n), y(n);
    VectorXi t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = rng.normal();
      y[i] = rng.normal() * 3.0;
      t[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    t[0] = 1;
    t[1] = 0;
    const auto probs = drm::effectiveness_probs(s, t);
    const auto w = drm::PropensityWeights::constant(t);
    CHECK(std::abs(drm::tau_hat_propensity(probs, y, t, w) -
                   drm::tau_hat(probs, y, t)) < 1e-12);
  }
}

TEST_CASE("tau_hat_propensity direct substitution") {
  const auto t = tags({1, 0});
  const auto probs = drm::effectiveness_probs(vec({0.0, 0.0}), t);
  const auto w = drm::PropensityWeights::from_estimates(t, vec({0.5, 0.5}));
  CHECK(drm::tau_hat_propensity(probs, vec({4.0, 0.0}), t, w) ==
        doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("tau_hat_propensity equals a term-by-term oracle") {
  Rng rng(RngSeed{42});
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.bounded(25));
    VectorXd s(n), y(n), e(n);
    VectorXi t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = rng.normal();
      y[i] = rng.normal() * 2.0;
      e[i] = rng.uniform(0.05, 0.95);
      t[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    t[0] = 1;
    t[1] = 0;
    const auto probs = drm::effectiveness_probs(s, t);
    const auto w = drm::PropensityWeights::from_estimates(t, e);

    // Independent re-implementation summing per-sample terms.
    double expected = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (t[i] == 1) {
        expected += w.e_hat / w.e_x[i] * y[i] * probs.p[i];
      } else {
        expected -= (1.0 - w.e_hat) / (1.0 - w.e_x[i]) * y[i] * probs.p[i];
      }
    }
    CHECK(drm::tau_hat_propensity(probs, y, t, w) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("drm_propensity_objective reductions") {
  Rng rng(RngSeed{43});
  const Dataset ds = test::random_dataset(rng, 24, 3);
  const auto p = nn::init_params({3, 1}, RngSeed{44});
  const auto w = drm::PropensityWeights::constant(ds.t());

  SUBCASE("constant propensity, ratio mode equals the plain objective") {
    CHECK(drm::drm_propensity_objective(p, ds, w) ==
          doctest::Approx(drm::drm_objective(p, ds)).epsilon(1e-9));
  }

  SUBCASE("linear mode with alpha 0 is the weighted value tau") {
    drm::ObjectiveSpec spec;
    spec.mode = drm::ObjectiveMode::kLinear;
    spec.alpha = 0.0;
    const auto probs =
        drm::effectiveness_probs(nn::forward(p, ds.x()), ds.t());
    CHECK(drm::drm_propensity_objective(p, ds, w, spec) ==
          doctest::Approx(drm::tau_hat_propensity(probs, ds.y_r(), ds.t(), w))
              .epsilon(1e-12));
  }

  SUBCASE("linear mode with alpha 1.5 equals two independent tau calls") {
    drm::ObjectiveSpec spec;
    spec.mode = drm::ObjectiveMode::kLinear;
    spec.alpha = 1.5;
    const auto probs =
        drm::effectiveness_probs(nn::forward(p, ds.x()), ds.t());
    const double tr = drm::tau_hat_propensity(probs, ds.y_r(), ds.t(), w);
    const double tc = drm::tau_hat_propensity(probs, ds.y_c(), ds.t(), w);
    CHECK(drm::drm_propensity_objective(p, ds, w, spec) ==
          doctest::Approx(tr - 1.5 * tc).epsilon(1e-12));
  }
}

TEST_CASE("drm objective gradients match finite differences") {
  Rng rng(RngSeed{45});
  for (int trial = 0; trial < 8; ++trial) {
    const int d = 2 + static_cast<int>(rng.bounded(5));
    const Dataset ds =
        test::random_dataset(rng, 6 + static_cast<Eigen::Index>(rng.bounded(30)), d);
    drm::ObjectiveSpec spec;
    if (trial % 3 == 1) {
      spec.mode = drm::ObjectiveMode::kLinear;
      spec.alpha = 1.5;
    } else if (trial % 3 == 2) {
      spec.mode = drm::ObjectiveMode::kDoubleRectified;
    }
    if (trial % 2 == 1) {
      VectorXd e(ds.n());
      for (Eigen::Index i = 0; i < ds.n(); ++i) e[i] = rng.uniform(0.1, 0.9);
      spec.propensity = drm::PropensityWeights::from_estimates(ds.t(), e);
    }
    const auto sizes = trial % 2 == 0 ? std::vector<int>{d, 1}
                                      : std::vector<int>{d, 4, 1};
    const auto p = nn::init_params(sizes, RngSeed{static_cast<std::uint64_t>(50 + trial)});
    const drm::DrmObjective obj(ds, spec);
    const auto vg = nn::value_and_gradient(p, ds.x(), obj);
    const auto fd = test::finite_difference_gradient(
        p, [&](const nn::ScorerParams& q) {
          return obj.evaluate(nn::forward(q, ds.x()), false).value;
        });
    CHECK(test::max_relative_error(test::flatten(vg.grads), fd) < 1e-4);
  }
}

TEST_CASE("train_drm with zero iterations returns the init") {
  Rng rng(RngSeed{60});
  const Dataset ds = test::random_dataset(rng, 20, 3);
  drm::TrainConfig cfg;
  cfg.iterations = 0;
  cfg.seed = RngSeed{61};
  const auto result = drm::train_drm(ds, cfg);
  const auto init = nn::init_params({3, 1}, RngSeed{61});
  CHECK(result.params.weights[0] == init.weights[0]);
  CHECK(result.trace.empty());
}

TEST_CASE("train_drm is deterministic") {
  Rng rng(RngSeed{62});
  const Dataset ds = test::random_dataset(rng, 40, 3);
  drm::TrainConfig cfg;
  cfg.iterations = 40;
  cfg.seed = RngSeed{63};
  const auto a = drm::train_drm(ds, cfg);
  const auto b = drm::train_drm(ds, cfg);
  CHECK(a.params.weights[0] == b.params.weights[0]);
  CHECK(a.params.biases[0] == b.params.biases[0]);
  REQUIRE(a.trace.size() == b.trace.size());
  CHECK(a.trace.back().objective == b.trace.back().objective);
}

TEST_CASE("mini-batch training runs deterministically") {
  auto gen = ingest::SyntheticConfig::defaults(300, 3);
  gen.noise_sd = 0.2;
  const auto [ds, gt] = ingest::generate_synthetic(gen, RngSeed{68});
  drm::TrainConfig cfg;
  cfg.iterations = 60;
  cfg.batch_size = 64;
  cfg.seed = RngSeed{69};
  const auto a = drm::train_drm(ds, cfg);
  const auto b = drm::train_drm(ds, cfg);
  CHECK(a.params.weights[0] == b.params.weights[0]);
  REQUIRE(a.trace.size() == 60);

  // A different batch size changes the trajectory.
  cfg.batch_size = 32;
  const auto c = drm::train_drm(ds, cfg);
  CHECK(a.params.weights[0] != c.params.weights[0]);
}

TEST_CASE("train_drm learns the sign structure of the ratio") {
  // The default generator's tau ratio increases in x_0, so trained scores
  // should rank positive-x_0 users above negative ones.
  auto cfg = ingest::SyntheticConfig::defaults(2000, 4);
  const auto [ds, gt] = ingest::generate_synthetic(cfg, RngSeed{64});
  drm::TrainConfig tc;
  tc.iterations = 300;
  tc.seed = RngSeed{65};
  const auto result = drm::train_drm(ds, tc);
  const VectorXd scores = nn::forward(result.params, ds.x());
  double mean_pos = 0.0, mean_neg = 0.0;
  int n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.x()(i, 0) > 0) {
      mean_pos += scores[i];
      ++n_pos;
    } else {
      mean_neg += scores[i];
      ++n_neg;
    }
  }
  REQUIRE(n_pos > 0);
  REQUIRE(n_neg > 0);
  CHECK(mean_pos / n_pos > mean_neg / n_neg);
}

TEST_CASE("training improves the objective across seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = ingest::SyntheticConfig::defaults(400, 3);
    cfg.noise_sd = 0.2;
    const auto [ds, gt] = ingest::generate_synthetic(cfg, RngSeed{seed});
    drm::TrainConfig tc;
    tc.iterations = 150;
    tc.seed = RngSeed{seed + 100};
    const auto result = drm::train_drm(ds, tc);
    const auto init = nn::init_params({3, 1}, tc.seed);
    CHECK(drm::drm_objective(result.params, ds) >=
          drm::drm_objective(init, ds));
  }
}

TEST_CASE("ranking is invariant under increasing transforms of scores") {
  Rng rng(RngSeed{66});
  const Dataset ds = test::random_dataset(rng, 30, 3);
  const auto p = nn::init_params({3, 1}, RngSeed{67});
  const VectorXd s = nn::forward(p, ds.x());
  const VectorXd warped = (3.0 * s).array().exp() + 2.0;
  std::vector<Eigen::Index> a(static_cast<std::size_t>(s.size()));
  std::vector<Eigen::Index> b(a.size());
  std::iota(a.begin(), a.end(), Eigen::Index{0});
  std::iota(b.begin(), b.end(), Eigen::Index{0});
  std::sort(a.begin(), a.end(),
            [&](Eigen::Index i, Eigen::Index j) { return s[i] > s[j]; });
  std::sort(b.begin(), b.end(), [&](Eigen::Index i, Eigen::Index j) {
    return warped[i] > warped[j];
  });
  CHECK(a == b);
}
