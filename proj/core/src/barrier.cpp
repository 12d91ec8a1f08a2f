#include "upliftrank/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "upliftrank/mathutil.hpp"

namespace uplift::barrier {

namespace {
constexpr double kTieOffset = 1e-12;
// All-pass threshold margin below min(p): wide enough that any temperature
// >= 10 saturates every weight, so renormalization cancels the barrier.
constexpr double kAllPassMargin = 2.0;
}

Constraint Constraint::make_percentage(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw InvalidConfigError("percentage constraint must lie in (0, 1]");
  }
  Constraint c;
  c.kind = Kind::kPercentage;
  c.percentage = p;
  return c;
}

Constraint Constraint::make_budget(double b) {
  if (!(b > 0.0)) {
    throw InvalidConfigError("budget constraint must be positive");
  }
  Constraint c;
  c.kind = Kind::kBudget;
  c.budget = b;
  return c;
}

void AnnealSchedule::validate() const {
  if (!(t0 > 0.0)) throw InvalidConfigError("starting temperature must be > 0");
  if (dt < 0.0) throw InvalidConfigError("temperature increment must be >= 0");
  if (every < 1) throw InvalidConfigError("anneal interval must be >= 1");
  if (t_max < t0) throw InvalidConfigError("temperature cap below start");
}

double AnnealSchedule::temperature_at(long step) const {
  const double t = t0 + dt * static_cast<double>(step / every);
  return std::min(t, t_max);
}

namespace {

// Indices sorted by value descending, original index ascending on ties.
std::vector<Eigen::Index> order_desc(const VectorXd& v) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  });
  return idx;
}

// Threshold passing the k highest entries of p. tie_passes controls which
// side of the threshold equal values at the cut land on.
double threshold_for_top_k(const VectorXd& p,
                           const std::vector<Eigen::Index>& desc,
                           Eigen::Index k, bool tie_passes) {
  const Eigen::Index n = p.size();
  if (k <= 0) return p[desc.front()] + kTieOffset;
  if (k >= n) return p[desc.back()] - kAllPassMargin;
  const double upper = p[desc[static_cast<std::size_t>(k - 1)]];
  const double lower = p[desc[static_cast<std::size_t>(k)]];
  if (upper > lower) return 0.5 * (upper + lower);
  return tie_passes ? upper - kTieOffset : upper + kTieOffset;
}

}  // namespace

double select_threshold_percentage(const VectorXd& p, double percentage) {
  if (!(percentage > 0.0 && percentage <= 1.0)) {
    throw InvalidConfigError("percentage must lie in (0, 1]");
  }
  if (p.size() == 0) throw InvalidConfigError("empty probability vector");
  const auto desc = order_desc(p);
  const auto k = static_cast<Eigen::Index>(
      std::llround(percentage * static_cast<double>(p.size())));
  return threshold_for_top_k(p, desc, k, /*tie_passes=*/true);
}

double select_threshold_budget(const VectorXd& p, const VectorXd& costs,
                               double budget, BudgetOrdering ordering) {
  if (!(budget > 0.0)) throw InvalidConfigError("budget must be positive");
  if (p.size() == 0) throw InvalidConfigError("empty probability vector");
  if (costs.size() != p.size()) {
    throw ShapeMismatchError("costs and probabilities disagree on length");
  }
  if ((costs.array() < 0.0).any()) {
    throw InvalidConfigError("budget thresholding requires nonnegative costs");
  }

  Eigen::Index k = 0;
  if (ordering == BudgetOrdering::kByProbability) {
    const auto desc = order_desc(p);
    double cum = 0.0;
    for (Eigen::Index i : desc) {
      if (cum + costs[i] > budget) break;
      cum += costs[i];
      ++k;
    }
    return threshold_for_top_k(p, desc, k, /*tie_passes=*/false);
  }
  // kByCost: the cheapest-first accumulation fixes how many users fit, the
  // threshold then passes that many by effectiveness.
  VectorXd neg = -costs;
  const auto by_cost = order_desc(neg);
  double cum = 0.0;
  for (Eigen::Index i : by_cost) {
    if (cum + costs[i] > budget) break;
    cum += costs[i];
    ++k;
  }
  return threshold_for_top_k(p, order_desc(p), k, /*tie_passes=*/false);
}

VectorXd barrier_weights(const VectorXd& p, double d_star,
                         double temperature) {
  if (!(temperature > 0.0)) {
    throw InvalidConfigError("barrier temperature must be positive");
  }
  VectorXd w(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    w[i] = sigmoid(temperature * (p[i] - d_star));
  }
  return w;
}

BarrierOutput apply_barrier(const drm::EffectivenessProbs& probs,
                            const VectorXd& costs, const Constraint& c,
                            double temperature, BudgetOrdering ordering) {
  BarrierOutput out;
  out.d_star = c.kind == Constraint::Kind::kPercentage
                   ? select_threshold_percentage(probs.p, c.percentage)
                   : select_threshold_budget(probs.p, costs, c.budget,
                                             ordering);
  out.weights = barrier_weights(probs.p, out.d_star, temperature);

  out.p_hat = probs.p.cwiseProduct(out.weights);
  double sums[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < out.p_hat.size(); ++i) {
    sums[probs.cohort[i]] += out.p_hat[i];
  }
  if (sums[0] <= 0.0 || sums[1] <= 0.0) {
    throw EmptyCohortError("barrier nullified an entire cohort");
  }
  for (Eigen::Index i = 0; i < out.p_hat.size(); ++i) {
    out.p_hat[i] /= sums[probs.cohort[i]];
  }
  return out;
}

ConstrainedObjective::ConstrainedObjective(const Dataset& ds,
                                           Constraint constraint,
                                           drm::ObjectiveSpec spec,
                                           BudgetOrdering ordering)
    : w_r_(ds.y_r()), w_c_(ds.y_c()), costs_(ds.y_c()), t_(ds.t()),
      constraint_(constraint), spec_(std::move(spec)), ordering_(ordering) {
  if (spec_.propensity) {
    const VectorXd f = spec_.propensity->ipw_factors(t_);
    w_r_ = w_r_.cwiseProduct(f);
    w_c_ = w_c_.cwiseProduct(f);
  }
}

nn::ScoreObjective::Eval ConstrainedObjective::evaluate(
    const VectorXd& scores, bool with_grad) const {
  const drm::EffectivenessProbs probs =
      drm::effectiveness_probs(scores, t_);
  const Eigen::Index n = scores.size();

  double d_star;
  if (fixed_threshold_) {
    d_star = *fixed_threshold_;
  } else {
    d_star = constraint_.kind == Constraint::Kind::kPercentage
                 ? select_threshold_percentage(probs.p, constraint_.percentage)
                 : select_threshold_budget(probs.p, costs_, constraint_.budget,
                                           ordering_);
  }

  const VectorXd w = barrier_weights(probs.p, d_star, temperature_);
  const VectorXd u = probs.p.cwiseProduct(w);
  double s_u[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) s_u[t_[i]] += u[i];
  if (s_u[0] <= 0.0 || s_u[1] <= 0.0) {
    throw EmptyCohortError("barrier nullified an entire cohort");
  }
  VectorXd p_hat(n);
  for (Eigen::Index i = 0; i < n; ++i) p_hat[i] = u[i] / s_u[t_[i]];

  double sr[2] = {0.0, 0.0};
  double sc[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    sr[t_[i]] += p_hat[i] * w_r_[i];
    sc[t_[i]] += p_hat[i] * w_c_[i];
  }
  const double tau_r = sr[1] - sr[0];
  const double tau_c = sc[1] - sc[0];
  const auto mp = drm::detail::mode_partials(spec_.mode, tau_r, tau_c,
                                             spec_.alpha, spec_.rectifier_eps);

  Eval out;
  out.value = mp.value;
  out.tau_r = tau_r;
  out.tau_c = tau_c;
  out.d_star = d_star;
  out.pass_fraction =
      static_cast<double>((probs.p.array() > d_star).count()) /
      static_cast<double>(n);

  if (with_grad) {
    // Chain rule through p_hat = p*w / sum(p*w), with d_star held constant.
    VectorXd g_hat(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sign = t_[i] == 1 ? 1.0 : -1.0;
      g_hat[i] = sign * (mp.d_tau_r * w_r_[i] + mp.d_tau_c * w_c_[i]);
    }
    double dot[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) dot[t_[i]] += g_hat[i] * p_hat[i];
    VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d_obj_du = (g_hat[i] - dot[t_[i]]) / s_u[t_[i]];
      const double du_dp =
          w[i] + probs.p[i] * temperature_ * w[i] * (1.0 - w[i]);
      q[i] = d_obj_du * du_dp;
    }
    double qdot[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) qdot[t_[i]] += q[i] * probs.p[i];
    out.score_grad = VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.score_grad[i] = probs.p[i] * (q[i] - qdot[t_[i]]);
    }
  }
  return out;
}

double constrained_objective(const nn::ScorerParams& params, const Dataset& ds,
                             const Constraint& c, double temperature,
                             double l2_reg) {
  ConstrainedObjective obj(ds, c);
  obj.set_temperature(temperature);
  const VectorXd scores = nn::forward(params, ds.x());
  const auto eval = obj.evaluate(scores, /*with_grad=*/false);
  const double value = eval.value - l2_reg * params.squared_norm();
  if (!std::isfinite(value)) throw NonFiniteError("objective is not finite");
  return value;
}

drm::TrainResult train_constrained(const Dataset& ds,
                                   const ConstrainedTrainConfig& cfg) {
  split_cohorts(ds);
  cfg.anneal.validate();
  std::vector<int> layers = cfg.base.layer_sizes;
  if (layers.empty()) layers = {static_cast<int>(ds.d()), 1};

  drm::TrainResult result;
  result.params = nn::init_params(layers, cfg.base.seed);
  nn::AdamState adam = nn::make_adam_state(result.params, cfg.base.lr,
                                           cfg.base.beta1, cfg.base.beta2);
  Rng rng(cfg.base.seed.seed ^ 0x9D2C5680AULL);

  // Full-batch default; with mini-batches the objective (and threshold) is
  // rebuilt on every batch.
  const Eigen::Index n = ds.n();
  const int batch_size = cfg.base.batch_size;
  std::vector<std::vector<Eigen::Index>> batches;
  auto refill = [&]() {
    batches.clear();
    if (batch_size <= 0 || batch_size >= n) {
      std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), Eigen::Index{0});
      batches.push_back(std::move(all));
    } else {
      const auto perm = rng.permutation(n);
      for (Eigen::Index start = 0; start < n; start += batch_size) {
        const Eigen::Index stop = std::min<Eigen::Index>(start + batch_size, n);
        batches.emplace_back(perm.begin() + start, perm.begin() + stop);
      }
    }
  };

  ConstrainedObjective full_obj(ds, cfg.constraint, cfg.base.objective,
                                cfg.ordering);
  result.trace.reserve(static_cast<std::size_t>(cfg.base.iterations));
  std::size_t cursor = 0;
  for (int iter = 0; iter < cfg.base.iterations; ++iter) {
    if (cursor >= batches.size()) {
      refill();
      cursor = 0;
    }
    const auto& batch = batches[cursor++];
    const bool full = static_cast<Eigen::Index>(batch.size()) == n;
    const double temperature = cfg.anneal.temperature_at(iter);

    nn::ValueAndGrad vg;
    if (full) {
      full_obj.set_temperature(temperature);
      vg = nn::value_and_gradient(result.params, ds.x(), full_obj,
                                  cfg.base.l2_reg);
    } else {
      const Dataset sub = ds.subset(batch);
      drm::ObjectiveSpec spec = cfg.base.objective;
      if (spec.propensity) spec.propensity = spec.propensity->restrict(batch);
      ConstrainedObjective obj(sub, cfg.constraint, spec, cfg.ordering);
      obj.set_temperature(temperature);
      vg = nn::value_and_gradient(result.params, sub.x(), obj,
                                  cfg.base.l2_reg);
    }
    nn::adam_step(adam, result.params, vg.grads);

    drm::TraceRow row;
    row.iteration = iter;
    row.objective = vg.value;
    row.tau_r = vg.detail.tau_r;
    row.tau_c = vg.detail.tau_c;
    row.temperature = temperature;
    row.d_star = vg.detail.d_star;
    row.pass_fraction = vg.detail.pass_fraction;
    result.trace.push_back(row);
  }
  return result;
}

}  // namespace uplift::barrier
