#include "upliftrank/drm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "upliftrank/mathutil.hpp"

namespace uplift::drm {

EffectivenessProbs effectiveness_probs(const VectorXd& scores,
                                       const VectorXi& t) {
  if (scores.size() != t.size()) {
    throw ShapeMismatchError("scores and treatment indicators disagree");
  }
  const auto [treated, control] = split_cohorts(t);

  EffectivenessProbs out;
  out.p = VectorXd::Zero(scores.size());
  out.cohort = t;
  for (const auto* cohort : {&treated, &control}) {
    double max_s = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i : *cohort) max_s = std::max(max_s, scores[i]);
    double z = 0.0;
    for (Eigen::Index i : *cohort) {
      out.p[i] = std::exp(scores[i] - max_s);
      z += out.p[i];
    }
    for (Eigen::Index i : *cohort) out.p[i] /= z;
  }
  return out;
}

double tau_hat(const EffectivenessProbs& probs, const VectorXd& y,
               const VectorXi& t) {
  if (y.size() != t.size() || probs.p.size() != t.size()) {
    throw ShapeMismatchError("tau_hat inputs disagree on length");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    acc += (t[i] == 1 ? 1.0 : -1.0) * probs.p[i] * y[i];
  }
  return acc;
}

namespace {
constexpr double kPropensityClipLo = 0.01;
constexpr double kPropensityClipHi = 0.99;
}  // namespace

PropensityWeights PropensityWeights::constant(const VectorXi& t) {
  split_cohorts(t);  // both cohorts must exist for e_hat in (0,1)
  PropensityWeights w;
  w.e_hat = static_cast<double>(t.sum()) / static_cast<double>(t.size());
  w.e_x = VectorXd::Constant(t.size(), w.e_hat);
  return w;
}

PropensityWeights PropensityWeights::from_estimates(const VectorXi& t,
                                                    const VectorXd& estimates) {
  if (estimates.size() != t.size()) {
    throw ShapeMismatchError("propensity estimates have wrong length");
  }
  split_cohorts(t);
  PropensityWeights w;
  w.e_hat = static_cast<double>(t.sum()) / static_cast<double>(t.size());
  w.e_x = estimates;
  for (Eigen::Index i = 0; i < w.e_x.size(); ++i) {
    w.e_x[i] = clamp01(w.e_x[i], kPropensityClipLo, kPropensityClipHi);
  }
  return w;
}

VectorXd PropensityWeights::ipw_factors(const VectorXi& t) const {
  if (t.size() != e_x.size()) {
    throw ShapeMismatchError("ipw_factors: treatment vector has wrong length");
  }
  VectorXd f(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    f[i] = t[i] == 1 ? e_hat / e_x[i] : (1.0 - e_hat) / (1.0 - e_x[i]);
  }
  return f;
}

PropensityWeights PropensityWeights::restrict(
    const std::vector<Eigen::Index>& rows) const {
  PropensityWeights w;
  w.e_hat = e_hat;
  w.e_x = VectorXd(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    w.e_x[static_cast<Eigen::Index>(k)] = e_x[rows[k]];
  }
  return w;
}

double tau_hat_propensity(const EffectivenessProbs& probs, const VectorXd& y,
                          const VectorXi& t, const PropensityWeights& w) {
  const VectorXd f = w.ipw_factors(t);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    acc += (t[i] == 1 ? 1.0 : -1.0) * f[i] * probs.p[i] * y[i];
  }
  return acc;
}

namespace detail {

ModePartials mode_partials(ObjectiveMode mode, double tau_r, double tau_c,
                           double alpha, double rectifier_eps) {
  switch (mode) {
    case ObjectiveMode::kRatio: {
      const double g = softplus(tau_c) + rectifier_eps;
      const double value = tau_r / g;
      return {value, 1.0 / g, -tau_r * sigmoid(tau_c) / (g * g)};
    }
    case ObjectiveMode::kLinear:
      return {tau_r - alpha * tau_c, 1.0, -alpha};
    case ObjectiveMode::kDoubleRectified: {
      const double gr = softplus(tau_r) + rectifier_eps;
      const double gc = softplus(tau_c) + rectifier_eps;
      return {gr / gc, sigmoid(tau_r) / gc,
              -gr * sigmoid(tau_c) / (gc * gc)};
    }
  }
  throw InvalidConfigError("unknown objective mode");
}

}  // namespace detail

DrmObjective::DrmObjective(const Dataset& ds, ObjectiveSpec spec)
    : DrmObjective(ds.y_r(), ds.y_c(), ds.t(), std::move(spec)) {}

DrmObjective::DrmObjective(VectorXd y_r, VectorXd y_c, VectorXi t,
                           ObjectiveSpec spec)
    : w_r_(std::move(y_r)), w_c_(std::move(y_c)), t_(std::move(t)),
      spec_(std::move(spec)) {
  if (w_r_.size() != t_.size() || w_c_.size() != t_.size()) {
    throw ShapeMismatchError("outcomes and treatment indicators disagree");
  }
  if (spec_.propensity) {
    const VectorXd f = spec_.propensity->ipw_factors(t_);
    w_r_ = w_r_.cwiseProduct(f);
    w_c_ = w_c_.cwiseProduct(f);
  }
}

nn::ScoreObjective::Eval DrmObjective::evaluate(const VectorXd& scores,
                                                bool with_grad) const {
  const EffectivenessProbs probs = effectiveness_probs(scores, t_);

  // Probability-weighted sums per cohort; tau is the treated-control gap.
  double sr[2] = {0.0, 0.0};  // index by cohort tag
  double sc[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < t_.size(); ++i) {
    sr[t_[i]] += probs.p[i] * w_r_[i];
    sc[t_[i]] += probs.p[i] * w_c_[i];
  }
  const double tau_r = sr[1] - sr[0];
  const double tau_c = sc[1] - sc[0];

  const auto mp = detail::mode_partials(spec_.mode, tau_r, tau_c, spec_.alpha,
                                        spec_.rectifier_eps);

  Eval out;
  out.value = mp.value;
  out.tau_r = tau_r;
  out.tau_c = tau_c;
  if (with_grad) {
    out.score_grad = VectorXd(t_.size());
    for (Eigen::Index i = 0; i < t_.size(); ++i) {
      const int c = t_[i];
      const double sign = c == 1 ? 1.0 : -1.0;
      out.score_grad[i] =
          sign * probs.p[i] *
          (mp.d_tau_r * (w_r_[i] - sr[c]) + mp.d_tau_c * (w_c_[i] - sc[c]));
    }
  }
  return out;
}

double drm_objective(const nn::ScorerParams& params, const Dataset& ds,
                     double l2_reg, double rectifier_eps) {
  ObjectiveSpec spec;
  spec.rectifier_eps = rectifier_eps;
  const TauEstimate est = evaluate_taus(params, ds, spec);
  return est.objective - l2_reg * params.squared_norm();
}

double drm_propensity_objective(const nn::ScorerParams& params,
                                const Dataset& ds, const PropensityWeights& w,
                                ObjectiveSpec spec) {
  spec.propensity = w;
  return evaluate_taus(params, ds, spec).objective;
}

TauEstimate evaluate_taus(const nn::ScorerParams& params, const Dataset& ds,
                          const ObjectiveSpec& spec) {
  const DrmObjective obj(ds, spec);
  const VectorXd scores = nn::forward(params, ds.x());
  const auto eval = obj.evaluate(scores, /*with_grad=*/false);
  if (!std::isfinite(eval.value)) {
    throw NonFiniteError("objective is not finite");
  }
  TauEstimate est;
  est.tau_r = eval.tau_r;
  est.tau_c = eval.tau_c;
  est.objective = eval.value;
  est.rectifier_eps = spec.rectifier_eps;
  return est;
}

namespace {

std::vector<int> default_layers(const Dataset& ds,
                                const std::vector<int>& requested) {
  if (!requested.empty()) return requested;
  return {static_cast<int>(ds.d()), 1};
}

// Index batches for one pass; full batch when batch_size <= 0.
std::vector<std::vector<Eigen::Index>> make_batches(Eigen::Index n,
                                                    int batch_size, Rng& rng) {
  if (batch_size <= 0 || batch_size >= n) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return {std::move(all)};
  }
  const auto perm = rng.permutation(n);
  std::vector<std::vector<Eigen::Index>> batches;
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index stop = std::min<Eigen::Index>(start + batch_size, n);
    batches.emplace_back(perm.begin() + start, perm.begin() + stop);
  }
  return batches;
}

}  // namespace

TrainResult train_drm(const Dataset& ds, const TrainConfig& cfg) {
  split_cohorts(ds);
  const std::vector<int> layers = default_layers(ds, cfg.layer_sizes);
  TrainResult result;
  result.params = nn::init_params(layers, cfg.seed);
  nn::AdamState adam =
      nn::make_adam_state(result.params, cfg.lr, cfg.beta1, cfg.beta2);
  Rng rng(cfg.seed.seed ^ 0x9D2C5680AULL);  // batch shuffling stream

  result.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  int iter = 0;
  while (iter < cfg.iterations) {
    for (const auto& batch : make_batches(ds.n(), cfg.batch_size, rng)) {
      if (iter >= cfg.iterations) break;
      const bool full = static_cast<Eigen::Index>(batch.size()) == ds.n();
      ObjectiveSpec spec = cfg.objective;
      if (spec.propensity && !full) {
        spec.propensity = spec.propensity->restrict(batch);
      }
      nn::ValueAndGrad vg;
      if (full) {
        const DrmObjective obj(ds, spec);
        vg = nn::value_and_gradient(result.params, ds.x(), obj, cfg.l2_reg);
      } else {
        const Dataset sub = ds.subset(batch);
        const DrmObjective obj(sub, spec);
        vg = nn::value_and_gradient(result.params, sub.x(), obj, cfg.l2_reg);
      }
      nn::adam_step(adam, result.params, vg.grads);
      TraceRow row;
      row.iteration = iter;
      row.objective = vg.value;
      row.tau_r = vg.detail.tau_r;
      row.tau_c = vg.detail.tau_c;
      result.trace.push_back(row);
      ++iter;
    }
  }
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path, bool barrier_columns) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "iteration,objective,tau_r,tau_c";
  if (barrier_columns) out << ",temperature,d_star,pass_fraction";
  out << "\n";
  char buf[512];
  for (const TraceRow& r : trace) {
    if (barrier_columns) {
      std::snprintf(buf, sizeof(buf),
                    "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.iteration,
                    r.objective, r.tau_r, r.tau_c, r.temperature, r.d_star,
                    r.pass_fraction);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g\n", r.iteration,
                    r.objective, r.tau_r, r.tau_c);
    }
    out << buf;
  }
}

}  // namespace uplift::drm
