#pragma once

#include <optional>
#include <string>
#include <vector>

#include "upliftrank/core.hpp"
#include "upliftrank/nn.hpp"

namespace uplift::drm {

/// Per-cohort softmax-normalized selection probabilities. Within each cohort
/// the entries sum to one and preserve the ranking of the raw scores.
struct EffectivenessProbs {
  VectorXd p;
  VectorXi cohort;  // copy of the treatment indicators
};

/// Max-shifted softmax computed separately over the treated and control
/// cohorts. Throws EmptyCohortError if either cohort is empty.
EffectivenessProbs effectiveness_probs(const VectorXd& scores,
                                       const VectorXi& t);

/// Aggregated treatment-effect functional:
/// sum of p_i*y_i over treated minus sum of p_i*y_i over control.
double tau_hat(const EffectivenessProbs& probs, const VectorXd& y,
               const VectorXi& t);

/// Inverse-propensity weights. e_hat is exactly the treated fraction of the
/// population the weights were built for; per-sample propensities are
/// clipped to [0.01, 0.99].
struct PropensityWeights {
  double e_hat = 0.0;
  VectorXd e_x;

  /// Constant propensity: e(x) identically equal to the treated fraction.
  static PropensityWeights constant(const VectorXi& t);

  /// Per-sample estimates, clipped. e_hat is recomputed from t.
  static PropensityWeights from_estimates(const VectorXi& t,
                                          const VectorXd& estimates);

  /// Per-sample multiplier: e_hat/e(x) for treated, (1-e_hat)/(1-e(x)) for
  /// control.
  VectorXd ipw_factors(const VectorXi& t) const;

  PropensityWeights restrict(const std::vector<Eigen::Index>& rows) const;
};

/// Propensity-weighted treatment-effect functional:
/// e_hat * sum_T y_i p_i / e(x_i)  -  (1-e_hat) * sum_C y_i p_i / (1-e(x_i)).
double tau_hat_propensity(const EffectivenessProbs& probs, const VectorXd& y,
                          const VectorXi& t, const PropensityWeights& w);

enum class ObjectiveMode {
  kRatio,            // tau_r / (softplus(tau_c) + eps)
  kLinear,           // tau_r - alpha * tau_c
  kDoubleRectified,  // (softplus(tau_r)+eps) / (softplus(tau_c)+eps)
};

struct ObjectiveSpec {
  ObjectiveMode mode = ObjectiveMode::kRatio;
  double alpha = 1.5;  // linear-mode trade-off weight
  double rectifier_eps = 1e-6;
  std::optional<PropensityWeights> propensity;  // empty = unweighted
};

/// Aggregated effect estimates plus the scalar objective built from them.
struct TauEstimate {
  double tau_r = 0.0;
  double tau_c = 0.0;
  double objective = 0.0;
  double rectifier_eps = 1e-6;
};

namespace detail {
/// Value of the combined objective and its partials wrt tau_r, tau_c.
struct ModePartials {
  double value;
  double d_tau_r;
  double d_tau_c;
};
ModePartials mode_partials(ObjectiveMode mode, double tau_r, double tau_c,
                           double alpha, double rectifier_eps);
}  // namespace detail

/// Direct Ranking objective over a fixed batch of outcomes. Computes the
/// per-cohort softmax internally and returns an analytic score gradient.
class DrmObjective final : public nn::ScoreObjective {
 public:
  DrmObjective(const Dataset& ds, ObjectiveSpec spec);
  DrmObjective(VectorXd y_r, VectorXd y_c, VectorXi t, ObjectiveSpec spec);

  Eval evaluate(const VectorXd& scores, bool with_grad) const override;

  const VectorXi& t() const { return t_; }

 private:
  VectorXd w_r_;  // IPW-scaled value outcomes
  VectorXd w_c_;  // IPW-scaled cost outcomes
  VectorXi t_;
  ObjectiveSpec spec_;
};

/// Ratio objective tau_r / (softplus(tau_c) + eps) - reg * ||theta||^2 at the
/// given parameters. Higher is better.
double drm_objective(const nn::ScorerParams& params, const Dataset& ds,
                     double l2_reg = 0.0, double rectifier_eps = 1e-6);

/// Propensity-weighted objective; spec.mode selects the ratio form or the
/// linear form tau_r - alpha * tau_c.
double drm_propensity_objective(const nn::ScorerParams& params,
                                const Dataset& ds, const PropensityWeights& w,
                                ObjectiveSpec spec = {});

/// Value-only evaluation returning the tau components alongside the objective.
TauEstimate evaluate_taus(const nn::ScorerParams& params, const Dataset& ds,
                          const ObjectiveSpec& spec);

struct TrainConfig {
  std::vector<int> layer_sizes;  // empty = single layer {d, 1}
  int iterations = 1500;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double l2_reg = 0.0;
  int batch_size = 0;  // 0 = full batch
  RngSeed seed;
  ObjectiveSpec objective;
};

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double tau_r = 0.0;
  double tau_c = 0.0;
  // Filled by constrained training only.
  double temperature = 0.0;
  double d_star = 0.0;
  double pass_fraction = 0.0;
};

struct TrainResult {
  nn::ScorerParams params;
  std::vector<TraceRow> trace;
};

/// Full-batch (default) Adam ascent on the DRM objective for cfg.iterations
/// steps. Deterministic per seed.
TrainResult train_drm(const Dataset& ds, const TrainConfig& cfg);

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path, bool barrier_columns = false);

}  // namespace uplift::drm
