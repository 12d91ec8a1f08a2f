#pragma once

#include <optional>
#include <vector>

#include "upliftrank/core.hpp"
#include "upliftrank/drm.hpp"
#include "upliftrank/nn.hpp"

namespace uplift::barrier {

/// Selection constraint: keep either the top P fraction of the population or
/// as many users as fit a cost budget B.
struct Constraint {
  enum class Kind { kPercentage, kBudget };
  Kind kind = Kind::kPercentage;
  double percentage = 0.40;
  double budget = 0.0;

  static Constraint make_percentage(double p);
  static Constraint make_budget(double b);
};

/// Rising-temperature schedule: temperature_at(step) =
/// min(t0 + dt * floor(step / every), t_max).
struct AnnealSchedule {
  double t0 = 0.5;
  double dt = 0.1;
  int every = 10;
  double t_max = 50.0;

  void validate() const;
  double temperature_at(long step) const;
};

/// How the budget threshold orders users before accumulating costs.
/// kByProbability walks users by effectiveness descending (default);
/// kByCost determines how many users fit the budget cheapest-first, then
/// thresholds that many by effectiveness.
enum class BudgetOrdering { kByProbability, kByCost };

/// Threshold so that the top round(P*n) probabilities pass: the midpoint
/// between the k-th and (k+1)-th largest p. Ties at the cut fall back to
/// the tied value minus 1e-12 so tied entries all pass.
double select_threshold_percentage(const VectorXd& p, double percentage);

/// Threshold so that the pass set's cumulative cost never exceeds the budget.
/// Ties at the cut are excluded to preserve the budget guarantee.
double select_threshold_budget(const VectorXd& p, const VectorXd& costs,
                               double budget,
                               BudgetOrdering ordering =
                                   BudgetOrdering::kByProbability);

/// Soft gate logistic(temperature * (p_i - d_star)): ~1 above the threshold,
/// ~0 below, 0.5 at the threshold. Increasing in p.
VectorXd barrier_weights(const VectorXd& p, double d_star, double temperature);

struct BarrierOutput {
  double d_star = 0.0;
  VectorXd weights;
  VectorXd p_hat;  // per-cohort renormalized p_i * weight_i
};

/// Applies the soft barrier to per-cohort probabilities: pooled threshold,
/// gating, then per-cohort renormalization.
BarrierOutput apply_barrier(const drm::EffectivenessProbs& probs,
                            const VectorXd& costs, const Constraint& c,
                            double temperature,
                            BudgetOrdering ordering =
                                BudgetOrdering::kByProbability);

/// DRM ratio objective evaluated on barrier-gated, renormalized
/// probabilities. The threshold d_star is treated as a constant of the
/// iteration: it is recomputed from the current scores on every evaluate()
/// unless a fixed threshold is set, and no gradient flows through it.
class ConstrainedObjective final : public nn::ScoreObjective {
 public:
  ConstrainedObjective(const Dataset& ds, Constraint constraint,
                       drm::ObjectiveSpec spec = {},
                       BudgetOrdering ordering =
                           BudgetOrdering::kByProbability);

  void set_temperature(double t) { temperature_ = t; }
  double temperature() const { return temperature_; }

  /// Pin d_star (used by finite-difference checks and prediction-time reuse).
  void set_fixed_threshold(std::optional<double> d_star) {
    fixed_threshold_ = d_star;
  }

  Eval evaluate(const VectorXd& scores, bool with_grad) const override;

 private:
  VectorXd w_r_, w_c_;  // IPW-scaled outcomes
  VectorXd costs_;      // observed costs for the budget threshold
  VectorXi t_;
  Constraint constraint_;
  drm::ObjectiveSpec spec_;
  BudgetOrdering ordering_;
  double temperature_ = 0.5;
  std::optional<double> fixed_threshold_;
};

/// Value of the constrained objective at the given parameters and
/// temperature (threshold recomputed from the induced probabilities).
double constrained_objective(const nn::ScorerParams& params, const Dataset& ds,
                             const Constraint& c, double temperature,
                             double l2_reg = 0.0);

struct ConstrainedTrainConfig {
  drm::TrainConfig base;
  Constraint constraint;
  AnnealSchedule anneal;
  BudgetOrdering ordering = BudgetOrdering::kByProbability;
};

/// Adam ascent on the constrained objective with the annealing schedule
/// advancing once per optimizer step; d_star is recomputed every iteration.
drm::TrainResult train_constrained(const Dataset& ds,
                                   const ConstrainedTrainConfig& cfg);

}  // namespace uplift::barrier
