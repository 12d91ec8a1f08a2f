#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "upliftrank/core.hpp"

namespace uplift::rlearner {

struct RidgeModel {
  VectorXd weights;
  double intercept = 0.0;
  double reg = 0.0;

  VectorXd predict(const MatrixXd& X) const;
};

/// Least squares with an unpenalized intercept, solved through the normal
/// equations with a symmetric (LDLT) factorization. With reg == 0 a
/// rank-deficient design raises SingularSystemError.
RidgeModel fit_ridge(const MatrixXd& X, const VectorXd& y, double reg = 0.0);

/// Weighted variant minimizing sum_i w_i (y_i - b - x_i . beta)^2.
RidgeModel fit_ridge_weighted(const MatrixXd& X, const VectorXd& y,
                              const VectorXd& sample_weights, double reg = 0.0);

struct PropensityModel {
  enum class Kind { kConstant, kLogistic };
  Kind kind = Kind::kConstant;
  double e_hat = 0.5;   // constant case
  VectorXd weights;     // logistic case, original feature scale
  double intercept = 0.0;

  /// Predicted P(T=1|x), clipped to [0.01, 0.99].
  VectorXd predict(const MatrixXd& X) const;
};

PropensityModel fit_propensity_constant(const VectorXi& t);

/// Logistic regression by full-batch gradient ascent on the mean
/// log-likelihood: 500 iterations, learning rate 0.1, features standardized
/// internally. Throws EmptyCohortError unless both classes are present.
PropensityModel fit_propensity(const MatrixXd& X, const VectorXi& t);

enum class Outcome { kValue, kCost, kCombined };

struct RLearnerOptions {
  Outcome outcome = Outcome::kValue;
  double lambda = 0.0;  // combined outcome: y_r - lambda * y_c
  double reg = 0.0;     // ridge weight for both stages
};

/// Two-step estimator of the conditional treatment effect: fit the outcome
/// mean m(x), then regress the residuals y - m(x) on t - e(x) with weights
/// (t - e(x))^2. Returns the tau model.
RidgeModel rlearner_fit(const Dataset& ds, const RLearnerOptions& opt,
                        const PropensityModel& prop);

struct DualitySolution {
  VectorXd z;          // 0/1 selections
  double lambda = 0.0;
  VectorXd s;          // effectiveness scores at the final lambda
  double spend = 0.0;  // sum of tau_c over the selection
  bool converged = false;
};

/// Dual ascent for the budgeted selection problem: alternate the bang-bang
/// selection z_i = 1[tau_r_i - lambda*tau_c_i >= 0] with multiplier updates
/// that raise lambda while the budget is exceeded. The returned z is the
/// best budget-feasible iterate encountered; with slack budget lambda
/// converges to 0 and z is exactly optimal, otherwise the selection is
/// within one marginal user of the optimum.
DualitySolution duality_solve(const VectorXd& tau_r, const VectorXd& tau_c,
                              double budget, double alpha = 0.01,
                              int max_iters = 2000);

/// Per-user ranking score tau_r(x) - lambda * tau_c(x).
VectorXd duality_score(const RidgeModel& tau_r_model,
                       const RidgeModel& tau_c_model, double lambda,
                       const MatrixXd& X);

/// Default search grid for lambda.
std::vector<double> default_lambda_grid();

/// Picks the lambda from the grid whose duality_score ranking yields the
/// highest AUCC on the validation set.
double select_lambda(const RidgeModel& tau_r_model,
                     const RidgeModel& tau_c_model, const Dataset& val,
                     const std::vector<double>& grid = default_lambda_grid());

struct DualityModel {
  RidgeModel tau_r;
  RidgeModel tau_c;
  double lambda = 0.05;
};

nlohmann::json ridge_to_json(const RidgeModel& m);
RidgeModel ridge_from_json(const nlohmann::json& j);
nlohmann::json propensity_to_json(const PropensityModel& m);
PropensityModel propensity_from_json(const nlohmann::json& j);
nlohmann::json duality_to_json(const DualityModel& m);
DualityModel duality_from_json(const nlohmann::json& j);

}  // namespace uplift::rlearner
