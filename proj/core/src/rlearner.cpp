#include "upliftrank/rlearner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "upliftrank/eval.hpp"
#include "upliftrank/mathutil.hpp"

namespace uplift::rlearner {

using nlohmann::json;

VectorXd RidgeModel::predict(const MatrixXd& X) const {
  if (X.cols() != weights.size()) {
    throw ShapeMismatchError("ridge model expects " +
                             std::to_string(weights.size()) + " features, got " +
                             std::to_string(X.cols()));
  }
  return (X * weights).array() + intercept;
}

RidgeModel fit_ridge(const MatrixXd& X, const VectorXd& y, double reg) {
  return fit_ridge_weighted(X, y, VectorXd::Ones(y.size()), reg);
}

RidgeModel fit_ridge_weighted(const MatrixXd& X, const VectorXd& y,
                              const VectorXd& sample_weights, double reg) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (y.size() != n || sample_weights.size() != n) {
    throw ShapeMismatchError("fit_ridge: rows of X, y, weights disagree");
  }
  if (reg < 0.0) throw InvalidConfigError("ridge weight must be nonnegative");
  const double w_sum = sample_weights.sum();
  if (!(w_sum > 0.0)) {
    throw InvalidConfigError("sample weights must have positive mass");
  }

  // Weighted centering keeps the intercept unpenalized.
  const VectorXd x_mean = (X.transpose() * sample_weights) / w_sum;
  const double y_mean = sample_weights.dot(y) / w_sum;
  const MatrixXd xc = X.rowwise() - x_mean.transpose();
  const VectorXd yc = y.array() - y_mean;

  MatrixXd gram = xc.transpose() * (sample_weights.asDiagonal() * xc);
  const VectorXd rhs = xc.transpose() * sample_weights.cwiseProduct(yc);
  gram.diagonal().array() += reg;

  if (reg == 0.0) {
    // A singular Gram matrix still yields a consistent system, so detect
    // rank deficiency explicitly instead of checking the solve residual.
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(gram);
    if (qr.rank() < d) {
      throw SingularSystemError("design matrix is rank-deficient; use reg > 0");
    }
  }
  const VectorXd beta = gram.ldlt().solve(rhs);
  if (!beta.allFinite()) {
    throw SingularSystemError("normal equations could not be solved");
  }

  RidgeModel m;
  m.weights = beta;
  m.intercept = y_mean - x_mean.dot(beta);
  m.reg = reg;
  return m;
}

VectorXd PropensityModel::predict(const MatrixXd& X) const {
  VectorXd e(X.rows());
  if (kind == Kind::kConstant) {
    e.setConstant(e_hat);
  } else {
    if (X.cols() != weights.size()) {
      throw ShapeMismatchError("propensity model feature width mismatch");
    }
    const VectorXd z = (X * weights).array() + intercept;
    for (Eigen::Index i = 0; i < z.size(); ++i) e[i] = sigmoid(z[i]);
  }
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    e[i] = clamp01(e[i], 0.01, 0.99);
  }
  return e;
}

PropensityModel fit_propensity_constant(const VectorXi& t) {
  split_cohorts(t);
  PropensityModel m;
  m.kind = PropensityModel::Kind::kConstant;
  m.e_hat = static_cast<double>(t.sum()) / static_cast<double>(t.size());
  return m;
}

PropensityModel fit_propensity(const MatrixXd& X, const VectorXi& t) {
  if (X.rows() != t.size()) {
    throw ShapeMismatchError("fit_propensity: X and t disagree on rows");
  }
  split_cohorts(t);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();

  VectorXd mean = X.colwise().mean();
  VectorXd sd(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var =
        (X.col(j).array() - mean[j]).square().sum() / static_cast<double>(n);
    sd[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  MatrixXd xs = (X.rowwise() - mean.transpose());
  for (Eigen::Index j = 0; j < d; ++j) xs.col(j) /= sd[j];

  const VectorXd td = t.cast<double>();
  VectorXd w = VectorXd::Zero(d);
  double b = 0.0;
  constexpr int kIters = 500;
  constexpr double kLr = 0.1;
  for (int it = 0; it < kIters; ++it) {
    VectorXd z = (xs * w).array() + b;
    VectorXd pr(n);
    for (Eigen::Index i = 0; i < n; ++i) pr[i] = sigmoid(z[i]);
    const VectorXd err = td - pr;
    w += kLr * (xs.transpose() * err) / static_cast<double>(n);
    b += kLr * err.mean();
  }

  PropensityModel m;
  m.kind = PropensityModel::Kind::kLogistic;
  m.e_hat = td.mean();
  m.weights = w.cwiseQuotient(sd);
  m.intercept = b - m.weights.dot(mean);
  return m;
}

RidgeModel rlearner_fit(const Dataset& ds, const RLearnerOptions& opt,
                        const PropensityModel& prop) {
  split_cohorts(ds);
  VectorXd y;
  switch (opt.outcome) {
    case Outcome::kValue:
      y = ds.y_r();
      break;
    case Outcome::kCost:
      y = ds.y_c();
      break;
    case Outcome::kCombined:
      y = ds.y_r() - opt.lambda * ds.y_c();
      break;
  }

  const RidgeModel m_hat = fit_ridge(ds.x(), y, opt.reg);
  const VectorXd resid = y - m_hat.predict(ds.x());
  const VectorXd e = prop.predict(ds.x());
  const VectorXd u = ds.t().cast<double>() - e;  // never 0 after clipping

  // Weighted regression of resid/u on x with weights u^2, equivalent to
  // minimizing sum (resid_i - u_i * tau(x_i))^2.
  const VectorXd pseudo = resid.cwiseQuotient(u);
  const VectorXd w2 = u.cwiseProduct(u);
  return fit_ridge_weighted(ds.x(), pseudo, w2, opt.reg);
}

DualitySolution duality_solve(const VectorXd& tau_r, const VectorXd& tau_c,
                              double budget, double alpha, int max_iters) {
  if (tau_r.size() != tau_c.size()) {
    throw ShapeMismatchError("tau vectors disagree on length");
  }
  if (!(budget > 0.0)) throw InvalidConfigError("budget must be positive");
  if (!(alpha > 0.0)) throw InvalidConfigError("step size must be positive");

  const Eigen::Index n = tau_r.size();
  double lambda = 0.0;
  VectorXd z(n), s(n);
  bool converged = false;

  bool have_best = false;
  VectorXd best_z;
  double best_return = -std::numeric_limits<double>::infinity();
  double best_spend = 0.0;

  for (int it = 0; it < max_iters; ++it) {
    double spend = 0.0;
    double total_return = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = tau_r[i] - lambda * tau_c[i];
      z[i] = s[i] >= 0.0 ? 1.0 : 0.0;
      spend += tau_c[i] * z[i];
      total_return += tau_r[i] * z[i];
    }
    if (spend <= budget && total_return > best_return) {
      best_z = z;
      best_return = total_return;
      best_spend = spend;
      have_best = true;
    }
    // Dual ascent: the multiplier rises while the selection overspends.
    const double next = std::max(0.0, lambda - alpha * (budget - spend));
    if (std::abs(next - lambda) < 1e-9) {
      lambda = next;
      converged = true;
      break;
    }
    lambda = next;
  }

  DualitySolution sol;
  sol.lambda = lambda;
  sol.converged = converged;
  if (have_best) {
    sol.z = best_z;
    sol.spend = best_spend;
  } else {
    sol.z = VectorXd::Zero(n);  // empty selection is always feasible
    sol.spend = 0.0;
  }
  sol.s = tau_r - lambda * tau_c;
  return sol;
}

VectorXd duality_score(const RidgeModel& tau_r_model,
                       const RidgeModel& tau_c_model, double lambda,
                       const MatrixXd& X) {
  if (lambda < 0.0) throw InvalidConfigError("lambda must be nonnegative");
  return tau_r_model.predict(X) - lambda * tau_c_model.predict(X);
}

std::vector<double> default_lambda_grid() {
  return {0.001, 0.005, 0.01, 0.05, 0.1, 0.5};
}

double select_lambda(const RidgeModel& tau_r_model,
                     const RidgeModel& tau_c_model, const Dataset& val,
                     const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidConfigError("empty lambda grid");
  double best_lambda = grid.front();
  double best_aucc = -std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    const VectorXd scores = duality_score(tau_r_model, tau_c_model, lambda,
                                          val.x());
    const eval::CostCurve curve = eval::cost_curve(scores, val);
    double a;
    try {
      a = eval::aucc(curve);
    } catch (const UndefinedError&) {
      continue;
    }
    if (a > best_aucc) {
      best_aucc = a;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

json ridge_to_json(const RidgeModel& m) {
  json j;
  j["kind"] = "ridge";
  j["weights"] = std::vector<double>(m.weights.data(),
                                     m.weights.data() + m.weights.size());
  j["intercept"] = m.intercept;
  j["reg"] = m.reg;
  return j;
}

RidgeModel ridge_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "ridge") {
    throw SchemaError("expected a ridge model");
  }
  RidgeModel m;
  const auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<const VectorXd>(w.data(),
                                         static_cast<Eigen::Index>(w.size()));
  m.intercept = j.at("intercept").get<double>();
  m.reg = j.value("reg", 0.0);
  return m;
}

json propensity_to_json(const PropensityModel& m) {
  json j;
  j["kind"] = "logistic";
  j["model"] = m.kind == PropensityModel::Kind::kConstant ? "constant"
                                                          : "logistic";
  j["e_hat"] = m.e_hat;
  j["weights"] = std::vector<double>(m.weights.data(),
                                     m.weights.data() + m.weights.size());
  j["intercept"] = m.intercept;
  return j;
}

PropensityModel propensity_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "logistic") {
    throw SchemaError("expected a propensity model");
  }
  PropensityModel m;
  m.kind = j.at("model").get<std::string>() == "constant"
               ? PropensityModel::Kind::kConstant
               : PropensityModel::Kind::kLogistic;
  m.e_hat = j.at("e_hat").get<double>();
  const auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<const VectorXd>(w.data(),
                                         static_cast<Eigen::Index>(w.size()));
  m.intercept = j.at("intercept").get<double>();
  return m;
}

json duality_to_json(const DualityModel& m) {
  json j;
  j["kind"] = "duality";
  j["tau_r"] = ridge_to_json(m.tau_r);
  j["tau_c"] = ridge_to_json(m.tau_c);
  j["lambda"] = m.lambda;
  return j;
}

DualityModel duality_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "duality") {
    throw SchemaError("expected a duality model");
  }
  DualityModel m;
  m.tau_r = ridge_from_json(j.at("tau_r"));
  m.tau_c = ridge_from_json(j.at("tau_c"));
  m.lambda = j.at("lambda").get<double>();
  return m;
}

}  // namespace uplift::rlearner
