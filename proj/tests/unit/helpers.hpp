#pragma once

#include <functional>
#include <vector>

#include "upliftrank/core.hpp"
#include "upliftrank/nn.hpp"

namespace uplift::test {

/// Random small dataset with both cohorts guaranteed.
inline Dataset random_dataset(Rng& rng, Eigen::Index n, int d) {
  MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  VectorXi t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = rng.bernoulli(0.5) ? 1 : 0;
  t[0] = 1;  // both cohorts present for any draw
  t[1] = 0;
  VectorXd y_r(n), y_c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y_r[i] = rng.normal() * 2.0 + 1.0;
    y_c[i] = rng.uniform(0.1, 2.0);
  }
  return Dataset({}, std::move(x), std::move(t), std::move(y_r),
                 std::move(y_c));
}

/// Flattened view over all scorer parameters, for finite differencing.
inline std::vector<double*> parameter_slots(nn::ScorerParams& p) {
  std::vector<double*> slots;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (Eigen::Index k = 0; k < p.weights[l].size(); ++k) {
      slots.push_back(p.weights[l].data() + k);
    }
    for (Eigen::Index k = 0; k < p.biases[l].size(); ++k) {
      slots.push_back(p.biases[l].data() + k);
    }
  }
  return slots;
}

inline std::vector<double> flatten(const nn::ParamGrads& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    for (Eigen::Index k = 0; k < g.weights[l].size(); ++k) {
      flat.push_back(*(g.weights[l].data() + k));
    }
    for (Eigen::Index k = 0; k < g.biases[l].size(); ++k) {
      flat.push_back(*(g.biases[l].data() + k));
    }
  }
  return flat;
}

/// Central finite differences of an arbitrary scalar function of the
/// parameters. Independent of the backprop path it is used to check.
inline std::vector<double> finite_difference_gradient(
    nn::ScorerParams p, const std::function<double(const nn::ScorerParams&)>& f,
    double h = 1e-5) {
  std::vector<double*> slots = parameter_slots(p);
  std::vector<double> grad(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const double saved = *slots[k];
    *slots[k] = saved + h;
    const double up = f(p);
    *slots[k] = saved - h;
    const double down = f(p);
    *slots[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Max relative error between analytic and finite-difference gradients,
/// guarding tiny denominators with an absolute floor.
inline double max_relative_error(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric,
                                 double floor = 1e-7) {
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double scale =
        std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / scale);
  }
  return worst;
}

}  // namespace uplift::test
