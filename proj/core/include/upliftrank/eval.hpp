#pragma once

#include <limits>
#include <string>
#include <vector>

#include "upliftrank/core.hpp"
#include "upliftrank/drm.hpp"

namespace uplift::eval {

struct CurvePoint {
  double q = 0.0;         // population fraction
  double cum_cost = 0.0;  // treated count in subset times subset ATE on cost
  double cum_value = 0.0;
};

struct CostCurve {
  std::vector<CurvePoint> points;
  std::vector<double> grid;
  double aucc = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> skipped;  // grid fractions without both cohorts
};

/// Fractions 0.05, 0.10, ..., 1.00.
std::vector<double> default_grid();

/// Ranking by score descending with original index as the tie-break.
std::vector<Eigen::Index> rank_by_score(const VectorXd& scores);

/// Cost curve over score-ranked population prefixes. The grid must be
/// strictly increasing within (0, 1] and end at 1.0. Fractions whose prefix
/// lacks a cohort are skipped and recorded in `skipped`.
CostCurve cost_curve(const VectorXd& scores, const Dataset& ds,
                     const std::vector<double>& grid = default_grid());

/// Area under the piecewise-linear curve from the origin, normalized by the
/// rectangle spanned by the maximum cumulative cost and value (the q=1
/// endpoint for monotone curves). 0.5 for a straight diagonal. Throws
/// UndefinedError with fewer than 2 points or a non-positive endpoint.
double aucc(const CostCurve& curve);

/// Subset-level ATE ratio ATE_r / ATE_c. Throws UndefinedError when the
/// cost effect is zero.
double slope_r(const Dataset& subset);

/// Relative gain (r_exploit - r_explore) / r_explore.
double efficiency_gain(double r_exploit, double r_explore);

enum class GenMode { kRatio, kLinear };

/// Propensity-weighted objective of the top-q subset: scores are softmaxed
/// per cohort within the subset and fed through the weighted tau estimates.
/// e_hat and the per-sample propensities come from `w` as given.
double generalization_score(const VectorXd& scores, const Dataset& ds,
                            double q, const drm::PropensityWeights& w,
                            GenMode mode = GenMode::kRatio, double alpha = 1.5,
                            double rectifier_eps = 1e-6);

/// Table-style grid 15, 20, 30, 40, 60, 80, 100 percent.
std::vector<double> generalization_grid();

void write_curve_csv(const CostCurve& curve, const std::string& path);

}  // namespace uplift::eval
