#include "upliftrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "upliftrank/mathutil.hpp"

namespace uplift::eval {

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int pct = 5; pct <= 100; pct += 5) {
    g.push_back(static_cast<double>(pct) / 100.0);
  }
  g.back() = 1.0;
  return g;
}

std::vector<double> generalization_grid() {
  return {0.15, 0.20, 0.30, 0.40, 0.60, 0.80, 1.00};
}

std::vector<Eigen::Index> rank_by_score(const VectorXd& scores) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return idx;
}

namespace {

void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidConfigError("empty evaluation grid");
  double prev = 0.0;
  for (double q : grid) {
    if (!(q > prev && q <= 1.0)) {
      throw InvalidConfigError(
          "grid must be strictly increasing within (0, 1]");
    }
    prev = q;
  }
  if (grid.back() != 1.0) {
    throw InvalidConfigError("grid must end at 1.0");
  }
}

struct SubsetAte {
  bool both_cohorts = false;
  Eigen::Index n_treated = 0;
  double ate_r = 0.0;
  double ate_c = 0.0;
};

SubsetAte prefix_ate(const Dataset& ds, const std::vector<Eigen::Index>& order,
                     Eigen::Index k) {
  SubsetAte out;
  double sum_r[2] = {0.0, 0.0};
  double sum_c[2] = {0.0, 0.0};
  Eigen::Index count[2] = {0, 0};
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index i = order[static_cast<std::size_t>(j)];
    const int c = ds.t()[i];
    sum_r[c] += ds.y_r()[i];
    sum_c[c] += ds.y_c()[i];
    ++count[c];
  }
  if (count[0] == 0 || count[1] == 0) return out;
  out.both_cohorts = true;
  out.n_treated = count[1];
  out.ate_r = sum_r[1] / static_cast<double>(count[1]) -
              sum_r[0] / static_cast<double>(count[0]);
  out.ate_c = sum_c[1] / static_cast<double>(count[1]) -
              sum_c[0] / static_cast<double>(count[0]);
  return out;
}

}  // namespace

CostCurve cost_curve(const VectorXd& scores, const Dataset& ds,
                     const std::vector<double>& grid) {
  if (scores.size() != ds.n()) {
    throw ShapeMismatchError("scores and dataset disagree on sample count");
  }
  validate_grid(grid);
  const auto order = rank_by_score(scores);

  CostCurve curve;
  curve.grid = grid;
  for (double q : grid) {
    const auto k = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(q * static_cast<double>(ds.n()))),
        1, ds.n());
    const SubsetAte ate = prefix_ate(ds, order, k);
    if (!ate.both_cohorts) {
      curve.skipped.push_back(q);
      continue;
    }
    CurvePoint pt;
    pt.q = q;
    pt.cum_cost = static_cast<double>(ate.n_treated) * ate.ate_c;
    pt.cum_value = static_cast<double>(ate.n_treated) * ate.ate_r;
    curve.points.push_back(pt);
  }
  return curve;
}

double aucc(const CostCurve& curve) {
  if (curve.points.size() < 2) {
    throw UndefinedError("cost curve needs at least two points");
  }
  const CurvePoint& end = curve.points.back();
  if (!(end.cum_cost > 0.0) || !(end.cum_value > 0.0)) {
    throw UndefinedError(
        "AUCC undefined: endpoint incremental cost or value is not positive");
  }
  // Signed path area from the origin through the points (the curve need not
  // be monotone in cost), normalized by the rectangle spanned by the maximum
  // observed cumulative cost and value.
  double area = 0.0;
  double px = 0.0, py = 0.0;
  double max_cost = 0.0, max_value = 0.0;
  for (const CurvePoint& pt : curve.points) {
    area += 0.5 * (pt.cum_cost - px) * (py + pt.cum_value);
    px = pt.cum_cost;
    py = pt.cum_value;
    max_cost = std::max(max_cost, pt.cum_cost);
    max_value = std::max(max_value, pt.cum_value);
  }
  return area / (max_cost * max_value);
}

double slope_r(const Dataset& subset) {
  const auto [treated, control] = split_cohorts(subset);
  double mean_r[2] = {0.0, 0.0};
  double mean_c[2] = {0.0, 0.0};
  for (Eigen::Index i : treated) {
    mean_r[1] += subset.y_r()[i];
    mean_c[1] += subset.y_c()[i];
  }
  for (Eigen::Index i : control) {
    mean_r[0] += subset.y_r()[i];
    mean_c[0] += subset.y_c()[i];
  }
  mean_r[1] /= static_cast<double>(treated.size());
  mean_c[1] /= static_cast<double>(treated.size());
  mean_r[0] /= static_cast<double>(control.size());
  mean_c[0] /= static_cast<double>(control.size());
  const double ate_c = mean_c[1] - mean_c[0];
  if (ate_c == 0.0) {
    throw UndefinedError("slope R undefined: subset cost effect is zero");
  }
  return (mean_r[1] - mean_r[0]) / ate_c;
}

double efficiency_gain(double r_exploit, double r_explore) {
  if (r_explore == 0.0) {
    throw UndefinedError("efficiency gain undefined: zero benchmark");
  }
  return (r_exploit - r_explore) / r_explore;
}

double generalization_score(const VectorXd& scores, const Dataset& ds,
                            double q, const drm::PropensityWeights& w,
                            GenMode mode, double alpha, double rectifier_eps) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw InvalidConfigError("q must lie in (0, 1]");
  }
  if (scores.size() != ds.n() || w.e_x.size() != ds.n()) {
    throw ShapeMismatchError("generalization_score inputs disagree");
  }
  const auto order = rank_by_score(scores);
  const auto k = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::llround(q * static_cast<double>(ds.n()))),
      1, ds.n());
  std::vector<Eigen::Index> top(order.begin(), order.begin() + k);

  VectorXd sub_scores(k), sub_yr(k), sub_yc(k);
  VectorXi sub_t(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index i = top[static_cast<std::size_t>(j)];
    sub_scores[j] = scores[i];
    sub_yr[j] = ds.y_r()[i];
    sub_yc[j] = ds.y_c()[i];
    sub_t[j] = ds.t()[i];
  }
  const drm::EffectivenessProbs probs =
      drm::effectiveness_probs(sub_scores, sub_t);
  const drm::PropensityWeights sub_w = w.restrict(top);
  const double tau_r = drm::tau_hat_propensity(probs, sub_yr, sub_t, sub_w);
  const double tau_c = drm::tau_hat_propensity(probs, sub_yc, sub_t, sub_w);
  if (mode == GenMode::kLinear) return tau_r - alpha * tau_c;
  return tau_r / (softplus(tau_c) + rectifier_eps);
}

void write_curve_csv(const CostCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "q,cum_cost,cum_value\n";
  char buf[256];
  for (const CurvePoint& pt : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", pt.q, pt.cum_cost,
                  pt.cum_value);
    out << buf;
  }
}

}  // namespace uplift::eval
