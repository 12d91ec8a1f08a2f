#include "upliftrank/core.hpp"

#include <cmath>
#include <numbers>

namespace uplift {

std::string to_string(Strategy s) {
  return s == Strategy::kExplore ? "explore" : "exploit";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "explore" || s.empty()) return Strategy::kExplore;
  if (s == "exploit") return Strategy::kExploit;
  throw InvalidConfigError("unknown strategy '" + s +
                           "' (expected explore or exploit)");
}

Dataset::Dataset(std::vector<std::string> ids, MatrixXd features,
                 VectorXi treatment, VectorXd value_outcome,
                 VectorXd cost_outcome, std::vector<Strategy> strategy,
                 std::string meta)
    : ids_(std::move(ids)),
      x_(std::move(features)),
      t_(std::move(treatment)),
      y_r_(std::move(value_outcome)),
      y_c_(std::move(cost_outcome)),
      strategy_(std::move(strategy)),
      meta_(std::move(meta)) {
  const Eigen::Index n = x_.rows();
  if (t_.size() != n || y_r_.size() != n || y_c_.size() != n) {
    throw ShapeMismatchError("dataset columns disagree on sample count");
  }
  if (!ids_.empty() && static_cast<Eigen::Index>(ids_.size()) != n) {
    throw ShapeMismatchError("id column has wrong length");
  }
  if (ids_.empty()) {
    ids_.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i) ids_.push_back(std::to_string(i));
  }
  if (strategy_.empty()) {
    strategy_.assign(static_cast<std::size_t>(n), Strategy::kExplore);
  } else if (static_cast<Eigen::Index>(strategy_.size()) != n) {
    throw ShapeMismatchError("strategy column has wrong length");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t_[i] != 0 && t_[i] != 1) {
      throw InvalidConfigError("treatment indicator must be 0 or 1 at sample " +
                               std::to_string(i));
    }
    if (!std::isfinite(y_r_[i]) || !std::isfinite(y_c_[i])) {
      throw InvalidConfigError("non-finite outcome at sample " +
                               std::to_string(i));
    }
  }
  if (!x_.allFinite()) {
    throw InvalidConfigError("non-finite feature value in dataset");
  }
}

Dataset Dataset::from_samples(const std::vector<UserSample>& samples,
                              std::string meta) {
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  if (n == 0) throw InvalidConfigError("cannot build a dataset from 0 samples");
  const Eigen::Index d = samples.front().x.size();
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  MatrixXd x(n, d);
  VectorXi t(n);
  VectorXd y_r(n), y_c(n);
  std::vector<Strategy> strat;
  strat.reserve(samples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const UserSample& s = samples[static_cast<std::size_t>(i)];
    if (s.x.size() != d) {
      throw ShapeMismatchError("feature width differs at sample " +
                               std::to_string(i));
    }
    ids.push_back(s.id);
    x.row(i) = s.x.transpose();
    t[i] = s.t;
    y_r[i] = s.y_r;
    y_c[i] = s.y_c;
    strat.push_back(s.strategy);
  }
  return Dataset(std::move(ids), std::move(x), std::move(t), std::move(y_r),
                 std::move(y_c), std::move(strat), std::move(meta));
}

UserSample Dataset::sample(Eigen::Index i) const {
  UserSample s;
  s.id = ids_[static_cast<std::size_t>(i)];
  s.x = x_.row(i).transpose();
  s.t = t_[i];
  s.y_r = y_r_[i];
  s.y_c = y_c_[i];
  s.strategy = strategy_[static_cast<std::size_t>(i)];
  return s;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  MatrixXd x(m, d());
  VectorXi t(m);
  VectorXd y_r(m), y_c(m);
  std::vector<Strategy> strat;
  strat.reserve(rows.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    ids.push_back(ids_[static_cast<std::size_t>(i)]);
    x.row(k) = x_.row(i);
    t[k] = t_[i];
    y_r[k] = y_r_[i];
    y_c[k] = y_c_[i];
    strat.push_back(strategy_[static_cast<std::size_t>(i)]);
  }
  return Dataset(std::move(ids), std::move(x), std::move(t), std::move(y_r),
                 std::move(y_c), std::move(strat), meta_);
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) {
  return (v << k) | (v >> (64 - k));
}

}  // namespace

// xoshiro256++ seeded through splitmix64.
Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : state_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 == 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  spare_ = mag * std::sin(ang);
  have_spare_ = true;
  return mag * std::cos(ang);
}

bool Rng::bernoulli(double p) { return uniform01() < p; }

std::uint64_t Rng::bounded(std::uint64_t n) {
  if (n == 0) throw InvalidConfigError("bounded(0) is undefined");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

std::vector<Eigen::Index> Rng::permutation(Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(
        bounded(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_cohorts(
    const VectorXi& t) {
  std::vector<Eigen::Index> treated, control;
  treated.reserve(static_cast<std::size_t>(t.size()));
  control.reserve(static_cast<std::size_t>(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    (t[i] == 1 ? treated : control).push_back(i);
  }
  if (treated.empty()) throw EmptyCohortError("no treated samples");
  if (control.empty()) throw EmptyCohortError("no control samples");
  return {std::move(treated), std::move(control)};
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_cohorts(
    const Dataset& ds) {
  return split_cohorts(ds.t());
}

}  // namespace uplift
