#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "upliftrank/errors.hpp"

namespace uplift {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

enum class Strategy { kExplore, kExploit };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// One observation: features, treatment indicator and the two outcomes.
struct UserSample {
  std::string id;
  VectorXd x;
  int t = 0;           // 1 = treated, 0 = control
  double y_r = 0.0;    // observed value outcome
  double y_c = 0.0;    // observed cost outcome
  Strategy strategy = Strategy::kExplore;
};

/// Column-oriented sample store. Row order is stable; every per-index array
/// produced elsewhere (scores, probabilities) aligns with it.
class Dataset {
 public:
  Dataset() = default;

  /// Builds from parallel columns and validates the type invariants:
  /// t in {0,1}, finite outcomes, consistent feature width.
  Dataset(std::vector<std::string> ids, MatrixXd features, VectorXi treatment,
          VectorXd value_outcome, VectorXd cost_outcome,
          std::vector<Strategy> strategy = {}, std::string meta = "");

  static Dataset from_samples(const std::vector<UserSample>& samples,
                              std::string meta = "");

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index d() const { return x_.cols(); }

  const MatrixXd& x() const { return x_; }
  const VectorXi& t() const { return t_; }
  const VectorXd& y_r() const { return y_r_; }
  const VectorXd& y_c() const { return y_c_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Strategy>& strategy() const { return strategy_; }
  const std::string& meta() const { return meta_; }

  UserSample sample(Eigen::Index i) const;

  Eigen::Index treated_count() const { return t_.sum(); }

  /// New dataset holding the given rows, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  std::vector<std::string> ids_;
  MatrixXd x_;
  VectorXi t_;
  VectorXd y_r_;
  VectorXd y_c_;
  std::vector<Strategy> strategy_;
  std::string meta_;
};

struct RngSeed {
  std::uint64_t seed = 0;
};

/// Deterministic random source. All randomized operations in the library draw
/// from this class, and every distribution is implemented on top of the raw
/// 64-bit stream so identical seeds give bit-identical results regardless of
/// the standard library in use.
class Rng {
 public:
  explicit Rng(RngSeed seed) : Rng(seed.seed) {}
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform01();

  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller.
  double normal();

  bool bernoulli(double p);

  /// Uniform integer in [0, n) without modulo bias.
  std::uint64_t bounded(std::uint64_t n);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<Eigen::Index> permutation(Eigen::Index n);

 private:
  std::uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Partition of 0..n-1 by treatment indicator; first treated, then control.
/// Throws EmptyCohortError if either side is empty.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_cohorts(
    const Dataset& ds);

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_cohorts(
    const VectorXi& t);

}  // namespace uplift
