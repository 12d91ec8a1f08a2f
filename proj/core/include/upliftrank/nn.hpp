#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "upliftrank/core.hpp"

namespace uplift::nn {

/// Parameters of the scoring function f(x|theta). Every layer applies an
/// affine map followed by tanh; the final layer has width 1 so scores lie in
/// (-1, 1).
struct ScorerParams {
  std::vector<int> layer_sizes;  // [d, hidden..., 1]
  std::vector<MatrixXd> weights;  // per layer, out x in
  std::vector<VectorXd> biases;   // per layer, out

  int input_dim() const { return layer_sizes.front(); }
  std::size_t layer_count() const { return weights.size(); }
  Eigen::Index parameter_count() const;
  double squared_norm() const;
};

/// Gradients (or moment accumulators) with the same shape as ScorerParams.
struct ParamGrads {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;

  static ParamGrads zeros_like(const ScorerParams& p);
  bool all_finite() const;
};

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  ParamGrads m;  // first moments
  ParamGrads v;  // second moments
};

AdamState make_adam_state(const ScorerParams& p, double lr = 0.001,
                          double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8);

/// A differentiable scalar objective of the score vector. drm and barrier
/// assemble their objectives against this contract; value_and_gradient
/// backpropagates the score gradient through the network.
class ScoreObjective {
 public:
  struct Eval {
    double value = 0.0;
    VectorXd score_grad;  // d value / d score_i; empty when not requested
    // Diagnostics for training traces; zero unless the objective fills them.
    double tau_r = 0.0;
    double tau_c = 0.0;
    double d_star = 0.0;
    double pass_fraction = 0.0;
  };

  virtual ~ScoreObjective() = default;
  virtual Eval evaluate(const VectorXd& scores, bool with_grad) const = 0;
};

/// Glorot-uniform weights, zero biases. Deterministic per seed.
/// Throws InvalidShapeError unless sizes are [d, ..., 1] with positive widths.
ScorerParams init_params(const std::vector<int>& layer_sizes, RngSeed seed);

/// Scores for every row of X. Throws ShapeMismatchError if X.cols() does not
/// match the input width.
VectorXd forward(const ScorerParams& p, const MatrixXd& X);

struct ValueAndGrad {
  double value = 0.0;
  ParamGrads grads;
  ScoreObjective::Eval detail;  // objective value/diagnostics before the L2 term
};

/// Analytic gradient of obj(forward(p, X)) - l2_reg * ||theta||^2 with respect
/// to every parameter. Throws NonFiniteError if the value or any gradient
/// entry is NaN/Inf.
ValueAndGrad value_and_gradient(const ScorerParams& p, const MatrixXd& X,
                                const ScoreObjective& obj, double l2_reg = 0.0);

/// One Adam ascent step in place (the objective is maximized).
/// Throws ShapeMismatchError if grads and params disagree.
void adam_step(AdamState& state, ScorerParams& p, const ParamGrads& grads);

nlohmann::json checkpoint_to_json(const ScorerParams& p,
                                  const nlohmann::json& train_config);
ScorerParams checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const ScorerParams& p, const nlohmann::json& train_config,
                     const std::string& path);
ScorerParams load_checkpoint(const std::string& path);

}  // namespace uplift::nn
