#include "upliftrank/nn.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace uplift::nn {

using nlohmann::json;

Eigen::Index ScorerParams::parameter_count() const {
  Eigen::Index count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    count += weights[l].size() + biases[l].size();
  }
  return count;
}

double ScorerParams::squared_norm() const {
  double sq = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    sq += weights[l].squaredNorm() + biases[l].squaredNorm();
  }
  return sq;
}

ParamGrads ParamGrads::zeros_like(const ScorerParams& p) {
  ParamGrads g;
  g.weights.reserve(p.weights.size());
  g.biases.reserve(p.biases.size());
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    g.weights.push_back(MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
    g.biases.push_back(VectorXd::Zero(p.biases[l].size()));
  }
  return g;
}

bool ParamGrads::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

AdamState make_adam_state(const ScorerParams& p, double lr, double beta1,
                          double beta2, double eps) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  s.m = ParamGrads::zeros_like(p);
  s.v = ParamGrads::zeros_like(p);
  return s;
}

ScorerParams init_params(const std::vector<int>& layer_sizes, RngSeed seed) {
  if (layer_sizes.size() < 2) {
    throw InvalidShapeError("need at least input and output widths");
  }
  for (int w : layer_sizes) {
    if (w <= 0) throw InvalidShapeError("layer widths must be positive");
  }
  if (layer_sizes.back() != 1) {
    throw InvalidShapeError("output width must be 1");
  }
  Rng rng(seed);
  ScorerParams p;
  p.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = rng.uniform(-a, a);
      }
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(VectorXd::Zero(fan_out));
  }
  return p;
}

namespace {

// Activations per layer, stored as (width x n) so layer maps are single GEMMs.
struct ForwardPass {
  std::vector<MatrixXd> h;  // h[0] = X^T, h[l+1] = tanh(W_l h[l] + b_l)
};

ForwardPass run_forward(const ScorerParams& p, const MatrixXd& X) {
  if (X.cols() != p.input_dim()) {
    throw ShapeMismatchError("feature width " + std::to_string(X.cols()) +
                             " does not match scorer input width " +
                             std::to_string(p.input_dim()));
  }
  ForwardPass fp;
  fp.h.reserve(p.layer_count() + 1);
  fp.h.push_back(X.transpose());
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    MatrixXd z = p.weights[l] * fp.h.back();
    z.colwise() += p.biases[l];
    fp.h.push_back(z.array().tanh().matrix());
  }
  return fp;
}

}  // namespace

VectorXd forward(const ScorerParams& p, const MatrixXd& X) {
  const ForwardPass fp = run_forward(p, X);
  return fp.h.back().row(0).transpose();
}

ValueAndGrad value_and_gradient(const ScorerParams& p, const MatrixXd& X,
                                const ScoreObjective& obj, double l2_reg) {
  const ForwardPass fp = run_forward(p, X);
  const VectorXd scores = fp.h.back().row(0).transpose();

  ValueAndGrad out;
  out.detail = obj.evaluate(scores, /*with_grad=*/true);
  out.value = out.detail.value - l2_reg * p.squared_norm();
  if (out.detail.score_grad.size() != scores.size()) {
    throw ShapeMismatchError("objective returned a score gradient of length " +
                             std::to_string(out.detail.score_grad.size()) +
                             " for " + std::to_string(scores.size()) +
                             " scores");
  }

  out.grads.weights.resize(p.layer_count());
  out.grads.biases.resize(p.layer_count());

  // Backpropagate d value / d score through the tanh layers.
  MatrixXd delta = out.detail.score_grad.transpose();  // 1 x n, dV/dh_L
  for (std::size_t l = p.layer_count(); l-- > 0;) {
    const MatrixXd& h_out = fp.h[l + 1];
    // dV/dz = dV/dh * (1 - h^2)
    const MatrixXd dz =
        delta.array() * (1.0 - h_out.array().square());
    out.grads.weights[l] = dz * fp.h[l].transpose();
    out.grads.biases[l] = dz.rowwise().sum();
    if (l > 0) delta = p.weights[l].transpose() * dz;
    if (l2_reg != 0.0) {
      out.grads.weights[l] -= 2.0 * l2_reg * p.weights[l];
      out.grads.biases[l] -= 2.0 * l2_reg * p.biases[l];
    }
  }

  if (!std::isfinite(out.value) || !out.grads.all_finite()) {
    throw NonFiniteError("objective or gradient is not finite");
  }
  return out;
}

void adam_step(AdamState& state, ScorerParams& p, const ParamGrads& grads) {
  if (grads.weights.size() != p.weights.size()) {
    throw ShapeMismatchError("gradient has wrong layer count");
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (grads.weights[l].rows() != p.weights[l].rows() ||
        grads.weights[l].cols() != p.weights[l].cols() ||
        grads.biases[l].size() != p.biases[l].size()) {
      throw ShapeMismatchError("gradient shape mismatch at layer " +
                               std::to_string(l));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  auto update = [&](auto& m, auto& v, auto& theta, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square())
            .matrix();
    theta.array() += state.lr * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    update(state.m.weights[l], state.v.weights[l], p.weights[l],
           grads.weights[l]);
    update(state.m.biases[l], state.v.biases[l], p.biases[l],
           grads.biases[l]);
  }
}

json checkpoint_to_json(const ScorerParams& p, const json& train_config) {
  json j;
  j["version"] = "1";
  j["layer_sizes"] = p.layer_sizes;
  json ws = json::array();
  json bs = json::array();
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(p.weights[l].size()));
    for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i) {
      for (Eigen::Index jx = 0; jx < p.weights[l].cols(); ++jx) {
        w.push_back(p.weights[l](i, jx));  // row-major
      }
    }
    ws.push_back(w);
    bs.push_back(std::vector<double>(
        p.biases[l].data(), p.biases[l].data() + p.biases[l].size()));
  }
  j["weights"] = ws;
  j["biases"] = bs;
  j["config"] = train_config;
  return j;
}

ScorerParams checkpoint_from_json(const json& j) {
  if (!j.contains("version") || j.at("version").get<std::string>() != "1") {
    throw SchemaError("unsupported checkpoint version");
  }
  ScorerParams p;
  p.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  if (p.layer_sizes.size() < 2) {
    throw SchemaError("checkpoint has fewer than two layer sizes");
  }
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  if (ws.size() + 1 != p.layer_sizes.size() || bs.size() != ws.size()) {
    throw SchemaError("checkpoint layer arrays do not match layer_sizes");
  }
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    const int rows = p.layer_sizes[l + 1];
    const int cols = p.layer_sizes[l];
    const auto w = ws[l].get<std::vector<double>>();
    const auto b = bs[l].get<std::vector<double>>();
    if (static_cast<int>(w.size()) != rows * cols ||
        static_cast<int>(b.size()) != rows) {
      throw SchemaError("checkpoint parameter array has wrong length at layer " +
                        std::to_string(l));
    }
    MatrixXd wm(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int jx = 0; jx < cols; ++jx) wm(i, jx) = w[static_cast<std::size_t>(i * cols + jx)];
    }
    p.weights.push_back(std::move(wm));
    p.biases.push_back(Eigen::Map<const VectorXd>(b.data(), rows));
  }
  return p;
}

void save_checkpoint(const ScorerParams& p, const json& train_config,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << checkpoint_to_json(p, train_config).dump(2) << "\n";
}

ScorerParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace uplift::nn
