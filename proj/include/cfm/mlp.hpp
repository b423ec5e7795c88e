#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <cfm/common.hpp>
#include <cfm/rng.hpp>

namespace cfm {

enum class Activation { relu, swish };

inline std::string to_string(Activation a) {
  return a == Activation::relu ? "relu" : "swish";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "swish") return Activation::swish;
  throw std::invalid_argument("unknown activation: " + s);
}

// Velocity-network shape. The input is the concatenation
// [state | conditioning | 4 Fourier time features]; the output has the
// state dimension.
struct MlpConfig {
  int state_dim = 1;    // d
  int cond_dim = 1;     // D
  int hidden_width = 32;
  int hidden_layers = 3;
  Activation activation = Activation::relu;

  int input_dim() const { return state_dim + cond_dim + 4; }
  int output_dim() const { return state_dim; }

  void validate() const {
    require(state_dim >= 1 && cond_dim >= 1 && hidden_width >= 1 &&
                hidden_layers >= 1,
            "MlpConfig: all dimensions must be >= 1");
  }

  bool operator==(const MlpConfig&) const = default;
};

// Fourier time features [t - 0.5, cos(2 pi t), sin(2 pi t), -cos(4 pi t)].
inline Eigen::Vector4d time_features(double t) {
  const double w = 2.0 * std::numbers::pi * t;
  return {t - 0.5, std::cos(w), std::sin(w), -std::cos(2.0 * w)};
}

// Flat parameter layout: for each layer l in order (hidden 0..L-1, then the
// output layer), the weight matrix W_l of shape (in_l x out_l) flattened
// column-major, followed by the bias b_l of length out_l. Layers compute
// row-vector products h W_l + b_l.
struct LayerShape {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
};

inline std::vector<LayerShape> layer_shapes(const MlpConfig& cfg) {
  cfg.validate();
  std::vector<LayerShape> shapes;
  Eigen::Index in = cfg.input_dim();
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    shapes.push_back({in, cfg.hidden_width});
    in = cfg.hidden_width;
  }
  shapes.push_back({in, cfg.output_dim()});
  return shapes;
}

inline Eigen::Index param_count(const MlpConfig& cfg) {
  Eigen::Index n = 0;
  for (const auto& s : layer_shapes(cfg)) n += s.in * s.out + s.out;
  return n;
}

namespace detail {

struct LayerView {
  Eigen::Map<const Mat> weight;
  Eigen::Map<const Vec> bias;
};

struct MutableLayerView {
  Eigen::Map<Mat> weight;
  Eigen::Map<Vec> bias;
};

inline std::vector<LayerView> map_layers(const MlpConfig& cfg,
                                         const Vec& params) {
  require(params.size() == param_count(cfg),
          "parameter array length does not match the MLP layout");
  std::vector<LayerView> views;
  const double* p = params.data();
  for (const auto& s : layer_shapes(cfg)) {
    views.push_back({Eigen::Map<const Mat>(p, s.in, s.out),
                     Eigen::Map<const Vec>(p + s.in * s.out, s.out)});
    p += s.in * s.out + s.out;
  }
  return views;
}

inline std::vector<MutableLayerView> map_layers(const MlpConfig& cfg,
                                                Vec& params) {
  require(params.size() == param_count(cfg),
          "parameter array length does not match the MLP layout");
  std::vector<MutableLayerView> views;
  double* p = params.data();
  for (const auto& s : layer_shapes(cfg)) {
    views.push_back({Eigen::Map<Mat>(p, s.in, s.out),
                     Eigen::Map<Vec>(p + s.in * s.out, s.out)});
    p += s.in * s.out + s.out;
  }
  return views;
}

inline void apply_activation(Activation a, Mat& m) {
  if (a == Activation::relu) {
    m = m.cwiseMax(0.0);
  } else {
    // swish(x) = x * sigmoid(x)
    m = m.array() / (1.0 + (-m.array()).exp());
  }
}

// Derivative evaluated from the pre-activation values.
inline Mat activation_grad(Activation a, const Mat& pre) {
  if (a == Activation::relu) {
    return (pre.array() > 0.0).cast<double>();
  }
  Mat sig = (1.0 + (-pre.array()).exp()).inverse();
  return sig.array() * (1.0 + pre.array() * (1.0 - sig.array()));
}

}  // namespace detail

// Kaiming-uniform fan-in initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in)),
// filled in flat layout order from the given generator; biases zero.
inline Vec init_params(const MlpConfig& cfg, Rng& rng) {
  Vec params = Vec::Zero(param_count(cfg));
  auto layers = detail::map_layers(cfg, params);
  for (auto& l : layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.rows()));
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
        l.weight(i, j) = rng.uniform(-bound, bound);
  }
  return params;
}

// Assembles the network input [xi | y | time_features(t)] per batch row.
inline Mat assemble_input(const MlpConfig& cfg, const Mat& xi, const Mat& y,
                          const Vec& t) {
  const Eigen::Index b = xi.rows();
  require(xi.cols() == cfg.state_dim && y.cols() == cfg.cond_dim &&
              y.rows() == b && t.size() == b,
          "assemble_input: batch dimensions do not match the config");
  Mat in(b, cfg.input_dim());
  in.leftCols(cfg.state_dim) = xi;
  in.middleCols(cfg.state_dim, cfg.cond_dim) = y;
  for (Eigen::Index r = 0; r < b; ++r)
    in.row(r).tail(4) = time_features(t(r)).transpose();
  return in;
}

// Batched forward pass; rows are independent samples.
inline Mat mlp_forward(const MlpConfig& cfg, const Vec& params, const Mat& xi,
                       const Mat& y, const Vec& t) {
  auto layers = detail::map_layers(cfg, params);
  Mat h = assemble_input(cfg, xi, y, t);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    h = (h * layers[l].weight).rowwise() + layers[l].bias.transpose();
    detail::apply_activation(cfg.activation, h);
  }
  return (h * layers.back().weight).rowwise() +
         layers.back().bias.transpose();
}

// Single-point evaluation of the velocity v(xi, y, t).
inline Vec mlp_forward_one(const MlpConfig& cfg, const Vec& params,
                           const Vec& xi, const Vec& y, double t) {
  Mat out = mlp_forward(cfg, params, xi.transpose(), y.transpose(),
                        Vec::Constant(1, t));
  return out.row(0);
}

struct TrainBatch {
  Mat z;  // B x d source samples
  Mat x;  // B x d target samples
  Mat y;  // B x D conditioning
  Vec t;  // B pseudo-times
};

struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

// Flow-matching regression loss on a batch,
//   (1/B) sum_b | v(I_t(z_b, x_b), y_b, t_b) - (x_b - z_b) |^2,
// with its exact reverse-mode gradient in the flat parameter layout.
inline LossGrad mlp_loss_and_grad(const MlpConfig& cfg, const Vec& params,
                                  const TrainBatch& batch) {
  const Eigen::Index b = batch.z.rows();
  require(b >= 1, "mlp_loss_and_grad: batch must be nonempty");
  require(batch.x.rows() == b && batch.y.rows() == b && batch.t.size() == b &&
              batch.z.cols() == cfg.state_dim &&
              batch.x.cols() == cfg.state_dim,
          "mlp_loss_and_grad: batch dimensions do not match the config");
  if (!(batch.z.allFinite() && batch.x.allFinite() && batch.y.allFinite() &&
        batch.t.allFinite()))
    throw NumericError("mlp_loss_and_grad: non-finite batch inputs");

  // xi_b = (1 - t_b) z_b + t_b x_b, target r_b = x_b - z_b.
  Mat xi(b, cfg.state_dim);
  for (Eigen::Index r = 0; r < b; ++r)
    xi.row(r) =
        (1.0 - batch.t(r)) * batch.z.row(r) + batch.t(r) * batch.x.row(r);
  const Mat target = batch.x - batch.z;

  auto layers = detail::map_layers(cfg, params);
  const std::size_t n_layers = layers.size();

  std::vector<Mat> acts;     // inputs to each layer
  std::vector<Mat> pre;      // hidden pre-activations
  acts.reserve(n_layers + 1);
  pre.reserve(n_layers - 1);

  acts.push_back(assemble_input(cfg, xi, batch.y, batch.t));
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    Mat p = (acts.back() * layers[l].weight).rowwise() +
            layers[l].bias.transpose();
    pre.push_back(p);
    detail::apply_activation(cfg.activation, p);
    acts.push_back(std::move(p));
  }
  Mat out = (acts.back() * layers.back().weight).rowwise() +
            layers.back().bias.transpose();

  const Mat residual = out - target;
  const double loss = residual.squaredNorm() / static_cast<double>(b);

  Vec grad = Vec::Zero(params.size());
  auto gviews = detail::map_layers(cfg, grad);

  Mat delta = (2.0 / static_cast<double>(b)) * residual;
  for (std::size_t l = n_layers; l-- > 0;) {
    gviews[l].weight = acts[l].transpose() * delta;
    gviews[l].bias = delta.colwise().sum();
    if (l > 0) {
      delta = (delta * layers[l].weight.transpose()).array() *
              detail::activation_grad(cfg.activation, pre[l - 1]).array();
    }
  }
  return {loss, std::move(grad)};
}

}  // namespace cfm
