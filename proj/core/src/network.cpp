#include "reprdyn/network.hpp"

#include <cmath>

namespace reprdyn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "leaky_relu";
    case Activation::ELU: return "elu";
    case Activation::Tanh: return "tanh";
    case Activation::Swish: return "swish";
  }
  return "?";
}

std::optional<Activation> parse_activation(std::string_view name) {
  for (Activation a : {Activation::Linear, Activation::ReLU, Activation::LeakyReLU,
                       Activation::ELU, Activation::Tanh, Activation::Swish}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::SGD ? "sgd" : "adam"; }

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::SGD;
  if (name == "adam") return OptimizerKind::Adam;
  return std::nullopt;
}

int NetworkConfig::probe_layer() const {
  if (hidden_index) return *hidden_index;
  return std::max(1, hidden_layers / 2);
}

void NetworkConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) throw NetworkError("network: dimensions must be positive");
  if (hidden_layers < 1 || units < 1) {
    throw NetworkError("network: hidden_layers and units must be positive");
  }
  if (!(init_gain >= 0.0)) throw NetworkError("network: init_gain must be non-negative");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw NetworkError("network: dropout_p must be in [0, 1)");
  const int h = probe_layer();
  if (h < 1 || h > hidden_layers) {
    throw NetworkError("network: hidden_index must lie in [1, hidden_layers]");
  }
}

void TrainSchedule::validate() const {
  if (!(learning_rate >= 0.0)) throw NetworkError("schedule: learning_rate must be non-negative");
  if (epochs < 0) throw NetworkError("schedule: epochs must be non-negative");
  if (record_every < 1) throw NetworkError("schedule: record_every must be positive");
  if (epochs > 0 && record_every > epochs) {
    throw NetworkError("schedule: record_every must not exceed epochs");
  }
  if (optimizer.kind == OptimizerKind::Adam &&
      !(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 &&
        optimizer.beta2 < 1.0 && optimizer.epsilon > 0.0)) {
    throw NetworkError("schedule: invalid Adam hyperparameters");
  }
}

namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Linear: return z;
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::LeakyReLU:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Activation::ELU:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kEluAlpha * std::expm1(v); });
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Swish:
      return z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
  }
  return z;
}

Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::ReLU: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::LeakyReLU:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
    case Activation::ELU:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kEluAlpha * std::exp(v); });
    case Activation::Tanh:
      return z.unaryExpr([](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
    case Activation::Swish:
      return z.unaryExpr([](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s + v * s * (1.0 - s);
      });
  }
  return z;
}

}  // namespace

Network::Network(const NetworkConfig& config) : config_(config) {
  config_.validate();
  const int L = config_.hidden_layers;
  layers_.resize(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l) {
    const int fan_in = l == 0 ? config_.input_dim : config_.units;
    const int fan_out = l == L ? config_.output_dim : config_.units;
    const double sigma = config_.init_gain * std::sqrt(2.0 / (fan_in + fan_out));
    Pcg32 rng(config_.seed, static_cast<std::uint64_t>(l) + 1);
    DenseLayer& layer = layers_[static_cast<std::size_t>(l)];
    layer.weight.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = sigma * rng.normal();
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
  }
  check_shapes();
}

Network::Network(const NetworkConfig& config, std::vector<DenseLayer> layers)
    : config_(config), layers_(std::move(layers)) {
  config_.validate();
  check_shapes();
}

void Network::check_shapes() const {
  const int L = config_.hidden_layers;
  if (layers_.size() != static_cast<std::size_t>(L) + 1) {
    throw NetworkError("network: expected hidden_layers + 1 affine layers");
  }
  if (layers_.front().weight.cols() != config_.input_dim) {
    throw NetworkError("network: first layer does not match input_dim");
  }
  if (layers_.back().weight.rows() != config_.output_dim) {
    throw NetworkError("network: readout does not match output_dim");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows()) {
      throw NetworkError("network: bias length mismatch at layer " + std::to_string(l));
    }
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
      throw NetworkError("network: width mismatch between layers " + std::to_string(l - 1) +
                         " and " + std::to_string(l));
    }
  }
  if (config_.skip_connections) {
    // a_l += a_{l-2} for hidden layers l >= 3; a_l has width rows(layers_[l-1]).
    for (int l = 3; l <= L; ++l) {
      if (layers_[static_cast<std::size_t>(l - 1)].weight.rows() !=
          layers_[static_cast<std::size_t>(l - 3)].weight.rows()) {
        throw NetworkError("network: skip connection into layer " + std::to_string(l) +
                           " joins layers of different width");
      }
    }
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return n;
}

ForwardCache Network::forward_batch(const Eigen::MatrixXd& x, const DropoutMasks* masks) const {
  if (x.rows() != config_.input_dim) throw NetworkError("forward: input dimension mismatch");
  const int L = config_.hidden_layers;
  ForwardCache c;
  c.pre.resize(static_cast<std::size_t>(L) + 1);
  c.post.resize(static_cast<std::size_t>(L) + 1);
  c.post[0] = x;
  for (int l = 1; l <= L; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    const DenseLayer& layer = layers_[ul - 1];
    c.pre[ul] = (layer.weight * c.post[ul - 1]).colwise() + layer.bias;
    c.post[ul] = activate(config_.activation, c.pre[ul]);
    if (config_.skip_connections && l >= 3) c.post[ul] += c.post[ul - 2];
    if (masks != nullptr) c.post[ul].array() *= (*masks)[ul].array();
  }
  const DenseLayer& readout = layers_.back();
  c.output = (readout.weight * c.post[static_cast<std::size_t>(L)]).colwise() + readout.bias;
  return c;
}

Eigen::MatrixXd Network::hidden(const Eigen::MatrixXd& x) const {
  return forward_batch(x).post[static_cast<std::size_t>(config_.probe_layer())];
}

Eigen::MatrixXd Network::output(const Eigen::MatrixXd& x) const { return forward_batch(x).output; }

Gradients Network::backward(const ForwardCache& c, const Eigen::MatrixXd& targets,
                            const DropoutMasks* masks) const {
  const int L = config_.hidden_layers;
  const auto n = static_cast<double>(targets.cols());
  if (targets.rows() != c.output.rows() || targets.cols() != c.output.cols()) {
    throw NetworkError("backward: target shape mismatch");
  }
  Gradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());

  const Eigen::MatrixXd g_out = (c.output - targets) / n;
  const auto uL = static_cast<std::size_t>(L);
  g.weight[uL] = g_out * c.post[uL].transpose();
  g.bias[uL] = g_out.rowwise().sum();

  // g_post[l] accumulates dLoss/da_l from the layer above and from skips.
  std::vector<Eigen::MatrixXd> g_post(uL + 1);
  g_post[uL] = layers_[uL].weight.transpose() * g_out;
  for (int l = L; l >= 1; --l) {
    const auto ul = static_cast<std::size_t>(l);
    Eigen::MatrixXd g_u = g_post[ul];
    if (masks != nullptr) g_u.array() *= (*masks)[ul].array();
    if (config_.skip_connections && l >= 3) {
      if (g_post[ul - 2].size() == 0) {
        g_post[ul - 2] = g_u;
      } else {
        g_post[ul - 2] += g_u;
      }
    }
    const Eigen::MatrixXd g_z =
        (g_u.array() * activation_derivative(config_.activation, c.pre[ul]).array()).matrix();
    g.weight[ul - 1] = g_z * c.post[ul - 1].transpose();
    g.bias[ul - 1] = g_z.rowwise().sum();
    if (l >= 2) {
      Eigen::MatrixXd down = layers_[ul - 1].weight.transpose() * g_z;
      if (g_post[ul - 1].size() == 0) {
        g_post[ul - 1] = std::move(down);
      } else {
        g_post[ul - 1] += down;
      }
    }
  }
  return g;
}

DropoutMasks Network::sample_masks(Eigen::Index batch, Pcg32& rng) const {
  const int L = config_.hidden_layers;
  const double p = config_.dropout_p;
  const double keep_scale = 1.0 / (1.0 - p);
  DropoutMasks masks(static_cast<std::size_t>(L) + 1);
  for (int l = 1; l <= L; ++l) {
    const Eigen::Index width = layers_[static_cast<std::size_t>(l - 1)].weight.rows();
    Eigen::MatrixXd m(width, batch);
    for (Eigen::Index s = 0; s < batch; ++s) {
      for (Eigen::Index r = 0; r < width; ++r) m(r, s) = rng.uniform() < p ? 0.0 : keep_scale;
    }
    masks[static_cast<std::size_t>(l)] = std::move(m);
  }
  return masks;
}

bool operator==(const Network& a, const Network& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& la = a.layers_[l];
    const auto& lb = b.layers_[l];
    if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols()) return false;
    if (la.weight != lb.weight || la.bias != lb.bias) return false;
  }
  return true;
}

Network build_network(const NetworkConfig& config) { return Network(config); }

ForwardResult forward(const Network& net, const Eigen::VectorXd& x, bool train_mode, Pcg32* rng) {
  DropoutMasks masks;
  const bool use_masks = train_mode && net.config().dropout_p > 0.0;
  if (use_masks) {
    if (rng == nullptr) throw NetworkError("forward: train mode with dropout needs an rng");
    masks = net.sample_masks(1, *rng);
  }
  const ForwardCache c = net.forward_batch(x, use_masks ? &masks : nullptr);
  return {c.post[static_cast<std::size_t>(net.config().probe_layer())].col(0), c.output.col(0)};
}

double mse_loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets) {
  return 0.5 * (predictions - targets).squaredNorm() / static_cast<double>(targets.cols());
}

TrainState TrainState::for_network(const Network& net) {
  TrainState s;
  for (const auto& layer : net.layers()) {
    s.m_weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    s.v_weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    s.m_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    s.v_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  s.dropout_rng = Pcg32(net.config().seed, 0);
  return s;
}

double train_step(Network& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  const TrainSchedule& schedule, TrainState& state) {
  if (inputs.cols() == 0) throw NetworkError("train_step: empty batch");
  DropoutMasks masks;
  const bool use_masks = net.config().dropout_p > 0.0;
  if (use_masks) masks = net.sample_masks(inputs.cols(), state.dropout_rng);
  const DropoutMasks* mp = use_masks ? &masks : nullptr;

  const ForwardCache cache = net.forward_batch(inputs, mp);
  const double loss = mse_loss(cache.output, targets);
  if (!std::isfinite(loss)) {
    throw DivergenceError("training diverged: non-finite loss", static_cast<int>(state.step));
  }
  const Gradients g = net.backward(cache, targets, mp);
  const double lr = schedule.learning_rate;
  auto& layers = net.layers();
  ++state.step;

  if (schedule.optimizer.kind == OptimizerKind::SGD) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weight -= lr * g.weight[l];
      layers[l].bias -= lr * g.bias[l];
    }
    return loss;
  }

  const double b1 = schedule.optimizer.beta1;
  const double b2 = schedule.optimizer.beta2;
  const double eps = schedule.optimizer.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto adam = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam(layers[l].weight, g.weight[l], state.m_weight[l], state.v_weight[l]);
    adam(layers[l].bias, g.bias[l], state.m_bias[l], state.v_bias[l]);
  }
  return loss;
}

TrainingRecord train(Network& net, const Dataset& data, const TrainSchedule& schedule,
                     const Probe& probe) {
  schedule.validate();
  data.validate();
  if (data.size() == 0) throw NetworkError("train: empty dataset");
  TrainState state = TrainState::for_network(net);
  TrainingRecord rec;

  auto record = [&](int epoch) {
    const double loss = mse_loss(net.output(data.inputs), data.targets);
    if (!std::isfinite(loss)) throw DivergenceError("training diverged: non-finite loss", epoch);
    rec.epochs.push_back(epoch);
    rec.loss.push_back(loss);
    if (probe) rec.probes.push_back(probe(net));
  };

  record(0);
  for (int e = 1; e <= schedule.epochs; ++e) {
    train_step(net, data.inputs, data.targets, schedule, state);
    if (e % schedule.record_every == 0 || e == schedule.epochs) record(e);
  }
  return rec;
}

}  // namespace reprdyn
