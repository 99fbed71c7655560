#pragma once

// Dense feed-forward network with an affine readout, trained full-batch on a
// mean-squared-error loss. Double precision throughout.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "reprdyn/datasets.hpp"
#include "reprdyn/pair_observation.hpp"
#include "reprdyn/rng.hpp"

namespace reprdyn {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the training loss becomes non-finite.
class DivergenceError : public NetworkError {
 public:
  DivergenceError(const std::string& what, int epoch) : NetworkError(what), epoch_(epoch) {}
  [[nodiscard]] int epoch() const { return epoch_; }

 private:
  int epoch_;
};

enum class Activation { Linear, ReLU, LeakyReLU, ELU, Tanh, Swish };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kEluAlpha = 1.0;

std::string_view to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

struct NetworkConfig {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_layers = 8;
  int units = 100;
  Activation activation = Activation::LeakyReLU;
  double init_gain = 1.0;
  bool skip_connections = false;
  double dropout_p = 0.0;
  std::optional<int> hidden_index;  ///< probe layer H; defaults to floor(hidden_layers/2)
  std::uint64_t seed = 0;

  [[nodiscard]] int probe_layer() const;
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  ///< out x in
  Eigen::VectorXd bias;
};

/// Per-hidden-layer dropout multipliers (0 or 1/(1-p)), one column per sample.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

/// Everything backprop needs from a forward pass over a batch.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;   ///< pre[l] = z_l, l = 1..L (index 0 unused)
  std::vector<Eigen::MatrixXd> post;  ///< post[0] = X, post[l] = a_l
  Eigen::MatrixXd output;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
};

class Network {
 public:
  /// Xavier-normal weights with the configured gain, zero biases.
  explicit Network(const NetworkConfig& config);
  /// Explicit parameters; shapes are checked against each other.
  Network(const NetworkConfig& config, std::vector<DenseLayer> layers);

  [[nodiscard]] const NetworkConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
  [[nodiscard]] std::vector<DenseLayer>& layers() { return layers_; }
  [[nodiscard]] std::size_t parameter_count() const;

  /// Batch forward pass. Without masks the pass is in eval mode.
  [[nodiscard]] ForwardCache forward_batch(const Eigen::MatrixXd& x,
                                           const DropoutMasks* masks = nullptr) const;

  /// Eval-mode probe-layer activations, one column per sample.
  [[nodiscard]] Eigen::MatrixXd hidden(const Eigen::MatrixXd& x) const;
  /// Eval-mode outputs, one column per sample.
  [[nodiscard]] Eigen::MatrixXd output(const Eigen::MatrixXd& x) const;

  /// Gradient of 1/2 <||f(x) - y||^2> for a cached forward pass.
  [[nodiscard]] Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& targets,
                                   const DropoutMasks* masks = nullptr) const;

  [[nodiscard]] DropoutMasks sample_masks(Eigen::Index batch, Pcg32& rng) const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  void check_shapes() const;

  NetworkConfig config_;
  std::vector<DenseLayer> layers_;  ///< layers_[l] maps a_l to z_{l+1}; the last is the readout
};

/// Same as the constructor; named for symmetry with the other operations.
Network build_network(const NetworkConfig& config);

struct ForwardResult {
  Eigen::VectorXd hidden;  ///< post-activation at the probe layer
  Eigen::VectorXd output;
};

/// Single-sample forward pass. Dropout is applied only in train mode, with
/// masks drawn from `rng`.
ForwardResult forward(const Network& net, const Eigen::VectorXd& x, bool train_mode = false,
                      Pcg32* rng = nullptr);

double mse_loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets);

enum class OptimizerKind { SGD, Adam };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::SGD;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

std::string_view to_string(OptimizerKind k);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

struct TrainSchedule {
  double learning_rate = 0.005;
  int epochs = 1000;
  OptimizerSpec optimizer;
  int record_every = 1;

  void validate() const;
};

/// Adam moments, step counter and the dropout stream.
struct TrainState {
  std::vector<Eigen::MatrixXd> m_weight, v_weight;
  std::vector<Eigen::VectorXd> m_bias, v_bias;
  long long step = 0;
  Pcg32 dropout_rng;

  static TrainState for_network(const Network& net);
};

/// One full-batch optimizer update. Returns the (train-mode) loss before it.
double train_step(Network& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  const TrainSchedule& schedule, TrainState& state);

using Probe = std::function<PairObservation(const Network&)>;

struct TrainingRecord {
  std::vector<int> epochs;        ///< recorded epochs: 0, k, 2k, ..., and the last
  std::vector<double> loss;       ///< eval-mode dataset loss at each recorded epoch
  std::vector<PairObservation> probes;  ///< empty when no probe was given
};

/// Runs `schedule.epochs` full-batch steps, recording every `record_every`
/// epochs and after the final one. Throws DivergenceError on a non-finite loss.
TrainingRecord train(Network& net, const Dataset& data, const TrainSchedule& schedule,
                     const Probe& probe = {});

}  // namespace reprdyn
