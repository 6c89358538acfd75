#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "visitrl/rng.hpp"

namespace visitrl {

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  void set_zero();
  void scale(double factor);
  std::size_t parameter_count() const;
};

/// Forward-pass activations kept for the backward pass. Batches are stored
/// one column per sample.
struct MlpCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre_activation;
  std::vector<Eigen::MatrixXd> activation;
};

/// Fully connected network: ReLU after every hidden layer, linear output.
/// Double precision throughout; gradients are exact reverse-mode.
class Mlp {
 public:
  Mlp() = default;

  /// layer_widths lists the hidden widths followed by the output width.
  /// Parameters use uniform fan-in initialization, U(-1/sqrt(in), 1/sqrt(in)).
  Mlp(int input_dim, const std::vector<int>& layer_widths, Rng& rng);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  int layer_count() const { return static_cast<int>(weights_.size()); }

  Eigen::MatrixXd& weight(int layer) { return weights_[static_cast<std::size_t>(layer)]; }
  const Eigen::MatrixXd& weight(int layer) const { return weights_[static_cast<std::size_t>(layer)]; }
  Eigen::VectorXd& bias(int layer) { return biases_[static_cast<std::size_t>(layer)]; }
  const Eigen::VectorXd& bias(int layer) const { return biases_[static_cast<std::size_t>(layer)]; }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd forward_cached(const Eigen::MatrixXd& inputs, MlpCache& cache) const;

  /// Accumulates parameter gradients for dL/d(output) into grads, which must
  /// either be empty (it is shaped and zeroed) or already match this network.
  void backward(const MlpCache& cache, const Eigen::MatrixXd& output_grad,
                MlpGrads& grads) const;

  MlpGrads zero_grads() const;

  std::size_t parameter_count() const;
  double parameter(std::size_t index) const;
  void set_parameter(std::size_t index, double value);
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& params);

  bool same_shape(const Mlp& other) const;
  friend bool operator==(const Mlp&, const Mlp&);

 private:
  int input_dim_ = 0;
  std::vector<Eigen::MatrixXd> weights_;  // layer i: out x in
  std::vector<Eigen::VectorXd> biases_;
};

/// Numerically stable softmax helpers.
double log_sum_exp(const Eigen::VectorXd& v);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

/// params -= lr * grads.
void sgd_step(Mlp& net, const MlpGrads& grads, double learning_rate);

/// Adam with bias correction; state is per-network.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const Mlp& net, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  void step(Mlp& net, const MlpGrads& grads);
  double learning_rate() const { return learning_rate_; }

 private:
  double learning_rate_ = 1e-3;
  double beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8;
  long step_count_ = 0;
  MlpGrads m_, v_;
};

/// target <- tau * online + (1 - tau) * target, elementwise.
void polyak_update(Mlp& target, const Mlp& online, double tau);

/// Online/target parameter pair with its averaging weight.
struct TargetPair {
  Mlp online;
  Mlp target;
  double tau = 1.0;

  TargetPair() = default;
  TargetPair(Mlp net, double tau_) : online(net), target(std::move(net)), tau(tau_) {}
  void update() { polyak_update(target, online, tau); }
};

}  // namespace visitrl
