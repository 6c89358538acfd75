#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "visitrl/env.hpp"
#include "visitrl/nnet.hpp"
#include "visitrl/rollout.hpp"
#include "visitrl/rng.hpp"

namespace visitrl {

/// Parametric model of the discounted conditional future-state distribution.
/// A shared trunk MLP maps concat(one-hot state, one-hot action) to logits
/// that are split into one categorical head per state component, so a future
/// state's probability factorizes over its components. A target copy of the
/// parameters serves bootstrap target generation; with tau = 1 the update is
/// a hard copy.
class FactoredVisitationNet {
 public:
  FactoredVisitationNet(int state_dim, int action_count, std::vector<int> head_widths,
                        int hidden_width, int hidden_layers, double tau, Rng& rng);

  static FactoredVisitationNet for_env(const DiscreteEnv& env, int hidden_width,
                                       int hidden_layers, double tau, Rng& rng);

  int input_dim() const { return state_dim_ + action_count_; }
  int state_dim() const { return state_dim_; }
  int action_count() const { return action_count_; }
  int head_count() const { return static_cast<int>(head_widths_.size()); }
  const std::vector<int>& head_widths() const { return head_widths_; }

  Mlp& online() { return pair_.online; }
  const Mlp& online() const { return pair_.online; }
  Mlp& target() { return pair_.target; }
  const Mlp& target() const { return pair_.target; }
  double tau() const { return pair_.tau; }
  void update_target() { pair_.update(); }

  /// Per-head probability vectors for the given trunk input.
  std::vector<Eigen::VectorXd> head_probs(const Eigen::VectorXd& input,
                                          bool use_target = false) const;

  /// One independent draw per head.
  std::vector<int> sample_components(const Eigen::VectorXd& input, bool use_target,
                                     Rng& rng) const;

  /// Sum of per-head log probabilities of the given components.
  double log_prob_components(const Eigen::VectorXd& input, std::span<const int> components,
                             bool use_target = false) const;

 private:
  int state_dim_ = 0;
  int action_count_ = 0;
  std::vector<int> head_widths_;
  std::vector<int> head_offsets_;
  TargetPair pair_;
};

/// concat(one-hot state, one-hot action) trunk input.
Eigen::VectorXd sa_input(const DiscreteEnv& env, int state, int action);

/// Delta >= 1 with P(delta = k) = (1 - gamma) gamma^(k-1).
int sample_geometric(double gamma, Rng& rng);

/// Future-state sampling and density through the factored model.
std::vector<int> sample_future_state(const FactoredVisitationNet& net, const DiscreteEnv& env,
                                     int state, int action, bool use_target, Rng& rng);
double log_prob_future(const FactoredVisitationNet& net, const DiscreteEnv& env, int state,
                       int action, std::span<const int> future_components,
                       bool use_target = false);

/// One cross-entropy training target drawn from the geometric mixture: a real
/// in-window state when delta lands inside the window's surviving steps, a
/// draw from the target network at the window's last usable state otherwise.
/// Bootstrap anchors that are absorbing resolve to their own components (the
/// continuation there is a point mass, no model query needed).
struct BootstrapTargetSample {
  int head_state = 0;
  int head_action = 0;
  int delta = 0;
  std::vector<int> target_components;
  bool bootstrapped = false;
};

BootstrapTargetSample make_target(const NStepSegment& segment, const DiscreteEnv& env,
                                  const PolicyFn& policy, const FactoredVisitationNet& net,
                                  double gamma, Rng& rng);

struct VisitationBatch {
  Eigen::MatrixXd inputs;  // input_dim x batch
  std::vector<std::vector<int>> target_components;

  int size() const { return static_cast<int>(target_components.size()); }
};

VisitationBatch prepare_visitation_batch(const std::vector<NStepSegment>& segments,
                                         const DiscreteEnv& env, const PolicyFn& policy,
                                         const FactoredVisitationNet& net, double gamma,
                                         Rng& rng);

/// Mean over the batch of -log d(target | head); the gradient only flows
/// through the online parameters, targets are fixed data.
double visitation_loss(const FactoredVisitationNet& net, const VisitationBatch& batch);
double visitation_loss_and_grad(const FactoredVisitationNet& net, const VisitationBatch& batch,
                                MlpGrads& grads);

/// Samples a batch from the buffer, builds targets and takes one Adam step.
/// Returns the batch loss.
double visitation_train_step(FactoredVisitationNet& net, AdamOptimizer& optimizer,
                             const ReplayBuffer& buffer, int batch_size,
                             const DiscreteEnv& env, const PolicyFn& policy, double gamma,
                             Rng& rng);

}  // namespace visitrl
