#pragma once

#include <memory>
#include <string>

#include <Eigen/Dense>

#include "visitrl/gridworld.hpp"
#include "visitrl/oracle.hpp"
#include "visitrl/rollout.hpp"
#include "visitrl/visitation.hpp"

namespace visitrl {

/// One draw z ~ q(.|s,a) together with the model log-probability of that
/// draw. z is an index into the channel's feature space, or -1 when a
/// factored model emitted a component combination outside it.
struct FeatureSample {
  int z = -1;
  double log_q = 0.0;
};

/// Everything a channel may need to sample a feature for a batch element.
/// Pointers are optional; each channel documents what it reads.
struct ChannelContext {
  const DiscreteEnv& env;
  int state = 0;
  int action = 0;
  const PolicyFn* policy = nullptr;
  const FactoredVisitationNet* visitation = nullptr;
  const NStepSegment* segment = nullptr;
  const Eigen::VectorXd* marginal_log_probs = nullptr;
  double gamma = 0.0;
};

/// A feature map h over state-action pairs plus a reference measure q* over
/// the finite feature space and the intrinsic-reward weight lambda.
class FeatureChannel {
 public:
  FeatureChannel(std::string name, double lambda, Eigen::VectorXd qstar);
  virtual ~FeatureChannel() = default;

  const std::string& name() const { return name_; }
  int feature_count() const { return static_cast<int>(qstar_.size()); }
  double lambda() const { return lambda_; }
  void set_lambda(double lambda) { lambda_ = lambda; }
  const Eigen::VectorXd& qstar() const { return qstar_; }

  virtual double log_qstar(int z) const;

  /// Deterministic feature map h.
  virtual int feature_of(int state, int action) const = 0;

  /// Draws z ~ q(.|s,a) under the channel's model of the feature
  /// distribution and returns its log-probability under that same model.
  virtual FeatureSample sample_feature(const ChannelContext& ctx, Rng& rng) const = 0;

 protected:
  std::string name_;
  double lambda_ = 0.0;
  Eigen::VectorXd qstar_;
  Eigen::VectorXd log_qstar_;
};

/// log q*(z) - log q(z|s,a), the single-sample estimate of the negative KL
/// divergence from the reference measure.
double intrinsic_reward(const FeatureChannel& channel, const FeatureSample& sample);

/// Exact feature distribution q(z|s,a) induced by a conditional visitation
/// table: pushes d(sbar|s,a) pi(abar|sbar) through the channel's feature map.
Eigen::VectorXd exact_feature_distribution(const FeatureChannel& channel,
                                           const TabularPolicy& policy,
                                           const ConditionalVisitation& visitation, int state,
                                           int action);

/// Exact intrinsic reward table: -KL(q(.|s,a) || q*) for every (s,a).
/// Throws when q puts mass outside the support of q*.
Eigen::MatrixXd exact_kl_reward(const FeatureChannel& channel, const TabularMdp& mdp,
                                const TabularPolicy& policy);

/// Conditional-visitation position channel ("cv-position"): z is the agent
/// cell of a future state drawn from the visitation model; its probability is
/// the product of the x-head and y-head probabilities. Samples landing on
/// wall cells are possible under the factored model; they carry z = -1 and
/// read q* at the same uniform level as in-support cells.
std::unique_ptr<FeatureChannel> make_position_channel(const GridEnv& env, double lambda);

/// Marginal position channel ("mv-position"): z is the agent cell of a
/// geometrically discounted future step inside the segment window; its
/// probability is read from a marginal feature model supplied through the
/// context.
std::unique_ptr<FeatureChannel> make_marginal_position_channel(const GridEnv& env,
                                                               double lambda);

/// Policy entropy channel ("policy-entropy"): Z is the action space and the
/// feature distribution is the policy itself, recovering the classic entropy
/// bonus up to the constant log(1/|A|).
std::unique_ptr<FeatureChannel> make_policy_entropy_channel(int n_actions, double lambda);

/// Identity channel over a tabular state space (Z = S, h(sbar, abar) = sbar);
/// used with single-block environments in oracles and tests.
std::unique_ptr<FeatureChannel> make_identity_channel(int n_states, double lambda);

/// Channel registry by config key: "cv-position", "mv-position",
/// "policy-entropy" or "none" (returns nullptr). Position channels require a
/// grid environment.
std::unique_ptr<FeatureChannel> make_channel(const std::string& key, const DiscreteEnv& env,
                                             double lambda);

}  // namespace visitrl
