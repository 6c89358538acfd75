#include "visitrl/intrinsic.hpp"

#include <cmath>
#include <stdexcept>

namespace visitrl {

FeatureChannel::FeatureChannel(std::string name, double lambda, Eigen::VectorXd qstar)
    : name_(std::move(name)), lambda_(lambda), qstar_(std::move(qstar)) {
  if (lambda_ < 0.0) throw std::invalid_argument("FeatureChannel: lambda must be >= 0");
  if (qstar_.size() == 0) throw std::invalid_argument("FeatureChannel: empty feature space");
  if ((qstar_.array() <= 0.0).any())
    throw std::invalid_argument("FeatureChannel: q* must be strictly positive on Z");
  if (std::abs(qstar_.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("FeatureChannel: q* must sum to 1");
  log_qstar_ = qstar_.array().log();
}

double FeatureChannel::log_qstar(int z) const {
  if (z < 0 || z >= feature_count())
    throw std::out_of_range("FeatureChannel::log_qstar: feature outside Z");
  return log_qstar_[z];
}

double intrinsic_reward(const FeatureChannel& channel, const FeatureSample& sample) {
  return channel.log_qstar(sample.z) - sample.log_q;
}

Eigen::VectorXd exact_feature_distribution(const FeatureChannel& channel,
                                           const TabularPolicy& policy,
                                           const ConditionalVisitation& visitation, int state,
                                           int action) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(channel.feature_count());
  for (int future = 0; future < visitation.state_count(); ++future) {
    const double p_future = visitation.prob(state, action, future);
    if (p_future == 0.0) continue;
    for (int a2 = 0; a2 < visitation.action_count(); ++a2) {
      const double mass = p_future * policy.prob(future, a2);
      if (mass == 0.0) continue;
      const int z = channel.feature_of(future, a2);
      if (z < 0 || z >= channel.feature_count())
        throw std::logic_error("exact_feature_distribution: feature map left Z");
      q[z] += mass;
    }
  }
  return q;
}

Eigen::MatrixXd exact_kl_reward(const FeatureChannel& channel, const TabularMdp& mdp,
                                const TabularPolicy& policy) {
  const ConditionalVisitation d = exact_visitation(mdp, policy);
  Eigen::MatrixXd reward(mdp.state_count(), mdp.action_count());
  for (int s = 0; s < mdp.state_count(); ++s)
    for (int a = 0; a < mdp.action_count(); ++a) {
      const Eigen::VectorXd q = exact_feature_distribution(channel, policy, d, s, a);
      double neg_kl = 0.0;
      for (int z = 0; z < q.size(); ++z) {
        if (q[z] <= 0.0) continue;
        if (channel.qstar()[z] <= 0.0)
          throw std::runtime_error("exact_kl_reward: q puts mass outside the support of q*");
        neg_kl += q[z] * (channel.log_qstar(z) - std::log(q[z]));
      }
      reward(s, a) = neg_kl;
    }
  return reward;
}

namespace {

/// Shared geometry for position-feature channels over a grid.
class PositionFeatureBase : public FeatureChannel {
 public:
  PositionFeatureBase(std::string name, const GridEnv& env, double lambda)
      : FeatureChannel(std::move(name), lambda,
                       Eigen::VectorXd::Constant(env.cell_count(), 1.0 / env.cell_count())),
        env_(&env) {}

  int feature_of(int state, int /*action*/) const override {
    return env_->cell_index(env_->agent_position(state));
  }

 protected:
  const GridEnv* env_;
};

class ConditionalPositionChannel final : public PositionFeatureBase {
 public:
  ConditionalPositionChannel(const GridEnv& env, double lambda)
      : PositionFeatureBase("cv-position", env, lambda) {}

  // The factored model can emit wall coordinates; such samples fall outside
  // Z and read q* at the same uniform level, keeping the reward finite and
  // the additive constant unchanged.
  double log_qstar(int z) const override {
    (void)z;
    return -std::log(static_cast<double>(feature_count()));
  }

  FeatureSample sample_feature(const ChannelContext& ctx, Rng& rng) const override {
    if (ctx.visitation == nullptr)
      throw std::invalid_argument("cv-position: needs the visitation model");
    // h depends only on the agent position, so only the x and y heads of the
    // factored model are involved; their product is the closed-form q(z|s,a).
    const auto probs = ctx.visitation->head_probs(sa_input(ctx.env, ctx.state, ctx.action));
    const int x = rng.categorical(probs[0]);
    const int y = rng.categorical(probs[1]);
    FeatureSample sample;
    sample.z = env_->cell_index({x, y});
    sample.log_q = std::log(probs[0][x]) + std::log(probs[1][y]);
    return sample;
  }
};

class MarginalPositionChannel final : public PositionFeatureBase {
 public:
  MarginalPositionChannel(const GridEnv& env, double lambda)
      : PositionFeatureBase("mv-position", env, lambda) {}

  FeatureSample sample_feature(const ChannelContext& ctx, Rng& rng) const override {
    if (ctx.segment == nullptr || ctx.marginal_log_probs == nullptr)
      throw std::invalid_argument("mv-position: needs a segment and the marginal model");
    const int valid = ctx.segment->valid_steps();
    const int delta = rng.truncated_geometric(ctx.gamma, valid);
    FeatureSample sample;
    sample.z = feature_of(ctx.segment->states[static_cast<std::size_t>(delta)], 0);
    sample.log_q = (*ctx.marginal_log_probs)[sample.z];
    return sample;
  }
};

class PolicyEntropyChannel final : public FeatureChannel {
 public:
  PolicyEntropyChannel(int n_actions, double lambda)
      : FeatureChannel("policy-entropy", lambda,
                       Eigen::VectorXd::Constant(n_actions, 1.0 / n_actions)) {}

  int feature_of(int /*state*/, int action) const override { return action; }

  FeatureSample sample_feature(const ChannelContext& ctx, Rng& rng) const override {
    if (ctx.policy == nullptr)
      throw std::invalid_argument("policy-entropy: needs the policy");
    const Eigen::VectorXd probs = (*ctx.policy)(ctx.state);
    FeatureSample sample;
    sample.z = rng.categorical(probs);
    sample.log_q = std::log(probs[sample.z]);
    return sample;
  }
};

class IdentityChannel final : public FeatureChannel {
 public:
  IdentityChannel(int n_states, double lambda)
      : FeatureChannel("identity", lambda,
                       Eigen::VectorXd::Constant(n_states, 1.0 / n_states)) {}

  int feature_of(int state, int /*action*/) const override { return state; }

  FeatureSample sample_feature(const ChannelContext& ctx, Rng& rng) const override {
    if (ctx.visitation == nullptr)
      throw std::invalid_argument("identity: needs the visitation model");
    if (ctx.visitation->head_count() != 1)
      throw std::invalid_argument("identity: needs a single-block state space");
    const auto probs = ctx.visitation->head_probs(sa_input(ctx.env, ctx.state, ctx.action));
    FeatureSample sample;
    sample.z = rng.categorical(probs[0]);
    sample.log_q = std::log(probs[0][sample.z]);
    return sample;
  }
};

}  // namespace

std::unique_ptr<FeatureChannel> make_position_channel(const GridEnv& env, double lambda) {
  return std::make_unique<ConditionalPositionChannel>(env, lambda);
}

std::unique_ptr<FeatureChannel> make_marginal_position_channel(const GridEnv& env,
                                                               double lambda) {
  return std::make_unique<MarginalPositionChannel>(env, lambda);
}

std::unique_ptr<FeatureChannel> make_policy_entropy_channel(int n_actions, double lambda) {
  return std::make_unique<PolicyEntropyChannel>(n_actions, lambda);
}

std::unique_ptr<FeatureChannel> make_identity_channel(int n_states, double lambda) {
  return std::make_unique<IdentityChannel>(n_states, lambda);
}

std::unique_ptr<FeatureChannel> make_channel(const std::string& key, const DiscreteEnv& env,
                                             double lambda) {
  if (key == "none") return nullptr;
  if (key == "policy-entropy") return make_policy_entropy_channel(env.action_count(), lambda);
  const auto* grid = dynamic_cast<const GridEnv*>(&env);
  if (key == "cv-position" || key == "mv-position") {
    if (grid == nullptr)
      throw std::invalid_argument("channel '" + key + "' requires a grid environment");
    return key == "cv-position" ? make_position_channel(*grid, lambda)
                                : make_marginal_position_channel(*grid, lambda);
  }
  throw std::invalid_argument("unknown channel key: " + key);
}

}  // namespace visitrl
