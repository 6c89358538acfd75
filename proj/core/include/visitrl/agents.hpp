#pragma once

#include <memory>
#include <string>
#include <vector>

#include "visitrl/config.hpp"
#include "visitrl/env.hpp"
#include "visitrl/intrinsic.hpp"
#include "visitrl/nnet.hpp"
#include "visitrl/rollout.hpp"
#include "visitrl/visitation.hpp"

namespace visitrl {

/// Categorical policy head over the actions.
struct Actor {
  Mlp net;  // one-hot state -> action logits
  double lambda_sac = 0.0;

  Eigen::VectorXd action_probs(const DiscreteEnv& env, int state) const {
    return softmax(net.forward(env.encode(state)));
  }
  /// Policy view bound to this actor; reflects parameter updates. The actor
  /// and environment must outlive the returned function.
  PolicyFn policy_fn(const DiscreteEnv& env) const {
    return [this, &env](int state) { return action_probs(env, state); };
  }
};

/// Scalar state-action value network with its Polyak target.
struct Critic {
  TargetPair pair;

  double value(const DiscreteEnv& env, int state, int action, bool use_target = false) const {
    return (use_target ? pair.target : pair.online).forward(sa_input(env, state, action))[0];
  }
};

/// Categorical model of the marginal discounted feature measure, refit from
/// the buffer each iteration: every segment head at episode time t
/// contributes weight (1-gamma) gamma^t to its feature, plus Laplace
/// smoothing to keep the log finite.
class MarginalVisitationModel {
 public:
  MarginalVisitationModel(int feature_count, double smoothing);

  void refit(const ReplayBuffer& buffer, const FeatureChannel& channel, double gamma);

  const Eigen::VectorXd& probs() const { return probs_; }
  const Eigen::VectorXd& log_probs() const { return log_probs_; }
  double log_prob(int z) const { return log_probs_[z]; }

 private:
  double smoothing_;
  Eigen::VectorXd probs_;
  Eigen::VectorXd log_probs_;
};

// --- losses over frozen batches (targets and sampled actions are data) ---

struct CriticBatch {
  Eigen::MatrixXd inputs;    // sa_input per column
  Eigen::VectorXd targets;   // y per element
};

struct ActorBatch {
  Eigen::MatrixXd state_inputs;  // one-hot state per column
  std::vector<int> actions;      // freshly sampled a'
  Eigen::VectorXd advantages;    // A(s, a'), constant for gradients
};

double critic_loss(const Mlp& critic, const CriticBatch& batch);
double critic_loss_and_grad(const Mlp& critic, const CriticBatch& batch, MlpGrads& grads);
double actor_loss(const Mlp& actor, const ActorBatch& batch);
double actor_loss_and_grad(const Mlp& actor, const ActorBatch& batch, MlpGrads& grads);

/// Builds the critic regression targets
///   y = r + lambda R_int + gamma (Q'(s', a'') - lambda_sac log pi(a''|s'))
/// from the 1-step head transitions of the segments; the bootstrap term is
/// dropped at absorbing next states. The channel (when present) supplies
/// R_int with one feature sample per element.
CriticBatch prepare_critic_batch(const std::vector<NStepSegment>& segments,
                                 const DiscreteEnv& env, const Actor& actor,
                                 const Critic& critic, const FeatureChannel* channel,
                                 const FactoredVisitationNet* visitation,
                                 const MarginalVisitationModel* marginal,
                                 const ExperimentConfig& config, Rng& rng);

/// Samples a' ~ pi(.|s) per head state and freezes the advantage
/// A = Q(s, a') - lambda_sac log pi(a'|s) (log-trick surrogate).
ActorBatch prepare_actor_batch(const std::vector<NStepSegment>& segments,
                               const DiscreteEnv& env, const Actor& actor,
                               const Critic& critic, Rng& rng);

struct MetricRow {
  std::uint64_t seed = 0;
  int iteration = 0;
  double return_estimate = 0.0;
  double entropy_estimate = 0.0;
  double visitation_loss = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

struct TrainedArtifacts {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  Actor actor;
  Critic critic;
  FactoredVisitationNet visitation;
  Eigen::VectorXd marginal_probs;
  std::vector<MetricRow> metrics;
  std::string final_rng_state;
};

/// One full training run of the configured agent on the configured
/// environment. Deterministic in (config, seed): rerunning yields identical
/// metric logs and parameters.
TrainedArtifacts train_agent(const ExperimentConfig& config, std::uint64_t seed);
TrainedArtifacts train_agent(const ExperimentConfig& config, std::uint64_t seed,
                             const DiscreteEnv& env);

/// Named entry points for the three agents; they override config.agent.
TrainedArtifacts train_opac_cv(ExperimentConfig config, std::uint64_t seed);
TrainedArtifacts train_opac_mv(ExperimentConfig config, std::uint64_t seed);
TrainedArtifacts train_sac(ExperimentConfig config, std::uint64_t seed);

/// Checkpoint io for a finished run (parameters + config + rng state).
void save_artifacts(const TrainedArtifacts& artifacts, const std::string& path);
TrainedArtifacts load_artifacts(const std::string& path);

/// Builds the environment a config describes (grid registry + layout seed).
std::unique_ptr<DiscreteEnv> build_env(const ExperimentConfig& config);

/// The feature channel used for evaluation metrics on this environment:
/// agent positions on grids, state identity on tabular environments.
std::unique_ptr<FeatureChannel> metric_channel(const DiscreteEnv& env);

}  // namespace visitrl
