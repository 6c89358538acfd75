#include "visitrl/agents.hpp"

#include <cmath>
#include <stdexcept>

#include "visitrl/checkpoint.hpp"
#include "visitrl/eval.hpp"
#include "visitrl/gridworld.hpp"

namespace visitrl {

MarginalVisitationModel::MarginalVisitationModel(int feature_count, double smoothing)
    : smoothing_(smoothing) {
  if (feature_count < 1)
    throw std::invalid_argument("MarginalVisitationModel: empty feature space");
  if (smoothing_ <= 0.0)
    throw std::invalid_argument("MarginalVisitationModel: smoothing must be positive");
  probs_ = Eigen::VectorXd::Constant(feature_count, 1.0 / feature_count);
  log_probs_ = probs_.array().log();
}

void MarginalVisitationModel::refit(const ReplayBuffer& buffer, const FeatureChannel& channel,
                                    double gamma) {
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(probs_.size(), smoothing_);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const NStepSegment& seg = buffer.at(i);
    const int z = channel.feature_of(seg.states[0], seg.actions[0]);
    weights[z] += (1.0 - gamma) * std::pow(gamma, seg.start_time);
  }
  probs_ = weights / weights.sum();
  log_probs_ = probs_.array().log();
}

double critic_loss(const Mlp& critic, const CriticBatch& batch) {
  const Eigen::MatrixXd q = critic.forward(batch.inputs);
  return (q.row(0).transpose() - batch.targets).squaredNorm() /
         static_cast<double>(batch.targets.size());
}

double critic_loss_and_grad(const Mlp& critic, const CriticBatch& batch, MlpGrads& grads) {
  MlpCache cache;
  const Eigen::MatrixXd q = critic.forward_cached(batch.inputs, cache);
  const Eigen::VectorXd residual = q.row(0).transpose() - batch.targets;
  const double inv_batch = 1.0 / static_cast<double>(batch.targets.size());
  critic.backward(cache, (2.0 * inv_batch) * residual.transpose(), grads);
  return residual.squaredNorm() * inv_batch;
}

double actor_loss(const Mlp& actor, const ActorBatch& batch) {
  const Eigen::MatrixXd logits = actor.forward(batch.state_inputs);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const Eigen::VectorXd log_probs = log_softmax(logits.col(i));
    loss -= log_probs[batch.actions[static_cast<std::size_t>(i)]] * batch.advantages[i];
  }
  return loss / static_cast<double>(logits.cols());
}

double actor_loss_and_grad(const Mlp& actor, const ActorBatch& batch, MlpGrads& grads) {
  MlpCache cache;
  const Eigen::MatrixXd logits = actor.forward_cached(batch.state_inputs, cache);
  Eigen::MatrixXd logit_grad(logits.rows(), logits.cols());
  const double inv_batch = 1.0 / static_cast<double>(logits.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const int action = batch.actions[static_cast<std::size_t>(i)];
    const Eigen::VectorXd probs = softmax(logits.col(i));
    loss -= (std::log(probs[action])) * batch.advantages[i];
    // d(-log pi(a|s) A)/dlogits = -A (onehot(a) - softmax).
    logit_grad.col(i) = (inv_batch * batch.advantages[i]) * probs;
    logit_grad(action, i) -= inv_batch * batch.advantages[i];
  }
  actor.backward(cache, logit_grad, grads);
  return loss * inv_batch;
}

CriticBatch prepare_critic_batch(const std::vector<NStepSegment>& segments,
                                 const DiscreteEnv& env, const Actor& actor,
                                 const Critic& critic, const FeatureChannel* channel,
                                 const FactoredVisitationNet* visitation,
                                 const MarginalVisitationModel* marginal,
                                 const ExperimentConfig& config, Rng& rng) {
  const int batch_size = static_cast<int>(segments.size());
  const PolicyFn policy = actor.policy_fn(env);
  CriticBatch batch;
  batch.inputs.resize(env.encoding_size() + env.action_count(), batch_size);
  batch.targets.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const NStepSegment& seg = segments[static_cast<std::size_t>(i)];
    const int s = seg.states[0];
    const int a = seg.actions[0];
    const int next = seg.states[1];
    batch.inputs.col(i) = sa_input(env, s, a);

    double y = config.use_env_reward ? seg.reward : 0.0;
    if (channel != nullptr) {
      ChannelContext ctx{env, s, a};
      ctx.policy = &policy;
      ctx.visitation = visitation;
      ctx.segment = &seg;
      ctx.marginal_log_probs = marginal != nullptr ? &marginal->log_probs() : nullptr;
      ctx.gamma = config.gamma;
      const FeatureSample sample = channel->sample_feature(ctx, rng);
      y += channel->lambda() * intrinsic_reward(*channel, sample);
    }
    if (!env.is_absorbing(next)) {
      const Eigen::VectorXd probs = actor.action_probs(env, next);
      const int next_action = rng.categorical(probs);
      y += config.gamma * (critic.value(env, next, next_action, /*use_target=*/true) -
                           actor.lambda_sac * std::log(probs[next_action]));
    }
    batch.targets[i] = y;
  }
  return batch;
}

ActorBatch prepare_actor_batch(const std::vector<NStepSegment>& segments,
                               const DiscreteEnv& env, const Actor& actor,
                               const Critic& critic, Rng& rng) {
  const int batch_size = static_cast<int>(segments.size());
  ActorBatch batch;
  batch.state_inputs.resize(env.encoding_size(), batch_size);
  batch.actions.resize(static_cast<std::size_t>(batch_size));
  batch.advantages.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const int s = segments[static_cast<std::size_t>(i)].states[0];
    batch.state_inputs.col(i) = env.encode(s);
    const Eigen::VectorXd probs = actor.action_probs(env, s);
    const int action = rng.categorical(probs);
    batch.actions[static_cast<std::size_t>(i)] = action;
    batch.advantages[i] = critic.value(env, s, action) -
                          actor.lambda_sac * std::log(probs[action]);
  }
  return batch;
}

std::unique_ptr<DiscreteEnv> build_env(const ExperimentConfig& config) {
  return make_env(config.env, config.env_seed);
}

std::unique_ptr<FeatureChannel> metric_channel(const DiscreteEnv& env) {
  if (const auto* grid = dynamic_cast<const GridEnv*>(&env))
    return make_position_channel(*grid, 0.0);
  return make_identity_channel(env.state_count(), 0.0);
}

namespace {

std::vector<int> hidden_widths(const ExperimentConfig& config, int output) {
  std::vector<int> widths(static_cast<std::size_t>(config.hidden_layers),
                          config.hidden_width);
  widths.push_back(output);
  return widths;
}

}  // namespace

TrainedArtifacts train_agent(const ExperimentConfig& config, std::uint64_t seed) {
  const auto env = build_env(config);
  return train_agent(config, seed, *env);
}

TrainedArtifacts train_agent(const ExperimentConfig& config, std::uint64_t seed,
                             const DiscreteEnv& env) {
  config.validate();
  Rng rng(derive_seed(seed, 1));

  // All agents share the same initialization order so that runs differing
  // only in the channel consume identical random draws.
  Actor actor{Mlp(env.encoding_size(), hidden_widths(config, env.action_count()), rng),
              config.lambda_sac};
  Critic critic{TargetPair(
      Mlp(env.encoding_size() + env.action_count(), hidden_widths(config, 1), rng),
      config.tau_critic)};
  FactoredVisitationNet visitation = FactoredVisitationNet::for_env(
      env, config.hidden_width, config.hidden_layers, config.tau_visitation, rng);

  const std::unique_ptr<FeatureChannel> channel =
      make_channel(config.resolved_channel(), env, config.lambda);
  const bool learn_visitation = channel != nullptr && channel->name() == "cv-position";
  const bool learn_marginal = channel != nullptr && channel->name() == "mv-position";
  const std::unique_ptr<FeatureChannel> eval_channel = metric_channel(env);

  MarginalVisitationModel marginal(channel != nullptr ? channel->feature_count() : 1,
                                   config.marginal_smoothing);

  AdamOptimizer actor_opt(actor.net, config.lr_policy);
  AdamOptimizer critic_opt(critic.pair.online, config.lr_critic);
  AdamOptimizer visitation_opt(visitation.online(), config.lr_visitation);

  ReplayBuffer buffer(static_cast<std::size_t>(config.buffer_size));
  if (config.prefill)
    buffer.push_all(collect_segments(env, uniform_policy(env.action_count()),
                                     config.buffer_size, config.horizon, config.max_steps,
                                     rng));

  TrainedArtifacts artifacts{config, seed, std::move(actor), std::move(critic),
                             std::move(visitation)};
  Actor& live_actor = artifacts.actor;
  Critic& live_critic = artifacts.critic;
  FactoredVisitationNet& live_visitation = artifacts.visitation;
  const PolicyFn live_behavior = live_actor.policy_fn(env);

  double return_estimate = 0.0;
  double entropy_estimate = 0.0;
  for (int iteration = 1; iteration <= config.iterations; ++iteration) {
    for (int t = 0; t < config.trajectories_per_iter; ++t)
      buffer.push_all(segment_trajectory(
          sample_trajectory(env, live_behavior, config.max_steps, rng), config.horizon));

    if (learn_marginal) marginal.refit(buffer, *channel, config.gamma);

    double visitation_loss_sum = 0.0;
    if (learn_visitation)
      for (int step = 0; step < config.visitation_steps; ++step)
        visitation_loss_sum +=
            visitation_train_step(live_visitation, visitation_opt, buffer, config.batch_size,
                                  env, live_behavior, config.gamma, rng);

    double critic_loss_sum = 0.0;
    for (int step = 0; step < config.critic_steps; ++step) {
      const CriticBatch batch = prepare_critic_batch(
          buffer.sample(config.batch_size, rng), env, live_actor, live_critic, channel.get(),
          &live_visitation, learn_marginal ? &marginal : nullptr, config, rng);
      MlpGrads grads = live_critic.pair.online.zero_grads();
      critic_loss_sum += critic_loss_and_grad(live_critic.pair.online, batch, grads);
      critic_opt.step(live_critic.pair.online, grads);
    }

    const ActorBatch actor_batch = prepare_actor_batch(
        buffer.sample(config.batch_size, rng), env, live_actor, live_critic, rng);
    MlpGrads actor_grads = live_actor.net.zero_grads();
    const double actor_loss_value =
        actor_loss_and_grad(live_actor.net, actor_batch, actor_grads);
    actor_opt.step(live_actor.net, actor_grads);

    live_critic.pair.update();
    live_visitation.update_target();

    if (iteration == 1 || iteration % config.eval_every == 0) {
      // A separate stream keeps evaluation from perturbing training draws.
      Rng eval_rng(derive_seed(seed, 0x1000 + static_cast<std::uint64_t>(iteration)));
      return_estimate = mc_expected_return(env, live_behavior, config.eval_rollouts,
                                           config.max_steps, config.gamma, eval_rng);
      entropy_estimate =
          mc_discounted_feature_entropy(env, live_behavior, *eval_channel,
                                        config.eval_rollouts, config.max_steps, config.gamma,
                                        eval_rng);
    }

    MetricRow row;
    row.seed = seed;
    row.iteration = iteration;
    row.return_estimate = return_estimate;
    row.entropy_estimate = entropy_estimate;
    row.visitation_loss =
        learn_visitation && config.visitation_steps > 0
            ? visitation_loss_sum / config.visitation_steps
            : 0.0;
    row.critic_loss = critic_loss_sum / config.critic_steps;
    row.actor_loss = actor_loss_value;
    artifacts.metrics.push_back(row);
  }

  artifacts.marginal_probs = marginal.probs();
  artifacts.final_rng_state = rng.state();
  return artifacts;
}

TrainedArtifacts train_opac_cv(ExperimentConfig config, std::uint64_t seed) {
  config.agent = "opac-cv";
  return train_agent(config, seed);
}

TrainedArtifacts train_opac_mv(ExperimentConfig config, std::uint64_t seed) {
  config.agent = "opac-mv";
  return train_agent(config, seed);
}

TrainedArtifacts train_sac(ExperimentConfig config, std::uint64_t seed) {
  config.agent = "sac";
  return train_agent(config, seed);
}

void save_artifacts(const TrainedArtifacts& artifacts, const std::string& path) {
  Checkpoint ckpt;
  ckpt.add_text("config", artifacts.config.to_key_values());
  ckpt.add_text("seed", std::to_string(artifacts.seed));
  ckpt.add_text("rng_state", artifacts.final_rng_state);
  ckpt.add_mlp("policy", artifacts.actor.net);
  ckpt.add_mlp("critic", artifacts.critic.pair.online);
  ckpt.add_mlp("critic_target", artifacts.critic.pair.target);
  ckpt.add_mlp("visitation", artifacts.visitation.online());
  ckpt.add_mlp("visitation_target", artifacts.visitation.target());
  ckpt.add_doubles("marginal_probs", artifacts.marginal_probs);
  ckpt.save(path);
}

TrainedArtifacts load_artifacts(const std::string& path) {
  const Checkpoint ckpt = Checkpoint::load(path);
  const ExperimentConfig config = ExperimentConfig::from_key_values(ckpt.text("config"));
  const auto env = build_env(config);
  Rng shape_rng(0);
  TrainedArtifacts artifacts{
      config,
      std::stoull(ckpt.text("seed")),
      Actor{ckpt.mlp("policy"), config.lambda_sac},
      Critic{TargetPair(ckpt.mlp("critic"), config.tau_critic)},
      FactoredVisitationNet::for_env(*env, config.hidden_width, config.hidden_layers,
                                     config.tau_visitation, shape_rng)};
  artifacts.critic.pair.target = ckpt.mlp("critic_target");
  if (!artifacts.visitation.online().same_shape(ckpt.mlp("visitation")))
    throw std::runtime_error("load_artifacts: visitation shape mismatch with config env");
  artifacts.visitation.online() = ckpt.mlp("visitation");
  artifacts.visitation.target() = ckpt.mlp("visitation_target");
  artifacts.marginal_probs = ckpt.doubles("marginal_probs");
  artifacts.final_rng_state = ckpt.text("rng_state");
  return artifacts;
}

}  // namespace visitrl
