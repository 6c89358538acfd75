#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "test_helpers.hpp"
#include "visitrl/agents.hpp"
#include "visitrl/gridworld.hpp"
#include "visitrl/oracle.hpp"

using namespace visitrl;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.env = "Empty-4x4";
  cfg.iterations = 3;
  cfg.eval_every = 2;
  cfg.eval_rollouts = 2;
  cfg.hidden_width = 8;
  cfg.hidden_layers = 1;
  cfg.max_steps = 20;
  cfg.buffer_size = 64;
  cfg.batch_size = 8;
  cfg.horizon = 3;
  cfg.visitation_steps = 2;
  cfg.critic_steps = 2;
  return cfg;
}

Actor uniform_actor(const DiscreteEnv& env, int hidden, double lambda_sac, Rng& rng) {
  Actor actor{Mlp(env.encoding_size(), {hidden, env.action_count()}, rng), lambda_sac};
  for (int i = 0; i < actor.net.layer_count(); ++i) {
    actor.net.weight(i).setZero();
    actor.net.bias(i).setZero();
  }
  return actor;
}

}  // namespace

TEST_CASE("config validation lists offending fields") {
  ExperimentConfig cfg;
  cfg.gamma = 1.5;
  cfg.agent = "dqn";
  cfg.buffer_size = 0;
  const auto issues = cfg.problems();
  REQUIRE(issues.size() == 3);
  bool saw_gamma = false, saw_agent = false, saw_buffer = false;
  for (const auto& issue : issues) {
    saw_gamma |= issue.find("gamma") == 0;
    saw_agent |= issue.find("agent") == 0;
    saw_buffer |= issue.find("buffer_size") == 0;
  }
  CHECK(saw_gamma);
  CHECK(saw_agent);
  CHECK(saw_buffer);
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("config round trips through key-value text") {
  ExperimentConfig cfg;
  cfg.env = "SimpleCrossingS9N1";
  cfg.agent = "opac-mv";
  cfg.seeds = {7, 8};
  cfg.lambda = 0.125;
  cfg.use_env_reward = false;
  const ExperimentConfig back = ExperimentConfig::from_key_values(cfg.to_key_values());
  CHECK(back.env == cfg.env);
  CHECK(back.agent == cfg.agent);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.lambda == cfg.lambda);
  CHECK(back.use_env_reward == cfg.use_env_reward);
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::from_key_values("no_such_key = 3\n"),
                       doctest::Contains("no_such_key"), std::invalid_argument);
  CHECK_THROWS((void)ExperimentConfig::from_key_values("gamma = not_a_number\n"));
}

TEST_CASE("critic loss is minimized by the constant target") {
  Rng rng(1);
  const TabularEnv env(test::single_state(0.0, 2.5, 2));
  Critic critic{TargetPair(Mlp(env.encoding_size() + 2, {8, 1}, rng), 0.1)};
  CriticBatch batch;
  batch.inputs.resize(env.encoding_size() + 2, 2);
  batch.inputs.col(0) = sa_input(env, 0, 0);
  batch.inputs.col(1) = sa_input(env, 0, 1);
  batch.targets = Eigen::VectorXd::Constant(2, 2.5);
  // Pin the network output to the constant and the loss vanishes.
  for (int i = 0; i < critic.pair.online.layer_count(); ++i) {
    critic.pair.online.weight(i).setZero();
    critic.pair.online.bias(i).setZero();
  }
  critic.pair.online.bias(critic.pair.online.layer_count() - 1)[0] = 2.5;
  CHECK(critic_loss(critic.pair.online, batch) == doctest::Approx(0.0));
  critic.pair.online.bias(critic.pair.online.layer_count() - 1)[0] = 1.0;
  CHECK(critic_loss(critic.pair.online, batch) == doctest::Approx(2.25));
}

TEST_CASE("critic targets follow the soft SARSA construction") {
  Rng rng(2);
  const TabularEnv env(test::two_cycle(0.5, 4, /*reward_s0=*/1.0));
  Actor actor = uniform_actor(env, 8, 0.002, rng);
  Critic critic{TargetPair(Mlp(env.encoding_size() + 4, {8, 1}, rng), 0.1)};
  // Pin the target critic to a constant c.
  const double c = 0.75;
  for (int i = 0; i < critic.pair.target.layer_count(); ++i) {
    critic.pair.target.weight(i).setZero();
    critic.pair.target.bias(i).setZero();
  }
  critic.pair.target.bias(critic.pair.target.layer_count() - 1)[0] = c;

  NStepSegment seg;
  seg.states = {0, 1};
  seg.actions = {2};
  seg.reward = 1.0;
  seg.horizon = 1;

  ExperimentConfig cfg = tiny_config();
  cfg.gamma = 0.5;
  cfg.lambda_sac = 0.002;

  Rng batch_rng(3);
  const CriticBatch batch = prepare_critic_batch({seg}, env, actor, critic, nullptr, nullptr,
                                                 nullptr, cfg, batch_rng);
  const double expected = 1.0 + 0.5 * (c - 0.002 * std::log(0.25));
  CHECK(batch.targets[0] == doctest::Approx(expected).epsilon(1e-12));

  SUBCASE("environment reward can be disabled") {
    cfg.use_env_reward = false;
    Rng rng2(3);
    const CriticBatch no_r = prepare_critic_batch({seg}, env, actor, critic, nullptr, nullptr,
                                                  nullptr, cfg, rng2);
    CHECK(no_r.targets[0] == doctest::Approx(expected - 1.0).epsilon(1e-12));
  }
  SUBCASE("lambda_sac = 0 recovers the plain SARSA target") {
    cfg.lambda_sac = 0.0;
    Actor plain = uniform_actor(env, 8, 0.0, rng);
    Rng rng2(3);
    const CriticBatch plain_batch = prepare_critic_batch({seg}, env, plain, critic, nullptr,
                                                         nullptr, nullptr, cfg, rng2);
    CHECK(plain_batch.targets[0] == doctest::Approx(1.0 + 0.5 * c).epsilon(1e-12));
  }
}

TEST_CASE("absorbing next states drop the bootstrap term") {
  Rng rng(4);
  const auto grid = make_env("Empty-4x4", 0);
  const TabularEnv env(to_tabular(*grid, 0.9));
  Actor actor = uniform_actor(env, 8, 0.01, rng);
  Critic critic{TargetPair(Mlp(env.encoding_size() + 4, {8, 1}, rng), 0.1)};
  int absorbing = -1;
  for (int s = 0; s < env.state_count(); ++s)
    if (env.is_absorbing(s)) absorbing = s;
  REQUIRE(absorbing >= 0);
  NStepSegment seg;
  seg.states = {0, absorbing};
  seg.actions = {1};
  seg.reward = 1.0;
  seg.horizon = 1;
  ExperimentConfig cfg = tiny_config();
  Rng batch_rng(5);
  const CriticBatch batch = prepare_critic_batch({seg}, env, actor, critic, nullptr, nullptr,
                                                 nullptr, cfg, batch_rng);
  CHECK(batch.targets[0] == doctest::Approx(1.0));
}

TEST_CASE("intrinsic reward enters the target with weight lambda") {
  Rng rng(6);
  const int n_states = 5;
  const TabularEnv env(test::random_mdp(rng, n_states, 2, 0.9));
  Actor actor = uniform_actor(env, 8, 0.0, rng);
  Critic critic{TargetPair(Mlp(env.encoding_size() + 2, {8, 1}, rng), 0.1)};
  for (int i = 0; i < critic.pair.target.layer_count(); ++i) {
    critic.pair.target.weight(i).setZero();
    critic.pair.target.bias(i).setZero();
  }
  const auto channel = make_identity_channel(n_states, 0.25);
  FactoredVisitationNet visitation = FactoredVisitationNet::for_env(env, 8, 1, 1.0, rng);
  // Point-mass visitation model: log_q of the sample is 0.
  for (int i = 0; i < visitation.online().layer_count(); ++i) {
    visitation.online().weight(i).setZero();
    visitation.online().bias(i).setZero();
  }
  visitation.online().bias(visitation.online().layer_count() - 1)[2] = 60.0;

  NStepSegment seg;
  seg.states = {0, 1};
  seg.actions = {0};
  seg.reward = 0.5;
  seg.horizon = 1;
  ExperimentConfig cfg = tiny_config();
  cfg.gamma = 0.9;
  cfg.lambda = 0.25;
  Rng batch_rng(7);
  const CriticBatch batch = prepare_critic_batch({seg}, env, actor, critic, channel.get(),
                                                 &visitation, nullptr, cfg, batch_rng);
  // R_int = log q*(z) - 0 = -log(n_states); bootstrap term is zero (pinned target).
  CHECK(batch.targets[0] ==
        doctest::Approx(0.5 + 0.25 * (-std::log(static_cast<double>(n_states)))).epsilon(1e-9));
}

TEST_CASE("critic TD updates converge to the exact Q on a small MDP") {
  Rng rng(8);
  const TabularMdp mdp = test::random_mdp(rng, 3, 2, 0.6);
  const TabularEnv env(mdp);
  Actor actor = uniform_actor(env, 24, 0.0, rng);
  Critic critic{TargetPair(Mlp(env.encoding_size() + 2, {24, 24, 1}, rng), 0.1)};
  AdamOptimizer opt(critic.pair.online, 3e-3);
  ReplayBuffer buffer(4096);
  ExperimentConfig cfg = tiny_config();
  cfg.gamma = 0.6;
  cfg.lambda_sac = 0.0;
  buffer.push_all(collect_segments(env, actor.policy_fn(env), 4096, 1, 64, rng));
  for (int step = 0; step < 15000; ++step) {
    // Keep refreshing the data so targets stay unbiased for the true kernel,
    // and anneal the step size so the iterate settles.
    if (step % 20 == 0)
      buffer.push_all(segment_trajectory(
          sample_trajectory(env, actor.policy_fn(env), 64, rng), 1));
    if (step == 6000) opt = AdamOptimizer(critic.pair.online, 3e-4);
    if (step == 12000) opt = AdamOptimizer(critic.pair.online, 5e-5);
    const CriticBatch batch = prepare_critic_batch(buffer.sample(32, rng), env, actor, critic,
                                                   nullptr, nullptr, nullptr, cfg, rng);
    MlpGrads grads = critic.pair.online.zero_grads();
    (void)critic_loss_and_grad(critic.pair.online, batch, grads);
    opt.step(critic.pair.online, grads);
    critic.pair.update();
  }
  const Eigen::MatrixXd q_exact =
      q_value_exact(mdp, TabularPolicy::uniform(3, 2));
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a)
      CHECK(std::abs(critic.value(env, s, a) - q_exact(s, a)) <= 0.05);
}

TEST_CASE("actor gradient matches finite differences") {
  Rng rng(9);
  const auto env = make_env("Empty-4x4", 0);
  Actor actor{Mlp(env->encoding_size(), {12, 4}, rng), 0.002};
  ActorBatch batch;
  const int batch_size = 6;
  batch.state_inputs.resize(env->encoding_size(), batch_size);
  batch.actions.resize(batch_size);
  batch.advantages.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    batch.state_inputs.col(i) = env->encode(rng.uniform_int(env->state_count()));
    batch.actions[static_cast<std::size_t>(i)] = rng.uniform_int(4);
    batch.advantages[i] = 2.0 * rng.uniform() - 1.0;
  }
  MlpGrads grads = actor.net.zero_grads();
  (void)actor_loss_and_grad(actor.net, batch, grads);
  for (int probe = 0; probe < 60; ++probe) {
    const std::size_t idx =
        static_cast<std::size_t>(rng.uniform_int(static_cast<int>(actor.net.parameter_count())));
    const double original = actor.net.parameter(idx);
    const double h = 1e-5;
    actor.net.set_parameter(idx, original + h);
    const double up = actor_loss(actor.net, batch);
    actor.net.set_parameter(idx, original - h);
    const double down = actor_loss(actor.net, batch);
    actor.net.set_parameter(idx, original);
    const double fd = (up - down) / (2.0 * h);
    // Recover the analytic coordinate.
    std::size_t rest = idx;
    double analytic = 0.0;
    for (int layer = 0; layer < actor.net.layer_count(); ++layer) {
      const std::size_t w_size = static_cast<std::size_t>(actor.net.weight(layer).size());
      if (rest < w_size) {
        analytic = grads.weights[static_cast<std::size_t>(layer)].data()[rest];
        break;
      }
      rest -= w_size;
      const std::size_t b_size = static_cast<std::size_t>(actor.net.bias(layer).size());
      if (rest < b_size) {
        analytic = grads.biases[static_cast<std::size_t>(layer)].data()[rest];
        break;
      }
      rest -= b_size;
    }
    CHECK(std::abs(analytic - fd) <= 1e-4 * std::max({std::abs(analytic), std::abs(fd), 1e-6}));
  }
}

TEST_CASE("actor updates solve the two-armed bandit") {
  Rng rng(10);
  const TabularEnv env(test::single_state(0.0, 0.0, 2));
  Actor actor{Mlp(env.encoding_size(), {12, 2}, rng), 0.0};
  Critic critic{TargetPair(Mlp(env.encoding_size() + 2, {12, 1}, rng), 0.1)};
  // Critic prefers action 0: Q(s, 0) = 1, Q(s, 1) = 0 via direct action weight.
  for (int i = 0; i < critic.pair.online.layer_count(); ++i) {
    critic.pair.online.weight(i).setZero();
    critic.pair.online.bias(i).setZero();
  }
  // Single linear path: put weight on the action-0 input feature.
  critic.pair.online.weight(0).row(0).setZero();
  critic.pair.online.weight(0)(0, env.encoding_size()) = 1.0;
  critic.pair.online.weight(critic.pair.online.layer_count() - 1)(0, 0) = 1.0;

  AdamOptimizer opt(actor.net, 0.05);
  NStepSegment seg;
  seg.states = {0, 0};
  seg.actions = {0};
  seg.horizon = 1;
  for (int step = 0; step < 400; ++step) {
    const ActorBatch batch =
        prepare_actor_batch(std::vector<NStepSegment>(8, seg), env, actor, critic, rng);
    MlpGrads grads = actor.net.zero_grads();
    (void)actor_loss_and_grad(actor.net, batch, grads);
    opt.step(actor.net, grads);
  }
  CHECK(actor.action_probs(env, 0)[0] > 0.95);
}

TEST_CASE("with zero value the entropy term pushes the policy toward uniform") {
  Rng rng(11);
  const TabularEnv env(test::single_state(0.0, 0.0, 4));
  Actor actor{Mlp(env.encoding_size(), {8, 4}, rng), 0.05};
  // Bias the initial policy.
  actor.net.bias(actor.net.layer_count() - 1)[1] += 2.0;
  Critic critic{TargetPair(Mlp(env.encoding_size() + 4, {8, 1}, rng), 0.1)};
  for (int i = 0; i < critic.pair.online.layer_count(); ++i) {
    critic.pair.online.weight(i).setZero();
    critic.pair.online.bias(i).setZero();
  }
  AdamOptimizer opt(actor.net, 0.05);
  NStepSegment seg;
  seg.states = {0, 0};
  seg.actions = {0};
  seg.horizon = 1;
  for (int step = 0; step < 600; ++step) {
    const ActorBatch batch =
        prepare_actor_batch(std::vector<NStepSegment>(16, seg), env, actor, critic, rng);
    MlpGrads grads = actor.net.zero_grads();
    (void)actor_loss_and_grad(actor.net, batch, grads);
    opt.step(actor.net, grads);
  }
  const Eigen::VectorXd probs = actor.action_probs(env, 0);
  for (int a = 0; a < 4; ++a) CHECK(probs[a] == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("uniform policy with equal values has mean-zero actor updates") {
  Rng rng(12);
  const TabularEnv env(test::single_state(0.0, 0.0, 4));
  Actor actor = uniform_actor(env, 8, 0.0, rng);
  Critic critic{TargetPair(Mlp(env.encoding_size() + 4, {8, 1}, rng), 0.1)};
  for (int i = 0; i < critic.pair.online.layer_count(); ++i) {
    critic.pair.online.weight(i).setZero();
    critic.pair.online.bias(i).setZero();
  }
  critic.pair.online.bias(critic.pair.online.layer_count() - 1)[0] = 1.0;  // Q == 1
  NStepSegment seg;
  seg.states = {0, 0};
  seg.actions = {0};
  seg.horizon = 1;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(actor.net.parameter_count()));
  double mean_norm = 0.0;
  const int trials = 64;
  for (int trial = 0; trial < trials; ++trial) {
    const ActorBatch batch =
        prepare_actor_batch(std::vector<NStepSegment>(16, seg), env, actor, critic, rng);
    MlpGrads grads = actor.net.zero_grads();
    (void)actor_loss_and_grad(actor.net, batch, grads);
    Eigen::VectorXd flat(mean.size());
    Eigen::Index pos = 0;
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
      const auto& w = grads.weights[i];
      flat.segment(pos, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
      pos += w.size();
      flat.segment(pos, grads.biases[i].size()) = grads.biases[i];
      pos += grads.biases[i].size();
    }
    mean += flat;
    mean_norm += flat.norm();
  }
  mean /= trials;
  mean_norm /= trials;
  CHECK(mean.norm() <= 0.35 * mean_norm);
}

TEST_CASE("marginal model fits the discounted head histogram") {
  Rng rng(13);
  const auto env = make_env("Empty-4x4", 0);
  const auto channel = make_marginal_position_channel(*env, 0.01);
  MarginalVisitationModel model(channel->feature_count(), 1e-3);
  ReplayBuffer buffer(8);
  const double gamma = 0.5;
  // Two heads: cell of state 0 at episode time 0, cell of state 8 at time 1.
  NStepSegment a;
  a.states = {0, 1};
  a.actions = {0};
  a.horizon = 1;
  a.start_time = 0;
  NStepSegment b = a;
  b.states = {8, 9};
  b.start_time = 1;
  buffer.push(a);
  buffer.push(b);
  model.refit(buffer, *channel, gamma);
  const int za = channel->feature_of(0, 0);
  const int zb = channel->feature_of(8, 0);
  const double wa = (1.0 - gamma) + 1e-3;
  const double wb = (1.0 - gamma) * gamma + 1e-3;
  const double total = wa + wb + 1e-3 * (channel->feature_count() - 2);
  CHECK(model.probs()[za] == doctest::Approx(wa / total));
  CHECK(model.probs()[zb] == doctest::Approx(wb / total));
  CHECK(model.probs().sum() == doctest::Approx(1.0));
}

TEST_CASE("all three agents run end to end and log finite metrics") {
  for (const char* agent : {"sac", "opac-cv", "opac-mv"}) {
    ExperimentConfig cfg = tiny_config();
    cfg.agent = agent;
    const TrainedArtifacts artifacts = train_agent(cfg, 3);
    REQUIRE(artifacts.metrics.size() == static_cast<std::size_t>(cfg.iterations));
    for (const auto& row : artifacts.metrics) {
      CHECK(std::isfinite(row.return_estimate));
      CHECK(std::isfinite(row.entropy_estimate));
      CHECK(std::isfinite(row.visitation_loss));
      CHECK(std::isfinite(row.critic_loss));
      CHECK(std::isfinite(row.actor_loss));
    }
  }
}

TEST_CASE("training is deterministic in (config, seed)") {
  ExperimentConfig cfg = tiny_config();
  cfg.agent = "opac-cv";
  const TrainedArtifacts a = train_agent(cfg, 11);
  const TrainedArtifacts b = train_agent(cfg, 11);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].return_estimate == b.metrics[i].return_estimate);
    CHECK(a.metrics[i].entropy_estimate == b.metrics[i].entropy_estimate);
    CHECK(a.metrics[i].critic_loss == b.metrics[i].critic_loss);
    CHECK(a.metrics[i].actor_loss == b.metrics[i].actor_loss);
  }
  CHECK(a.actor.net == b.actor.net);
  CHECK(a.final_rng_state == b.final_rng_state);
}

TEST_CASE("disabling the channel reduces the conditional agent to SAC bit for bit") {
  ExperimentConfig cv = tiny_config();
  cv.agent = "opac-cv";
  cv.channel = "none";
  cv.lambda = 0.0;
  ExperimentConfig sac = tiny_config();
  sac.agent = "sac";
  const TrainedArtifacts a = train_agent(cv, 5);
  const TrainedArtifacts b = train_agent(sac, 5);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].return_estimate == b.metrics[i].return_estimate);
    CHECK(a.metrics[i].entropy_estimate == b.metrics[i].entropy_estimate);
    CHECK(a.metrics[i].critic_loss == b.metrics[i].critic_loss);
    CHECK(a.metrics[i].actor_loss == b.metrics[i].actor_loss);
  }
  CHECK(a.actor.net == b.actor.net);
  CHECK(a.critic.pair.online == b.critic.pair.online);
}

TEST_CASE("artifacts checkpoint round trip is exact") {
  ExperimentConfig cfg = tiny_config();
  cfg.agent = "opac-mv";
  const TrainedArtifacts artifacts = train_agent(cfg, 2);
  const std::string path = "/tmp/visitrl_artifacts_test.bin";
  save_artifacts(artifacts, path);
  const TrainedArtifacts loaded = load_artifacts(path);
  CHECK(loaded.seed == artifacts.seed);
  CHECK(loaded.actor.net == artifacts.actor.net);
  CHECK(loaded.critic.pair.online == artifacts.critic.pair.online);
  CHECK(loaded.critic.pair.target == artifacts.critic.pair.target);
  CHECK(loaded.visitation.online() == artifacts.visitation.online());
  CHECK(loaded.visitation.target() == artifacts.visitation.target());
  CHECK(loaded.marginal_probs == artifacts.marginal_probs);
  CHECK(loaded.final_rng_state == artifacts.final_rng_state);
  CHECK(loaded.config.agent == "opac-mv");
  std::remove(path.c_str());
}
