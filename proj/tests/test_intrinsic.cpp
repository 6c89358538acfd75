#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "visitrl/intrinsic.hpp"

using namespace visitrl;

namespace {

void zero_parameters(Mlp& net) {
  for (int i = 0; i < net.layer_count(); ++i) {
    net.weight(i).setZero();
    net.bias(i).setZero();
  }
}

}  // namespace

TEST_CASE("channel construction enforces the q* invariants") {
  CHECK_THROWS(make_identity_channel(0, 0.01));
  class BadChannel : public FeatureChannel {
   public:
    BadChannel() : FeatureChannel("bad", 0.0, make_qstar()) {}
    static Eigen::VectorXd make_qstar() {
      Eigen::VectorXd q(2);
      q << 1.0, 0.0;  // zero entry violates strict positivity
      return q;
    }
    int feature_of(int, int) const override { return 0; }
    FeatureSample sample_feature(const ChannelContext&, Rng&) const override { return {}; }
  };
  CHECK_THROWS(BadChannel{});
}

TEST_CASE("deterministic visitation gives reward log q* exactly") {
  Rng rng(1);
  const TabularEnv env(test::single_state(0.5));
  const auto channel = make_identity_channel(1, 0.01);
  FactoredVisitationNet net = FactoredVisitationNet::for_env(env, 8, 1, 1.0, rng);
  zero_parameters(net.online());  // single class, so the head is a point mass
  ChannelContext ctx{env, 0, 0};
  ctx.visitation = &net;
  const FeatureSample sample = channel->sample_feature(ctx, rng);
  CHECK(sample.z == 0);
  CHECK(sample.log_q == doctest::Approx(0.0));
  // Single-point feature space: q* is the same point mass, reward 0.
  CHECK(intrinsic_reward(*channel, sample) == doctest::Approx(0.0));
}

TEST_CASE("uniform heads over a grid give log_q = -log(W*H)") {
  Rng rng(2);
  const auto env = make_env("Empty-6x6", 0);
  const auto channel = make_position_channel(*env, 0.01);
  FactoredVisitationNet net = FactoredVisitationNet::for_env(*env, 8, 1, 1.0, rng);
  zero_parameters(net.online());
  ChannelContext ctx{*env, 5, 2};
  ctx.visitation = &net;
  for (int i = 0; i < 20; ++i) {
    const FeatureSample sample = channel->sample_feature(ctx, rng);
    CHECK(sample.log_q == doctest::Approx(-std::log(36.0)));
  }
}

TEST_CASE("point-mass feature distribution against uniform q* pays -log K") {
  Rng rng(3);
  const int n_states = 6;
  const TabularEnv env(test::random_mdp(rng, n_states, 2, 0.9));
  const auto channel = make_identity_channel(n_states, 0.01);
  FactoredVisitationNet net = FactoredVisitationNet::for_env(env, 8, 1, 1.0, rng);
  zero_parameters(net.online());
  net.online().bias(net.online().layer_count() - 1)[3] = 60.0;  // pin state 3
  ChannelContext ctx{env, 0, 0};
  ctx.visitation = &net;
  const FeatureSample sample = channel->sample_feature(ctx, rng);
  CHECK(sample.z == 3);
  CHECK(intrinsic_reward(*channel, sample) ==
        doctest::Approx(-std::log(static_cast<double>(n_states))).epsilon(1e-9));
}

TEST_CASE("sampled features match the closed-form distribution within TV 0.02") {
  Rng rng(4);
  const auto env = make_env("Empty-4x4", 0);
  const auto channel = make_position_channel(*env, 0.01);
  FactoredVisitationNet net = FactoredVisitationNet::for_env(*env, 16, 2, 1.0, rng);
  ChannelContext ctx{*env, 9, 1};
  ctx.visitation = &net;

  const auto probs = net.head_probs(sa_input(*env, 9, 1));
  // Expected distribution over cells plus one lumped off-support bucket.
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(env->cell_count() + 1);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y) {
      const double mass = probs[0][x] * probs[1][y];
      const int cell = env->cell_index({x, y});
      expected[cell >= 0 ? cell : env->cell_count()] += mass;
    }

  const int draws = 100000;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(env->cell_count() + 1);
  for (int i = 0; i < draws; ++i) {
    const FeatureSample sample = channel->sample_feature(ctx, rng);
    counts[sample.z >= 0 ? sample.z : env->cell_count()] += 1.0;
  }
  counts /= draws;
  CHECK(0.5 * (counts - expected).cwiseAbs().sum() <= 0.02);
}

TEST_CASE("off-support position samples keep a finite reward at the uniform level") {
  Rng rng(5);
  const auto env = make_env("Empty-4x4", 0);
  const auto channel = make_position_channel(*env, 0.01);
  FactoredVisitationNet net = FactoredVisitationNet::for_env(*env, 8, 1, 1.0, rng);
  zero_parameters(net.online());
  net.online().bias(net.online().layer_count() - 1)[0] = 60.0;  // x = 0: border wall
  ChannelContext ctx{*env, 0, 0};
  ctx.visitation = &net;
  const FeatureSample sample = channel->sample_feature(ctx, rng);
  CHECK(sample.z == -1);
  const double reward = intrinsic_reward(*channel, sample);
  CHECK(std::isfinite(reward));
  CHECK(channel->log_qstar(-1) == doctest::Approx(-std::log(4.0)));  // 4 interior cells
}

TEST_CASE("exact_kl_reward basics") {
  SUBCASE("matched point masses give zero") {
    const TabularMdp mdp = test::single_state(0.5);
    const auto channel = make_identity_channel(1, 0.01);
    const Eigen::MatrixXd r = exact_kl_reward(*channel, mdp, TabularPolicy::uniform(1, 1));
    CHECK(r(0, 0) == doctest::Approx(0.0));
  }
  SUBCASE("rewards are never positive") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const TabularMdp mdp = test::random_mdp(rng, 5, 2, 0.2 + 0.07 * trial);
      const auto channel = make_identity_channel(5, 0.01);
      const Eigen::MatrixXd r =
          exact_kl_reward(*channel, mdp, test::random_policy(rng, 5, 2));
      CHECK(r.maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("intrinsic reward is an unbiased estimate of the exact negative KL") {
  Rng rng(7);
  const int n_states = 5, n_actions = 2;
  const TabularMdp mdp = test::random_mdp(rng, n_states, n_actions, 0.8, 0.1);
  const TabularPolicy policy = test::random_policy(rng, n_states, n_actions);
  const auto channel = make_identity_channel(n_states, 0.01);
  const ConditionalVisitation d = exact_visitation(mdp, policy);
  const Eigen::MatrixXd exact = exact_kl_reward(*channel, mdp, policy);

  const int s = 2, a = 1;
  const Eigen::VectorXd q = exact_feature_distribution(*channel, policy, d, s, a);
  const int draws = 100000;
  double total = 0.0;
  for (int i = 0; i < draws; ++i) {
    // Draw through the definition: future state, future action, feature.
    const int future = rng.categorical(d.row(s, a));
    const int a2 = rng.categorical(policy.row(future));
    const int z = channel->feature_of(future, a2);
    total += intrinsic_reward(*channel, FeatureSample{z, std::log(q[z])});
  }
  CHECK(std::abs(total / draws - exact(s, a)) <= 0.02);
}

TEST_CASE("policy entropy channel recovers the entropy bonus") {
  Rng rng(8);
  const auto channel = make_policy_entropy_channel(4, 0.002);
  Eigen::VectorXd probs(4);
  probs << 0.6, 0.2, 0.15, 0.05;
  const PolicyFn policy = [&](int) { return probs; };
  const TabularEnv env(test::single_state(0.5, 0.0, 4));
  ChannelContext ctx{env, 0, 2};
  ctx.policy = &policy;
  for (int i = 0; i < 50; ++i) {
    const FeatureSample sample = channel->sample_feature(ctx, rng);
    CHECK(intrinsic_reward(*channel, sample) ==
          doctest::Approx(std::log(0.25) - std::log(probs[sample.z])));
  }
}

TEST_CASE("marginal position channel reads the segment and marginal model") {
  Rng rng(9);
  const auto env = make_env("Empty-4x4", 0);
  const auto channel = make_marginal_position_channel(*env, 0.01);
  // Build a short real trajectory to have consistent states.
  Rng traj_rng(10);
  const Trajectory traj = sample_trajectory(*env, uniform_policy(4), 12, traj_rng);
  REQUIRE(traj.length() >= 3);
  const auto segments = segment_trajectory(traj, 3);
  Eigen::VectorXd marginal_log =
      Eigen::VectorXd::Constant(env->cell_count(), std::log(0.125));
  marginal_log[0] = std::log(0.5);
  ChannelContext ctx{*env, segments[0].states[0], segments[0].actions[0]};
  ctx.segment = &segments[0];
  ctx.marginal_log_probs = &marginal_log;
  ctx.gamma = 0.9;
  for (int i = 0; i < 100; ++i) {
    const FeatureSample sample = channel->sample_feature(ctx, rng);
    CHECK(sample.z >= 0);
    CHECK(sample.log_q == doctest::Approx(marginal_log[sample.z]));
    // The sampled feature is the position of some in-window future state.
    bool matches_window = false;
    for (int t = 1; t <= segments[0].valid_steps(); ++t)
      matches_window |= channel->feature_of(segments[0].states[static_cast<std::size_t>(t)], 0) ==
                        sample.z;
    CHECK(matches_window);
  }
}

TEST_CASE("channel registry maps config keys") {
  const auto env = make_env("Empty-6x6", 0);
  CHECK(make_channel("none", *env, 0.01) == nullptr);
  CHECK(make_channel("cv-position", *env, 0.01)->name() == "cv-position");
  CHECK(make_channel("mv-position", *env, 0.01)->name() == "mv-position");
  CHECK(make_channel("policy-entropy", *env, 0.002)->name() == "policy-entropy");
  CHECK_THROWS(make_channel("bogus", *env, 0.01));
  const TabularEnv tab(test::two_cycle(0.5));
  CHECK_THROWS(make_channel("cv-position", tab, 0.01));
  CHECK(make_channel("policy-entropy", tab, 0.01) != nullptr);
}
