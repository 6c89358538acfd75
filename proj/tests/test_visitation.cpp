#include <doctest.h>

#include <cmath>
#include <map>

#include "test_helpers.hpp"
#include "visitrl/gridworld.hpp"
#include "visitrl/oracle.hpp"
#include "visitrl/visitation.hpp"

using namespace visitrl;

namespace {

FactoredVisitationNet small_net(const DiscreteEnv& env, Rng& rng, int hidden = 16) {
  return FactoredVisitationNet::for_env(env, hidden, 2, /*tau=*/1.0, rng);
}

void zero_parameters(Mlp& net) {
  for (int i = 0; i < net.layer_count(); ++i) {
    net.weight(i).setZero();
    net.bias(i).setZero();
  }
}

/// Sets the trunk so that head h deterministically emits class c, for all inputs.
void pin_heads(FactoredVisitationNet& net, const std::vector<int>& classes) {
  zero_parameters(net.online());
  int offset = 0;
  for (int h = 0; h < net.head_count(); ++h) {
    net.online().bias(net.online().layer_count() - 1)[offset + classes[static_cast<std::size_t>(h)]] =
        50.0;
    offset += net.head_widths()[static_cast<std::size_t>(h)];
  }
  net.update_target();
}

NStepSegment plain_segment(std::vector<int> states, std::vector<int> actions) {
  NStepSegment seg;
  seg.horizon = static_cast<int>(actions.size());
  seg.states = std::move(states);
  seg.actions = std::move(actions);
  return seg;
}

}  // namespace

TEST_CASE("sample_geometric has the stated head probabilities") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_geometric(0.0, rng) == 1);
  int ones = 0, twos = 0;
  const int draws = 400000;
  for (int i = 0; i < draws; ++i) {
    const int d = sample_geometric(0.5, rng);
    ones += d == 1;
    twos += d == 2;
  }
  CHECK(static_cast<double>(ones) / draws == doctest::Approx(0.5).epsilon(0.01));
  CHECK(static_cast<double>(twos) / draws == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("sample_geometric mean matches 1/(1-gamma)") {
  Rng rng(2);
  const int draws = 400000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += sample_geometric(0.98, rng);
  CHECK(sum / draws == doctest::Approx(50.0).epsilon(0.01));
}

TEST_CASE("head probabilities are normalized and sampling matches them") {
  Rng rng(3);
  const auto env = make_env("Empty-4x4", 0);
  FactoredVisitationNet net = small_net(*env, rng);
  const Eigen::VectorXd input = sa_input(*env, 5, 2);
  const auto probs = net.head_probs(input);
  REQUIRE(probs.size() == env->encoding_widths().size());
  for (const auto& p : probs) CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));

  const int draws = 100000;
  std::vector<Eigen::VectorXd> counts;
  for (const auto& p : probs) counts.push_back(Eigen::VectorXd::Zero(p.size()));
  for (int i = 0; i < draws; ++i) {
    const auto components = net.sample_components(input, false, rng);
    for (std::size_t h = 0; h < components.size(); ++h)
      counts[h][components[static_cast<std::size_t>(h)]] += 1.0;
  }
  for (std::size_t h = 0; h < probs.size(); ++h)
    for (Eigen::Index k = 0; k < probs[h].size(); ++k) {
      const double expected = probs[h][k];
      const double sigma = std::sqrt(std::max(expected * (1.0 - expected), 1e-12) / draws);
      CHECK(std::abs(counts[h][k] / draws - expected) <= 3.0 * sigma + 1e-9);
    }
}

TEST_CASE("uniform heads give log_prob -log(prod widths) and normalize") {
  Rng rng(4);
  const auto env = make_env("Empty-6x6", 0);
  FactoredVisitationNet net = small_net(*env, rng);
  zero_parameters(net.online());
  const double expected = -std::log(6.0 * 6.0 * 4.0);
  const auto components = env->state_components(10);
  CHECK(log_prob_future(net, *env, 3, 1, components) == doctest::Approx(expected));

  // exp(log_prob) sums to 1 over the full factored space.
  double total = 0.0;
  std::vector<int> c(3);
  for (c[0] = 0; c[0] < 6; ++c[0])
    for (c[1] = 0; c[1] < 6; ++c[1])
      for (c[2] = 0; c[2] < 4; ++c[2])
        total += std::exp(net.log_prob_components(sa_input(*env, 3, 1), c));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("deterministic heads produce deterministic samples") {
  Rng rng(5);
  const TabularEnv env(test::two_cycle(0.5));
  FactoredVisitationNet net = small_net(env, rng);
  pin_heads(net, {1});
  for (int i = 0; i < 20; ++i) {
    const auto components = sample_future_state(net, env, 0, 0, false, rng);
    CHECK(components[0] == 1);
  }
  // use_target toggles the generating parameters.
  zero_parameters(net.online());  // online now uniform, target still pinned
  bool saw_zero = false;
  for (int i = 0; i < 200; ++i) saw_zero |= sample_future_state(net, env, 0, 0, false, rng)[0] == 0;
  CHECK(saw_zero);
  for (int i = 0; i < 20; ++i)
    CHECK(sample_future_state(net, env, 0, 0, true, rng)[0] == 1);
}

TEST_CASE("make_target with gamma 0 always returns the next state") {
  Rng rng(6);
  const TabularEnv env(test::two_cycle(0.0));
  FactoredVisitationNet net = small_net(env, rng);
  const NStepSegment seg = plain_segment({0, 1, 0, 1}, {0, 0, 0});
  for (int i = 0; i < 50; ++i) {
    const auto target = make_target(seg, env, uniform_policy(1), net, 0.0, rng);
    CHECK(target.delta == 1);
    CHECK(!target.bootstrapped);
    CHECK(target.target_components[0] == 1);
  }
}

TEST_CASE("bootstrap draws come from the target net at the window anchor") {
  Rng rng(7);
  Eigen::MatrixXd p(3, 3);
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;  // 3-cycle, nothing absorbing
  const TabularEnv env(TabularMdp({p}, Eigen::MatrixXd::Zero(3, 1),
                                  Eigen::VectorXd::Constant(3, 1.0 / 3.0), 0.9));
  FactoredVisitationNet net = small_net(env, rng);
  pin_heads(net, {2});  // target net always emits state 2
  const NStepSegment seg = plain_segment({0, 1}, {0});  // N = 1, anchor s_1 = 1
  int bootstrapped = 0;
  const int calls = 20000;
  for (int i = 0; i < calls; ++i) {
    const auto target = make_target(seg, env, uniform_policy(1), net, 0.9, rng);
    if (target.bootstrapped) {
      ++bootstrapped;
      CHECK(target.delta > 1);
      CHECK(target.target_components[0] == 2);
    } else {
      CHECK(target.target_components[0] == 1);
    }
  }
  // Tail mass of the geometric beyond N = 1 is gamma^1.
  CHECK(static_cast<double>(bootstrapped) / calls == doctest::Approx(0.9).epsilon(0.02));
}

TEST_CASE("bootstrap fraction approximates gamma^N for longer windows") {
  Rng rng(8);
  const TabularEnv env(test::two_cycle(0.98));
  FactoredVisitationNet net = small_net(env, rng);
  std::vector<int> states, actions;
  for (int i = 0; i <= 10; ++i) states.push_back(i % 2);
  for (int i = 0; i < 10; ++i) actions.push_back(0);
  const NStepSegment seg = plain_segment(states, actions);
  int bootstrapped = 0;
  const int calls = 40000;
  for (int i = 0; i < calls; ++i)
    bootstrapped += make_target(seg, env, uniform_policy(1), net, 0.98, rng).bootstrapped;
  CHECK(static_cast<double>(bootstrapped) / calls ==
        doctest::Approx(std::pow(0.98, 10)).epsilon(0.01));
}

TEST_CASE("truncated windows bootstrap at the last surviving state") {
  Rng rng(9);
  const TabularEnv env(test::two_cycle(0.9));
  FactoredVisitationNet net = small_net(env, rng);
  pin_heads(net, {0});
  NStepSegment seg = plain_segment({0, 1, 1, 1, 1}, {0, 0, 0, 0});
  seg.truncated_at = 1;  // only s_1 = 1 really happened
  for (int i = 0; i < 2000; ++i) {
    const auto target = make_target(seg, env, uniform_policy(1), net, 0.9, rng);
    if (target.delta <= 1) {
      CHECK(target.target_components[0] == 1);
    } else {
      CHECK(target.bootstrapped);
      CHECK(target.target_components[0] == 0);  // pinned target net draw
    }
  }
}

TEST_CASE("absorbing bootstrap anchors resolve to themselves without a model query") {
  Rng rng(10);
  const auto grid = make_env("Empty-4x4", 0);
  const TabularEnv env(to_tabular(*grid, 0.9));
  FactoredVisitationNet net = small_net(env, rng);
  pin_heads(net, {0});
  // Find an absorbing state and a predecessor transition onto it.
  int absorbing = -1;
  for (int s = 0; s < env.state_count(); ++s)
    if (env.is_absorbing(s)) absorbing = s;
  REQUIRE(absorbing >= 0);
  NStepSegment seg = plain_segment({absorbing == 0 ? 1 : 0, absorbing, absorbing},
                                   {0, 0});
  seg.truncated_at = 1;
  bool saw_bootstrap = false;
  for (int i = 0; i < 500; ++i) {
    const auto target = make_target(seg, env, uniform_policy(4), net, 0.9, rng);
    if (target.bootstrapped) {
      saw_bootstrap = true;
      CHECK(target.target_components[0] == absorbing);
    }
  }
  CHECK(saw_bootstrap);
}

TEST_CASE("visitation loss of a uniform model is log of the factored space size") {
  Rng rng(11);
  const auto env = make_env("Empty-4x4", 0);
  FactoredVisitationNet net = small_net(*env, rng);
  zero_parameters(net.online());
  VisitationBatch batch;
  batch.inputs = sa_input(*env, 2, 1);
  batch.target_components = {env->state_components(7)};
  CHECK(visitation_loss(net, batch) == doctest::Approx(std::log(4.0 * 4.0 * 4.0)));
}

TEST_CASE("visitation loss vanishes when the model pins the right target") {
  Rng rng(12);
  const TabularEnv env(test::single_state(0.5));
  FactoredVisitationNet net = small_net(env, rng);
  pin_heads(net, {0});
  VisitationBatch batch;
  batch.inputs = sa_input(env, 0, 0);
  batch.target_components = {{0}};
  CHECK(visitation_loss(net, batch) <= 1e-9);
}

TEST_CASE("visitation loss gradient matches finite differences") {
  Rng rng(13);
  const auto env = make_env("Empty-4x4", 0);
  FactoredVisitationNet net = small_net(*env, rng, /*hidden=*/12);
  Rng data_rng(14);
  const auto segments =
      collect_segments(*env, uniform_policy(4), 16, 4, 30, data_rng);
  const VisitationBatch batch = prepare_visitation_batch(
      std::vector<NStepSegment>(segments.begin(), segments.begin() + 16), *env,
      uniform_policy(4), net, 0.8, data_rng);

  MlpGrads grads = net.online().zero_grads();
  (void)visitation_loss_and_grad(net, batch, grads);
  const Eigen::VectorXd analytic_flat = [&] {
    Eigen::VectorXd flat(net.online().parameter_count());
    Eigen::Index pos = 0;
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
      const auto& w = grads.weights[i];
      flat.segment(pos, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
      pos += w.size();
      flat.segment(pos, grads.biases[i].size()) = grads.biases[i];
      pos += grads.biases[i].size();
    }
    return flat;
  }();

  for (int probe = 0; probe < 100; ++probe) {
    const std::size_t idx = static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(net.online().parameter_count())));
    const double original = net.online().parameter(idx);
    const double h = 1e-5;
    net.online().set_parameter(idx, original + h);
    const double up = visitation_loss(net, batch);
    net.online().set_parameter(idx, original - h);
    const double down = visitation_loss(net, batch);
    net.online().set_parameter(idx, original);
    const double fd = (up - down) / (2.0 * h);
    const double analytic = analytic_flat[static_cast<Eigen::Index>(idx)];
    CHECK(std::abs(analytic - fd) <=
          1e-4 * std::max({std::abs(analytic), std::abs(fd), 1e-6}));
  }
}

TEST_CASE("loss on a fixed batch ignores the target parameters") {
  Rng rng(15);
  const TabularEnv env(test::two_cycle(0.9));
  FactoredVisitationNet net = small_net(env, rng);
  VisitationBatch batch;
  batch.inputs = sa_input(env, 0, 0);
  batch.target_components = {{1}};
  const double before = visitation_loss(net, batch);
  net.target().weight(0).setConstant(3.0);  // perturb psi'
  CHECK(visitation_loss(net, batch) == before);
}

TEST_CASE("marginal of make_target matches the operator mixture on a tabular MDP") {
  // Frozen target net; empirical distribution of targets for a fixed head
  // must match (T^pi)^N applied to the net's implied table.
  Rng rng(16);
  Eigen::MatrixXd p(3, 3);
  p << 0.2, 0.5, 0.3, 0.6, 0.1, 0.3, 0.25, 0.35, 0.4;
  Eigen::MatrixXd p2(3, 3);
  p2 << 0.5, 0.25, 0.25, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4;
  const TabularMdp mdp({p, p2}, Eigen::MatrixXd::Zero(3, 2),
                       Eigen::VectorXd::Constant(3, 1.0 / 3.0), 0.7);
  const TabularEnv env(mdp);
  const TabularPolicy policy = test::random_policy(rng, 3, 2);
  const PolicyFn policy_fn = tabular_policy_fn(policy);

  FactoredVisitationNet net = small_net(env, rng);
  net.update_target();

  // Implied conditional table of the frozen target network.
  Eigen::MatrixXd d_net(6, 3);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a)
      d_net.row(s * 2 + a) = net.head_probs(sa_input(env, s, a), true)[0].transpose();
  const int horizon = 3;
  Eigen::MatrixXd mixture = d_net;
  for (int k = 0; k < horizon; ++k) mixture = apply_visitation_operator(mdp, policy, mixture);

  // Gather many windows headed at (s, a) = (0, pick) and sample targets.
  const int head_s = 0;
  Rng data_rng(17);
  std::map<int, Eigen::VectorXd> counts;
  std::map<int, int> totals;
  for (int a = 0; a < 2; ++a) {
    counts[a] = Eigen::VectorXd::Zero(3);
    totals[a] = 0;
  }
  while (totals[0] < 60000 || totals[1] < 60000) {
    const Trajectory traj = sample_trajectory(env, policy_fn, 400, data_rng);
    for (const auto& seg : segment_trajectory(traj, horizon)) {
      if (seg.states[0] != head_s || seg.truncated_at) continue;
      const int a = seg.actions[0];
      if (totals[a] >= 60000) continue;
      const auto target = make_target(seg, env, policy_fn, net, 0.7, data_rng);
      counts[a][target.target_components[0]] += 1.0;
      ++totals[a];
    }
  }
  for (int a = 0; a < 2; ++a) {
    const Eigen::VectorXd empirical = counts[a] / totals[a];
    const Eigen::VectorXd expected = mixture.row(head_s * 2 + a).transpose();
    CHECK(0.5 * (empirical - expected).cwiseAbs().sum() <= 0.02);
  }
}

TEST_CASE("TD training reaches the exact visitation on the 2-cycle") {
  Rng rng(18);
  const TabularMdp mdp = test::two_cycle(0.5);
  const TabularEnv env(mdp);
  const PolicyFn policy = uniform_policy(1);
  FactoredVisitationNet net(env.encoding_size(), 1, env.encoding_widths(), 24, 2, 1.0, rng);
  AdamOptimizer adam(net.online(), 5e-3);
  ReplayBuffer buffer(256);
  for (int iter = 0; iter < 60; ++iter) {
    buffer.push_all(segment_trajectory(sample_trajectory(env, policy, 40, rng), 5));
    for (int step = 0; step < 10; ++step)
      (void)visitation_train_step(net, adam, buffer, 16, env, policy, 0.5, rng);
    net.update_target();
  }
  const auto exact = exact_visitation(mdp, TabularPolicy::uniform(2, 1));
  for (int s = 0; s < 2; ++s) {
    const Eigen::VectorXd model = net.head_probs(sa_input(env, s, 0))[0];
    const Eigen::VectorXd truth = exact.row(s, 0);
    CHECK(0.5 * (model - truth).cwiseAbs().sum() <= 0.05);
  }
}

TEST_CASE("the factored family cannot represent correlated visitation exactly") {
  // Documents the conditional-independence approximation: the best product
  // approximation of the Empty-4x4 visitation at gamma = 0.9 is far from the
  // exact table for some (s, a).
  const auto env = make_env("Empty-4x4", 0);
  const TabularMdp mdp = to_tabular(*env, 0.9);
  const int S = mdp.state_count();
  const auto d = exact_visitation(mdp, TabularPolicy::uniform(S, 4));
  const auto& widths = env->encoding_widths();
  double worst = 0.0;
  for (int s = 0; s < S; ++s) {
    if (env->is_absorbing(s)) continue;
    for (int a = 0; a < 4; ++a) {
      const Eigen::VectorXd row = d.row(s, a);
      std::vector<Eigen::VectorXd> marginals;
      for (int w : widths) marginals.push_back(Eigen::VectorXd::Zero(w));
      for (int sb = 0; sb < S; ++sb) {
        const auto c = env->state_components(sb);
        for (std::size_t k = 0; k < c.size(); ++k) marginals[k][c[k]] += row[sb];
      }
      double overlap = 0.0;
      for (int sb = 0; sb < S; ++sb) {
        const auto c = env->state_components(sb);
        double prod = 1.0;
        for (std::size_t k = 0; k < c.size(); ++k) prod *= marginals[k][c[k]];
        overlap += std::min(row[sb], prod);
      }
      worst = std::max(worst, 1.0 - overlap);
    }
  }
  CHECK(worst > 0.05);
}
