#include "visitrl/verify.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "visitrl/agents.hpp"
#include "visitrl/gridworld.hpp"
#include "visitrl/intrinsic.hpp"
#include "visitrl/oracle.hpp"
#include "visitrl/visitation.hpp"

namespace visitrl {

namespace {

Eigen::VectorXd random_distribution(Rng& rng, int n, double floor) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = floor - std::log(1.0 - rng.uniform());
  return v / v.sum();
}

std::string format(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

TabularMdp random_verify_mdp(Rng& rng, int max_states, int max_actions, double gamma,
                             bool strictly_positive, bool nonnegative_rewards) {
  const int n_states = 2 + rng.uniform_int(std::max(1, max_states - 1));
  const int n_actions = 1 + rng.uniform_int(max_actions);
  if (gamma < 0.0) gamma = 0.99 * rng.uniform();
  const double floor = strictly_positive ? 0.2 : 0.0;
  std::vector<Eigen::MatrixXd> transition(static_cast<std::size_t>(n_actions),
                                          Eigen::MatrixXd::Zero(n_states, n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s)
      transition[static_cast<std::size_t>(a)].row(s) =
          random_distribution(rng, n_states, floor).transpose();
  Eigen::MatrixXd reward(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      reward(s, a) = nonnegative_rewards ? rng.uniform() : 2.0 * rng.uniform() - 1.0;
  return TabularMdp(std::move(transition), std::move(reward),
                    random_distribution(rng, n_states, 0.0), gamma);
}

TabularPolicy random_verify_policy(Rng& rng, int n_states, int n_actions, double floor) {
  Eigen::MatrixXd probs(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    probs.row(s) = random_distribution(rng, n_actions, floor).transpose();
  return TabularPolicy(std::move(probs));
}

Eigen::MatrixXd random_verify_conditional(Rng& rng, int n_states, int n_actions) {
  Eigen::MatrixXd q(static_cast<Eigen::Index>(n_states) * n_actions, n_states);
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    q.row(r) = random_distribution(rng, n_states, 0.0).transpose();
  return q;
}

CheckResult verify_contraction(int trials, Rng& rng) {
  double worst_violation = -1e300;
  for (int trial = 0; trial < trials; ++trial) {
    const TabularMdp mdp = random_verify_mdp(rng);
    const TabularPolicy policy =
        random_verify_policy(rng, mdp.state_count(), mdp.action_count());
    const Eigen::MatrixXd q =
        random_verify_conditional(rng, mdp.state_count(), mdp.action_count());
    const Eigen::MatrixXd q2 =
        random_verify_conditional(rng, mdp.state_count(), mdp.action_count());
    for (int n : {1, 2}) {
      const ContractionCheck check = check_contraction(mdp, policy, q, q2, n);
      worst_violation = std::max(worst_violation, check.lhs - check.rhs);
    }
  }
  CheckResult result;
  result.name = "contraction";
  result.passed = worst_violation <= 1e-10;
  result.detail = std::to_string(trials) + " instances, worst lhs-rhs = " +
                  format(worst_violation);
  return result;
}

CheckResult verify_fixed_point(int trials, Rng& rng) {
  double worst_residual = 0.0, worst_gap = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const TabularMdp mdp = random_verify_mdp(rng);
    const TabularPolicy policy =
        random_verify_policy(rng, mdp.state_count(), mdp.action_count());
    const ConditionalVisitation d = exact_visitation(mdp, policy);
    worst_residual = std::max(
        worst_residual,
        (apply_visitation_operator(mdp, policy, d.table()) - d.table()).cwiseAbs().maxCoeff());
    worst_gap = std::max(
        worst_gap,
        (d.table() - visitation_truncated_sum(mdp, policy, 2000)).cwiseAbs().maxCoeff());
  }
  CheckResult result;
  result.name = "fixed-point";
  result.passed = worst_residual <= 1e-8 && worst_gap <= 1e-6;
  result.detail = std::to_string(trials) + " instances, operator residual = " +
                  format(worst_residual) + ", truncated-series gap = " + format(worst_gap);
  return result;
}

CheckResult verify_q_identity(int trials, Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const TabularMdp mdp = random_verify_mdp(rng);
    const TabularPolicy policy =
        random_verify_policy(rng, mdp.state_count(), mdp.action_count());
    const Eigen::MatrixXd bellman = q_value_bellman(mdp, policy);
    const Eigen::MatrixXd from_visitation =
        q_value_from_visitation(mdp, policy, exact_visitation(mdp, policy));
    worst = std::max(worst, (bellman - from_visitation).cwiseAbs().maxCoeff());
  }
  CheckResult result;
  result.name = "q-identity";
  result.passed = worst <= 1e-7;
  result.detail = std::to_string(trials) + " instances, worst route gap = " + format(worst);
  return result;
}

CheckResult verify_value_bound(int trials, Rng& rng) {
  double worst_violation = -1e300, worst_identity_gap = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    TabularMdp mdp = random_verify_mdp(rng, 5, 4, 0.2 + 0.7 * rng.uniform(),
                                       /*strictly_positive=*/true,
                                       /*nonnegative_rewards=*/true);
    // A single action makes every policy identical and the bound trivial.
    while (mdp.action_count() < 2)
      mdp = random_verify_mdp(rng, 5, 4, 0.2 + 0.7 * rng.uniform(), true, true);
    const TabularPolicy pi =
        random_verify_policy(rng, mdp.state_count(), mdp.action_count());
    const TabularPolicy ref =
        random_verify_policy(rng, mdp.state_count(), mdp.action_count());
    const ValueBoundCheck check = check_theorem1(mdp, pi, ref);
    worst_violation =
        std::max(worst_violation, (check.bound - check.lhs).maxCoeff());
    const ValueBoundCheck identity = check_theorem1(mdp, pi, pi);
    worst_identity_gap = std::max(worst_identity_gap,
                                  (identity.lhs - identity.bound).cwiseAbs().maxCoeff());
  }
  CheckResult result;
  result.name = "value-bound";
  result.passed = worst_violation <= 1e-9 && worst_identity_gap <= 1e-9;
  result.detail = std::to_string(trials) + " instances, worst bound-Q = " +
                  format(worst_violation) + ", identity gap = " + format(worst_identity_gap);
  return result;
}

CheckResult verify_geometric_sampler(Rng& rng, int draws, int target_calls) {
  CheckResult result;
  result.name = "geometric-sampler";
  result.passed = true;

  // Goodness of fit at the 0.01 level for each gamma.
  for (double gamma : {0.5, 0.9, 0.98}) {
    const int max_bin = 200;
    std::vector<long> counts(static_cast<std::size_t>(max_bin) + 1, 0);
    for (int i = 0; i < draws; ++i) {
      const int delta = sample_geometric(gamma, rng);
      ++counts[static_cast<std::size_t>(std::min(delta, max_bin + 1) - 1)];
    }
    // Merge the right tail so every bin expects at least 5 draws.
    std::vector<double> observed, expected;
    double tail_obs = 0.0, tail_exp = 0.0;
    for (int k = 1; k <= max_bin + 1; ++k) {
      const double e = k <= max_bin
                           ? draws * (1.0 - gamma) * std::pow(gamma, k - 1)
                           : draws * std::pow(gamma, max_bin);
      const double o = static_cast<double>(counts[static_cast<std::size_t>(k - 1)]);
      tail_obs += o;
      tail_exp += e;
      if (tail_exp >= 5.0 && (k > max_bin || draws * (1.0 - gamma) * std::pow(gamma, k) >= 5.0)) {
        observed.push_back(tail_obs);
        expected.push_back(tail_exp);
        tail_obs = tail_exp = 0.0;
      }
    }
    if (tail_exp > 0.0) {
      observed.back() += tail_obs;
      expected.back() += tail_exp;
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i)
      stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    const auto dof = static_cast<double>(observed.size() - 1);
    const double critical =
        boost::math::quantile(boost::math::chi_squared(dof), 0.99);
    if (stat > critical) result.passed = false;
    result.detail += "gamma=" + format(gamma) + ": chi2=" + format(stat) + "/crit=" +
                     format(critical) + "; ";
  }

  // Bootstrap fraction of make_target against the geometric tail mass.
  const double gamma = 0.98;
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 1, 0;
  const TabularEnv env(TabularMdp({p}, Eigen::MatrixXd::Zero(2, 1),
                                  Eigen::VectorXd::Constant(2, 0.5), gamma));
  FactoredVisitationNet net(env.encoding_size(), 1, env.encoding_widths(), 8, 1, 1.0, rng);
  for (int horizon : {1, 5, 10}) {
    NStepSegment seg;
    seg.horizon = horizon;
    for (int i = 0; i <= horizon; ++i) seg.states.push_back(i % 2);
    seg.actions.assign(static_cast<std::size_t>(horizon), 0);
    long bootstrapped = 0;
    for (int i = 0; i < target_calls; ++i)
      bootstrapped +=
          make_target(seg, env, uniform_policy(1), net, gamma, rng).bootstrapped;
    const double fraction = static_cast<double>(bootstrapped) / target_calls;
    const double expected_fraction = std::pow(gamma, horizon);
    const double rel = std::abs(fraction - expected_fraction) / expected_fraction;
    if (rel > 0.01) result.passed = false;
    result.detail += "N=" + std::to_string(horizon) + ": boot=" + format(fraction) +
                     " vs " + format(expected_fraction) + "; ";
  }
  return result;
}

CheckResult verify_intrinsic_unbiasedness(int instances, int samples, double tol, Rng& rng) {
  CheckResult result;
  result.name = "intrinsic-unbiasedness";
  result.passed = true;
  for (int instance = 0; instance < instances; ++instance) {
    const TabularMdp mdp = random_verify_mdp(rng, 6, 3, 0.5 + 0.4 * rng.uniform(),
                                             /*strictly_positive=*/true);
    const TabularPolicy policy =
        random_verify_policy(rng, mdp.state_count(), mdp.action_count());
    const auto channel = make_identity_channel(mdp.state_count(), 0.01);
    const ConditionalVisitation d = exact_visitation(mdp, policy);
    const Eigen::MatrixXd exact = exact_kl_reward(*channel, mdp, policy);
    // Probe the (s,a) with the largest divergence plus the first pair.
    int worst_s = 0, worst_a = 0;
    exact.cwiseAbs().maxCoeff(&worst_s, &worst_a);
    for (const auto [s, a] : {std::pair{worst_s, worst_a}, std::pair{0, 0}}) {
      const Eigen::VectorXd q = exact_feature_distribution(*channel, policy, d, s, a);
      double total = 0.0;
      for (int i = 0; i < samples; ++i) {
        const int future = rng.categorical(d.row(s, a));
        const int a2 = rng.categorical(policy.row(future));
        const int z = channel->feature_of(future, a2);
        total += intrinsic_reward(*channel, FeatureSample{z, std::log(q[z])});
      }
      const double gap = std::abs(total / samples - exact(s, a));
      if (gap > tol) result.passed = false;
      result.detail += "instance " + std::to_string(instance) + " (s=" + std::to_string(s) +
                       ",a=" + std::to_string(a) + "): gap=" + format(gap) + "; ";
    }
  }
  return result;
}

CheckResult verify_gradients(int probes_per_loss, Rng& rng) {
  CheckResult result;
  result.name = "gradient-check";
  result.passed = true;
  const auto env = make_env("Empty-4x4", 0);
  const PolicyFn rollouts = uniform_policy(env->action_count());

  const auto flat_grad = [](const Mlp& net, const MlpGrads& grads) {
    Eigen::VectorXd flat(net.parameter_count());
    Eigen::Index pos = 0;
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
      const auto& w = grads.weights[i];
      flat.segment(pos, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
      pos += w.size();
      flat.segment(pos, grads.biases[i].size()) = grads.biases[i];
      pos += grads.biases[i].size();
    }
    return flat;
  };
  const auto probe = [&](Mlp& net, const Eigen::VectorXd& analytic,
                         const std::function<double()>& loss, const char* what) {
    double worst = 0.0;
    for (int i = 0; i < probes_per_loss; ++i) {
      const auto idx = static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(net.parameter_count())));
      const double original = net.parameter(idx);
      const double h = 1e-5;
      net.set_parameter(idx, original + h);
      const double up = loss();
      net.set_parameter(idx, original - h);
      const double down = loss();
      net.set_parameter(idx, original);
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[static_cast<Eigen::Index>(idx)];
      worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
    }
    if (worst > 1e-4) result.passed = false;
    result.detail += std::string(what) + ": worst rel err = " + format(worst) + "; ";
  };

  // Visitation cross-entropy loss.
  {
    FactoredVisitationNet net =
        FactoredVisitationNet::for_env(*env, 24, 2, 1.0, rng);
    Rng data_rng(derive_seed(7, 1));
    const auto segments = collect_segments(*env, rollouts, 32, 4, 30, data_rng);
    const VisitationBatch batch = prepare_visitation_batch(
        std::vector<NStepSegment>(segments.begin(), segments.begin() + 32), *env, rollouts,
        net, 0.9, data_rng);
    MlpGrads grads = net.online().zero_grads();
    (void)visitation_loss_and_grad(net, batch, grads);
    probe(net.online(), flat_grad(net.online(), grads),
          [&] { return visitation_loss(net, batch); }, "visitation");
  }

  // Critic regression loss.
  {
    Actor actor{Mlp(env->encoding_size(), {24, env->action_count()}, rng), 0.002};
    Critic critic{TargetPair(Mlp(env->encoding_size() + env->action_count(), {24, 1}, rng),
                             0.1)};
    Rng data_rng(derive_seed(7, 2));
    const auto segments = collect_segments(*env, rollouts, 32, 1, 30, data_rng);
    ExperimentConfig cfg;
    cfg.gamma = 0.9;
    const CriticBatch batch = prepare_critic_batch(
        std::vector<NStepSegment>(segments.begin(), segments.begin() + 32), *env, actor,
        critic, nullptr, nullptr, nullptr, cfg, data_rng);
    MlpGrads grads = critic.pair.online.zero_grads();
    (void)critic_loss_and_grad(critic.pair.online, batch, grads);
    probe(critic.pair.online, flat_grad(critic.pair.online, grads),
          [&] { return critic_loss(critic.pair.online, batch); }, "critic");
  }

  // Actor score-function loss.
  {
    Actor actor{Mlp(env->encoding_size(), {24, env->action_count()}, rng), 0.002};
    Critic critic{TargetPair(Mlp(env->encoding_size() + env->action_count(), {24, 1}, rng),
                             0.1)};
    Rng data_rng(derive_seed(7, 3));
    const auto segments = collect_segments(*env, rollouts, 32, 1, 30, data_rng);
    const ActorBatch batch = prepare_actor_batch(
        std::vector<NStepSegment>(segments.begin(), segments.begin() + 32), *env, actor,
        critic, data_rng);
    MlpGrads grads = actor.net.zero_grads();
    (void)actor_loss_and_grad(actor.net, batch, grads);
    probe(actor.net, flat_grad(actor.net, grads),
          [&] { return actor_loss(actor.net, batch); }, "actor");
  }
  return result;
}

std::vector<CheckResult> run_oracle_suite(Rng& rng) {
  std::vector<CheckResult> results;
  results.push_back(verify_contraction(100, rng));
  results.push_back(verify_fixed_point(20, rng));
  results.push_back(verify_q_identity(20, rng));
  results.push_back(verify_value_bound(50, rng));
  return results;
}

std::vector<CheckResult> run_verification_suite(Rng& rng) {
  std::vector<CheckResult> results = run_oracle_suite(rng);
  results.push_back(verify_geometric_sampler(rng));
  results.push_back(verify_intrinsic_unbiasedness(3, 100000, 0.01, rng));
  results.push_back(verify_gradients(100, rng));
  return results;
}

}  // namespace visitrl
