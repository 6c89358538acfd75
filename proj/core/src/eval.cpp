#include "visitrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "visitrl/oracle.hpp"

namespace visitrl {

double mc_expected_return(const DiscreteEnv& env, const PolicyFn& policy, int n_rollouts,
                          int max_steps, double gamma, Rng& rng) {
  if (n_rollouts < 1) throw std::invalid_argument("mc_expected_return: n_rollouts >= 1");
  double total = 0.0;
  for (int i = 0; i < n_rollouts; ++i)
    total += discounted_return(sample_trajectory(env, policy, max_steps, rng), gamma);
  return total / n_rollouts;
}

namespace {

double entropy_nats(const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    const double p = weights[i] / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double mc_discounted_feature_entropy(const DiscreteEnv& env, const PolicyFn& policy,
                                     const FeatureChannel& channel, int n_rollouts,
                                     int max_steps, double gamma, Rng& rng) {
  if (n_rollouts < 1)
    throw std::invalid_argument("mc_discounted_feature_entropy: n_rollouts >= 1");
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(channel.feature_count());
  for (int rollout = 0; rollout < n_rollouts; ++rollout) {
    int state = env.sample_initial(rng);
    double discount = 1.0;
    for (int t = 0; t < max_steps; ++t) {
      if (env.is_absorbing(state)) {
        // The process stays here forever; assign the whole remaining mass.
        weights[channel.feature_of(state, 0)] += discount;
        discount = 0.0;
        break;
      }
      const int action = rng.categorical(policy(state));
      weights[channel.feature_of(state, action)] += (1.0 - gamma) * discount;
      discount *= gamma;
      state = env.sample_step(state, action, rng).next_state;
    }
    if (discount > 0.0 && env.is_absorbing(state))
      weights[channel.feature_of(state, 0)] += discount;
  }
  return entropy_nats(weights);
}

double exact_discounted_feature_entropy(const TabularMdp& mdp, const TabularPolicy& policy,
                                        const FeatureChannel& channel) {
  const Eigen::VectorXd state_marginal = exact_marginal_visitation(mdp, policy);
  Eigen::VectorXd feature_weights = Eigen::VectorXd::Zero(channel.feature_count());
  for (int s = 0; s < mdp.state_count(); ++s)
    for (int a = 0; a < mdp.action_count(); ++a)
      feature_weights[channel.feature_of(s, a)] += state_marginal[s] * policy.prob(s, a);
  return entropy_nats(feature_weights);
}

double iqm(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("iqm: empty input");
  std::sort(values.begin(), values.end());
  const auto percentile = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return (1.0 - frac) * values[lo] + frac * values[hi];
  };
  const double q25 = percentile(0.25);
  const double q75 = percentile(0.75);
  double total = 0.0;
  int count = 0;
  for (double v : values)
    if (v >= q25 && v <= q75) {
      total += v;
      ++count;
    }
  return total / count;
}

ConfidenceBand iqm_bootstrap_band(const std::vector<double>& values, int resamples,
                                  double level, Rng& rng) {
  if (values.empty()) throw std::invalid_argument("iqm_bootstrap_band: empty input");
  if (level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("iqm_bootstrap_band: level must be in (0, 1)");
  ConfidenceBand band;
  band.point = iqm(values);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  std::vector<double> resample(values.size());
  const int n = static_cast<int>(values.size());
  for (int r = 0; r < resamples; ++r) {
    for (auto& v : resample) v = values[static_cast<std::size_t>(rng.uniform_int(n))];
    stats[static_cast<std::size_t>(r)] = iqm(resample);
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  const auto pick = [&](double p) {
    const double pos = p * static_cast<double>(stats.size() - 1);
    return stats[static_cast<std::size_t>(std::llround(pos))];
  };
  band.lo = std::min(pick(alpha), band.point);
  band.hi = std::max(pick(1.0 - alpha), band.point);
  return band;
}

}  // namespace visitrl
