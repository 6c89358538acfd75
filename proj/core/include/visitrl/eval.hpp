#pragma once

#include <string>
#include <vector>

#include "visitrl/env.hpp"
#include "visitrl/intrinsic.hpp"
#include "visitrl/rollout.hpp"

namespace visitrl {

/// Mean discounted return over fresh rollouts.
double mc_expected_return(const DiscreteEnv& env, const PolicyFn& policy, int n_rollouts,
                          int max_steps, double gamma, Rng& rng);

/// Shannon entropy (nats) of the Monte-Carlo estimate of the discounted
/// feature measure from the initial state: each visited feature at step t
/// gets weight (1-gamma) gamma^t. A rollout that reaches an absorbing state
/// at step T contributes its remaining tail mass gamma^T to that state's
/// feature; rollouts cut by max_steps drop the (tiny) remaining tail. The
/// collected weights are normalized before taking the entropy.
double mc_discounted_feature_entropy(const DiscreteEnv& env, const PolicyFn& policy,
                                     const FeatureChannel& channel, int n_rollouts,
                                     int max_steps, double gamma, Rng& rng);

/// Entropy (nats) of the exact discounted feature measure from the initial
/// distribution, through the channel's feature map. Tabular oracle for the
/// Monte-Carlo estimator.
double exact_discounted_feature_entropy(const TabularMdp& mdp, const TabularPolicy& policy,
                                        const FeatureChannel& channel);

/// Interquartile mean: the mean of the values between the 25th and 75th
/// percentiles inclusive, with linear-interpolation percentiles.
double iqm(std::vector<double> values);

struct ConfidenceBand {
  double lo = 0.0;
  double point = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap band for the interquartile mean. The band is widened
/// to contain the point estimate when resampling noise would exclude it.
ConfidenceBand iqm_bootstrap_band(const std::vector<double>& values, int resamples,
                                  double level, Rng& rng);

}  // namespace visitrl
