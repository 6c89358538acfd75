#pragma once

#include <string>
#include <vector>

#include "visitrl/mdp.hpp"
#include "visitrl/rng.hpp"

namespace visitrl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Random problem instances for the verification suites.
TabularMdp random_verify_mdp(Rng& rng, int max_states = 16, int max_actions = 4,
                             double gamma = -1.0, bool strictly_positive = false,
                             bool nonnegative_rewards = false);
TabularPolicy random_verify_policy(Rng& rng, int n_states, int n_actions,
                                   double floor = 0.05);
Eigen::MatrixXd random_verify_conditional(Rng& rng, int n_states, int n_actions);

/// The operator is a gamma-contraction in the sup-L_n norms (n = 1, 2) on
/// random instances and random conditional-table pairs.
CheckResult verify_contraction(int trials, Rng& rng);

/// The linear-solve visitation is a fixed point of the operator (1e-8) and
/// matches the truncated-series oracle (1e-6).
CheckResult verify_fixed_point(int trials, Rng& rng);

/// Bellman-solve Q equals the visitation-identity Q within 1e-7.
CheckResult verify_q_identity(int trials, Rng& rng);

/// Value lower bound from the visitation log-ratio on strictly positive
/// instances with nonnegative rewards; exact equality for identical policies.
CheckResult verify_value_bound(int trials, Rng& rng);

/// Chi-square goodness of fit of the geometric sampler at the 0.01 level for
/// gamma in {0.5, 0.9, 0.98} with draws per gamma, plus bootstrap fractions
/// of make_target within 1% of gamma^N for N in {1, 5, 10}.
CheckResult verify_geometric_sampler(Rng& rng, int draws = 1000000,
                                     int target_calls = 100000);

/// Monte-Carlo mean of the single-sample intrinsic reward matches the exact
/// negative KL within tol on random tabular instances.
CheckResult verify_intrinsic_unbiasedness(int instances, int samples, double tol, Rng& rng);

/// Analytic gradients of the visitation, critic and actor losses against
/// central finite differences (probes random coordinates of each).
CheckResult verify_gradients(int probes_per_loss, Rng& rng);

/// Theorem-style oracle checks only (contraction, fixed point, Q identity,
/// value bound).
std::vector<CheckResult> run_oracle_suite(Rng& rng);

/// Full property suite: oracle checks plus sampler, unbiasedness and
/// gradient verification.
std::vector<CheckResult> run_verification_suite(Rng& rng);

}  // namespace visitrl
