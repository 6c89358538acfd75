#pragma once

#include <Eigen/Dense>

#include "visitrl/mdp.hpp"

namespace visitrl {

/// Conditional distribution over future states, stored as an (S*A) x S table
/// with row s*A + a holding the distribution over the future state. Each row
/// is validated to be a probability distribution within 1e-8.
class ConditionalVisitation {
 public:
  ConditionalVisitation(Eigen::MatrixXd table, int n_states, int n_actions, double gamma);

  int state_count() const { return n_states_; }
  int action_count() const { return n_actions_; }
  double gamma() const { return gamma_; }
  const Eigen::MatrixXd& table() const { return table_; }

  double prob(int s, int a, int future) const { return table_(s * n_actions_ + a, future); }
  Eigen::VectorXd row(int s, int a) const {
    return table_.row(s * n_actions_ + a).transpose();
  }

 private:
  Eigen::MatrixXd table_;
  int n_states_ = 0;
  int n_actions_ = 0;
  double gamma_ = 0.0;
};

/// One-step kernel as an (S*A) x S matrix: row (s,a) is p(.|s,a).
Eigen::MatrixXd one_step_matrix(const TabularMdp& mdp);

/// State-action to state-action kernel, (S*A) x (S*A):
/// K[(s,a),(s',a')] = p(s'|s,a) * pi(a'|s').
Eigen::MatrixXd state_action_kernel(const TabularMdp& mdp, const TabularPolicy& policy);

/// Discounted conditional future-state distribution: the unique solution of
/// d = (1-gamma) P + gamma K d, computed by a dense linear solve.
ConditionalVisitation exact_visitation(const TabularMdp& mdp, const TabularPolicy& policy);

/// Brute-force truncated series sum_{delta<=horizon} (1-gamma) gamma^(delta-1)
/// p_delta. Independent of the linear-solve path; used to cross-check it.
Eigen::MatrixXd visitation_truncated_sum(const TabularMdp& mdp, const TabularPolicy& policy,
                                         int horizon);

/// One application of the visitation operator to an arbitrary conditional
/// table: (1-gamma) P + gamma K q.
Eigen::MatrixXd apply_visitation_operator(const TabularMdp& mdp, const TabularPolicy& policy,
                                          const Eigen::MatrixXd& q);

/// sup over (s,a) of the L_n norm over the future state of a signed
/// conditional table: max_row (sum |f|^n)^(1/n).
double lbar_norm(const Eigen::MatrixXd& table, int n);

struct ContractionCheck {
  double lhs = 0.0;  // norm of the operator difference
  double rhs = 0.0;  // gamma * norm of the input difference
  bool holds(double slack = 1e-10) const { return lhs <= rhs + slack; }
};

ContractionCheck check_contraction(const TabularMdp& mdp, const TabularPolicy& policy,
                                   const Eigen::MatrixXd& q, const Eigen::MatrixXd& q2, int n);

/// State-action value function via the Bellman linear system, S x A.
Eigen::MatrixXd q_value_bellman(const TabularMdp& mdp, const TabularPolicy& policy);

/// Same value through the visitation identity:
/// Q(s,a) = R(s,a) + gamma/(1-gamma) * sum d(sbar,abar|s,a) R(sbar,abar),
/// with the immediate reward supplying the step-zero term.
Eigen::MatrixXd q_value_from_visitation(const TabularMdp& mdp, const TabularPolicy& policy,
                                        const ConditionalVisitation& visitation);

/// Computes Q along both routes and throws when they disagree beyond tol
/// (which would indicate an oracle bug).
Eigen::MatrixXd q_value_exact(const TabularMdp& mdp, const TabularPolicy& policy,
                              double tol = 1e-7);

/// Conditional state-action visitation d(sbar, abar | s, a) as an
/// (S*A) x (S*A) table: pi(abar|sbar) d(sbar|s,a).
Eigen::MatrixXd state_action_visitation(const TabularPolicy& policy,
                                        const ConditionalVisitation& visitation);

struct ValueBoundCheck {
  Eigen::MatrixXd lhs;    // Q under the evaluated policy
  Eigen::MatrixXd bound;  // Q under the reference policy scaled by the log-ratio factor
  bool holds(double tol = 1e-9) const {
    return ((lhs.array() + tol) >= bound.array()).all();
  }
};

/// Lower bound on Q^pi from the sup-norm log-ratio of the state-action
/// visitations of pi and pi_ref. Requires nonnegative rewards and strictly
/// positive visitation tables on a shared support; throws on infinite
/// log-ratios.
ValueBoundCheck check_theorem1(const TabularMdp& mdp, const TabularPolicy& policy,
                               const TabularPolicy& policy_ref);

/// Marginal discounted state distribution from the initial distribution,
/// including the step-zero term:
/// m = (1-gamma) p0 + gamma * sum_{s,a} p0(s) pi(a|s) d(.|s,a).
Eigen::VectorXd exact_marginal_visitation(const TabularMdp& mdp, const TabularPolicy& policy);

}  // namespace visitrl
