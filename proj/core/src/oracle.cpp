#include "visitrl/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace visitrl {

namespace {

void require_compatible(const TabularMdp& mdp, const TabularPolicy& policy) {
  if (policy.state_count() != mdp.state_count() ||
      policy.action_count() != mdp.action_count())
    throw std::invalid_argument("policy shape does not match the MDP");
}

void require_table_shape(const TabularMdp& mdp, const Eigen::MatrixXd& q,
                         const char* what) {
  if (q.rows() != static_cast<Eigen::Index>(mdp.state_count()) * mdp.action_count() ||
      q.cols() != mdp.state_count())
    throw std::invalid_argument(std::string(what) + ": table must be (S*A) x S");
}

}  // namespace

ConditionalVisitation::ConditionalVisitation(Eigen::MatrixXd table, int n_states,
                                             int n_actions, double gamma)
    : table_(std::move(table)), n_states_(n_states), n_actions_(n_actions), gamma_(gamma) {
  if (table_.rows() != static_cast<Eigen::Index>(n_states_) * n_actions_ ||
      table_.cols() != n_states_)
    throw std::invalid_argument("ConditionalVisitation: table must be (S*A) x S");
  constexpr double kSliceTolerance = 1e-8;
  for (Eigen::Index r = 0; r < table_.rows(); ++r) {
    if ((table_.row(r).array() < -kSliceTolerance).any())
      throw std::invalid_argument("ConditionalVisitation: negative probability");
    if (std::abs(table_.row(r).sum() - 1.0) > kSliceTolerance)
      throw std::invalid_argument("ConditionalVisitation: slice does not sum to 1");
  }
}

Eigen::MatrixXd one_step_matrix(const TabularMdp& mdp) {
  const int s_count = mdp.state_count();
  const int a_count = mdp.action_count();
  Eigen::MatrixXd p(static_cast<Eigen::Index>(s_count) * a_count, s_count);
  for (int s = 0; s < s_count; ++s)
    for (int a = 0; a < a_count; ++a)
      p.row(s * a_count + a) = mdp.transition_matrix(a).row(s);
  return p;
}

Eigen::MatrixXd state_action_kernel(const TabularMdp& mdp, const TabularPolicy& policy) {
  require_compatible(mdp, policy);
  const int s_count = mdp.state_count();
  const int a_count = mdp.action_count();
  const Eigen::Index rows = static_cast<Eigen::Index>(s_count) * a_count;
  Eigen::MatrixXd kernel(rows, rows);
  for (int s = 0; s < s_count; ++s)
    for (int a = 0; a < a_count; ++a) {
      const Eigen::Index row = s * a_count + a;
      for (int next = 0; next < s_count; ++next) {
        const double p_next = mdp.transition(s, a, next);
        for (int a2 = 0; a2 < a_count; ++a2)
          kernel(row, next * a_count + a2) = p_next * policy.prob(next, a2);
      }
    }
  return kernel;
}

ConditionalVisitation exact_visitation(const TabularMdp& mdp, const TabularPolicy& policy) {
  require_compatible(mdp, policy);
  const double gamma = mdp.gamma();
  const Eigen::MatrixXd p = one_step_matrix(mdp);
  const Eigen::MatrixXd kernel = state_action_kernel(mdp, policy);
  const Eigen::Index rows = kernel.rows();
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(rows, rows) - gamma * kernel;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
  if (lu.determinant() == 0.0)
    throw std::runtime_error("exact_visitation: singular system (malformed kernel)");
  Eigen::MatrixXd d = lu.solve((1.0 - gamma) * p);
  // Clear the tiny negative round-off the solve can leave behind.
  d = d.cwiseMax(0.0);
  return ConditionalVisitation(std::move(d), mdp.state_count(), mdp.action_count(), gamma);
}

Eigen::MatrixXd visitation_truncated_sum(const TabularMdp& mdp, const TabularPolicy& policy,
                                         int horizon) {
  require_compatible(mdp, policy);
  if (horizon < 1) throw std::invalid_argument("visitation_truncated_sum: horizon >= 1");
  const double gamma = mdp.gamma();
  const Eigen::MatrixXd kernel = state_action_kernel(mdp, policy);
  Eigen::MatrixXd p_delta = one_step_matrix(mdp);  // p_1
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(p_delta.rows(), p_delta.cols());
  double weight = 1.0 - gamma;
  for (int delta = 1; delta <= horizon; ++delta) {
    total += weight * p_delta;
    weight *= gamma;
    if (delta < horizon) p_delta = kernel * p_delta;
  }
  return total;
}

Eigen::MatrixXd apply_visitation_operator(const TabularMdp& mdp, const TabularPolicy& policy,
                                          const Eigen::MatrixXd& q) {
  require_compatible(mdp, policy);
  require_table_shape(mdp, q, "apply_visitation_operator");
  const double gamma = mdp.gamma();
  return (1.0 - gamma) * one_step_matrix(mdp) + gamma * state_action_kernel(mdp, policy) * q;
}

double lbar_norm(const Eigen::MatrixXd& table, int n) {
  if (n < 1) throw std::invalid_argument("lbar_norm: n must be >= 1");
  double worst = 0.0;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const double v = table.row(r).array().abs().pow(n).sum();
    worst = std::max(worst, v);
  }
  return std::pow(worst, 1.0 / n);
}

ContractionCheck check_contraction(const TabularMdp& mdp, const TabularPolicy& policy,
                                   const Eigen::MatrixXd& q, const Eigen::MatrixXd& q2,
                                   int n) {
  require_table_shape(mdp, q, "check_contraction");
  require_table_shape(mdp, q2, "check_contraction");
  const Eigen::MatrixXd tq = apply_visitation_operator(mdp, policy, q);
  const Eigen::MatrixXd tq2 = apply_visitation_operator(mdp, policy, q2);
  return {lbar_norm(tq - tq2, n), mdp.gamma() * lbar_norm(q - q2, n)};
}

Eigen::MatrixXd q_value_bellman(const TabularMdp& mdp, const TabularPolicy& policy) {
  require_compatible(mdp, policy);
  const int s_count = mdp.state_count();
  const int a_count = mdp.action_count();
  const Eigen::Index rows = static_cast<Eigen::Index>(s_count) * a_count;
  Eigen::VectorXd r(rows);
  for (int s = 0; s < s_count; ++s)
    for (int a = 0; a < a_count; ++a) r[s * a_count + a] = mdp.reward(s, a);
  const Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(rows, rows) - mdp.gamma() * state_action_kernel(mdp, policy);
  const Eigen::VectorXd q_flat = lhs.partialPivLu().solve(r);
  Eigen::MatrixXd q(s_count, a_count);
  for (int s = 0; s < s_count; ++s)
    for (int a = 0; a < a_count; ++a) q(s, a) = q_flat[s * a_count + a];
  return q;
}

Eigen::MatrixXd q_value_from_visitation(const TabularMdp& mdp, const TabularPolicy& policy,
                                        const ConditionalVisitation& visitation) {
  require_compatible(mdp, policy);
  const int s_count = mdp.state_count();
  const int a_count = mdp.action_count();
  // Expected reward of the future state under the policy: sum_a pi(a|s) R(s,a).
  Eigen::VectorXd future_reward(s_count);
  for (int s = 0; s < s_count; ++s)
    future_reward[s] = policy.row(s).dot(mdp.rewards().row(s).transpose());
  const double gamma = mdp.gamma();
  Eigen::MatrixXd q(s_count, a_count);
  for (int s = 0; s < s_count; ++s)
    for (int a = 0; a < a_count; ++a)
      q(s, a) = mdp.reward(s, a) +
                gamma / (1.0 - gamma) * visitation.row(s, a).dot(future_reward);
  return q;
}

Eigen::MatrixXd q_value_exact(const TabularMdp& mdp, const TabularPolicy& policy, double tol) {
  const Eigen::MatrixXd bellman = q_value_bellman(mdp, policy);
  const Eigen::MatrixXd from_visitation =
      q_value_from_visitation(mdp, policy, exact_visitation(mdp, policy));
  const double gap = (bellman - from_visitation).cwiseAbs().maxCoeff();
  if (gap > tol)
    throw std::runtime_error("q_value_exact: Bellman and visitation routes disagree by " +
                             std::to_string(gap));
  return bellman;
}

Eigen::MatrixXd state_action_visitation(const TabularPolicy& policy,
                                        const ConditionalVisitation& visitation) {
  const int s_count = visitation.state_count();
  const int a_count = visitation.action_count();
  const Eigen::Index rows = static_cast<Eigen::Index>(s_count) * a_count;
  Eigen::MatrixXd d(rows, rows);
  for (Eigen::Index row = 0; row < rows; ++row)
    for (int future = 0; future < s_count; ++future) {
      const double p_future = visitation.table()(row, future);
      for (int a2 = 0; a2 < a_count; ++a2)
        d(row, future * a_count + a2) = p_future * policy.prob(future, a2);
    }
  return d;
}

ValueBoundCheck check_theorem1(const TabularMdp& mdp, const TabularPolicy& policy,
                               const TabularPolicy& policy_ref) {
  if ((mdp.rewards().array() < 0.0).any())
    throw std::invalid_argument("check_theorem1: rewards must be nonnegative");
  const Eigen::MatrixXd d = state_action_visitation(policy, exact_visitation(mdp, policy));
  const Eigen::MatrixXd d_ref =
      state_action_visitation(policy_ref, exact_visitation(mdp, policy_ref));
  if ((d.array() <= 0.0).any() || (d_ref.array() <= 0.0).any())
    throw std::invalid_argument(
        "check_theorem1: visitation support mismatch (zero entry gives an infinite log-ratio)");

  const int s_count = mdp.state_count();
  const int a_count = mdp.action_count();
  ValueBoundCheck out;
  out.lhs = q_value_exact(mdp, policy);
  const Eigen::MatrixXd q_ref = q_value_exact(mdp, policy_ref);
  const Eigen::MatrixXd log_ratio = (d.array().log() - d_ref.array().log()).abs();
  out.bound.resize(s_count, a_count);
  for (int s = 0; s < s_count; ++s)
    for (int a = 0; a < a_count; ++a) {
      const double sup = log_ratio.row(s * a_count + a).maxCoeff();
      out.bound(s, a) = q_ref(s, a) * std::exp(-sup);
    }
  return out;
}

Eigen::VectorXd exact_marginal_visitation(const TabularMdp& mdp, const TabularPolicy& policy) {
  const ConditionalVisitation d = exact_visitation(mdp, policy);
  const double gamma = mdp.gamma();
  Eigen::VectorXd m = (1.0 - gamma) * mdp.initial();
  for (int s = 0; s < mdp.state_count(); ++s)
    for (int a = 0; a < mdp.action_count(); ++a) {
      const double w = mdp.initial()[s] * policy.prob(s, a);
      if (w > 0.0) m += gamma * w * d.row(s, a);
    }
  return m;
}

}  // namespace visitrl
