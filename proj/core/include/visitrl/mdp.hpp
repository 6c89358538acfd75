#pragma once

#include <vector>

#include <Eigen/Dense>

namespace visitrl {

/// Finite Markov decision process held as explicit dense tables: one S x S
/// transition matrix per action, an S x A reward table, an initial state
/// distribution and a discount factor in [0, 1).
///
/// Construction validates that every transition row and the initial vector
/// are probability distributions (within 1e-9) and throws otherwise.
class TabularMdp {
 public:
  TabularMdp(std::vector<Eigen::MatrixXd> transition, Eigen::MatrixXd reward,
             Eigen::VectorXd initial, double gamma);

  int state_count() const { return n_states_; }
  int action_count() const { return n_actions_; }
  double gamma() const { return gamma_; }

  double transition(int s, int a, int next) const { return transition_[a](s, next); }
  const Eigen::MatrixXd& transition_matrix(int a) const { return transition_[a]; }
  double reward(int s, int a) const { return reward_(s, a); }
  const Eigen::MatrixXd& rewards() const { return reward_; }
  const Eigen::VectorXd& initial() const { return initial_; }

  TabularMdp with_gamma(double gamma) const;
  TabularMdp with_rewards(Eigen::MatrixXd reward) const;

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<Eigen::MatrixXd> transition_;
  Eigen::MatrixXd reward_;
  Eigen::VectorXd initial_;
  double gamma_ = 0.0;
};

/// Row-stochastic policy table over a finite MDP (also usable as a behavior
/// policy). Rows must sum to 1 within 1e-9.
class TabularPolicy {
 public:
  explicit TabularPolicy(Eigen::MatrixXd probs);

  static TabularPolicy uniform(int n_states, int n_actions);

  int state_count() const { return static_cast<int>(probs_.rows()); }
  int action_count() const { return static_cast<int>(probs_.cols()); }
  double prob(int s, int a) const { return probs_(s, a); }
  Eigen::VectorXd row(int s) const { return probs_.row(s).transpose(); }
  const Eigen::MatrixXd& probs() const { return probs_; }

 private:
  Eigen::MatrixXd probs_;
};

}  // namespace visitrl
