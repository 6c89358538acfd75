#include "visitrl/mdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace visitrl {

namespace {

constexpr double kRowTolerance = 1e-9;

void require_distribution(const Eigen::VectorXd& row, const std::string& what) {
  if ((row.array() < 0.0).any())
    throw std::invalid_argument(what + ": negative probability entry");
  if (std::abs(row.sum() - 1.0) > kRowTolerance)
    throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(row.sum()));
}

}  // namespace

TabularMdp::TabularMdp(std::vector<Eigen::MatrixXd> transition, Eigen::MatrixXd reward,
                       Eigen::VectorXd initial, double gamma)
    : n_states_(static_cast<int>(initial.size())),
      n_actions_(static_cast<int>(transition.size())),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      initial_(std::move(initial)),
      gamma_(gamma) {
  if (n_states_ < 1) throw std::invalid_argument("TabularMdp: need at least one state");
  if (n_actions_ < 1) throw std::invalid_argument("TabularMdp: need at least one action");
  if (gamma_ < 0.0 || gamma_ >= 1.0)
    throw std::invalid_argument("TabularMdp: gamma must be in [0, 1)");
  if (reward_.rows() != n_states_ || reward_.cols() != n_actions_)
    throw std::invalid_argument("TabularMdp: reward table must be n_states x n_actions");
  if (!reward_.allFinite()) throw std::invalid_argument("TabularMdp: reward table must be bounded");
  for (int a = 0; a < n_actions_; ++a) {
    const auto& p = transition_[a];
    if (p.rows() != n_states_ || p.cols() != n_states_)
      throw std::invalid_argument("TabularMdp: transition matrix must be n_states x n_states");
    for (int s = 0; s < n_states_; ++s)
      require_distribution(p.row(s).transpose(),
                           "TabularMdp: transition(s=" + std::to_string(s) +
                               ", a=" + std::to_string(a) + ")");
  }
  require_distribution(initial_, "TabularMdp: initial distribution");
}

TabularMdp TabularMdp::with_gamma(double gamma) const {
  return TabularMdp(transition_, reward_, initial_, gamma);
}

TabularMdp TabularMdp::with_rewards(Eigen::MatrixXd reward) const {
  return TabularMdp(transition_, std::move(reward), initial_, gamma_);
}

TabularPolicy::TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() < 1 || probs_.cols() < 1)
    throw std::invalid_argument("TabularPolicy: empty table");
  for (int s = 0; s < probs_.rows(); ++s)
    require_distribution(probs_.row(s).transpose(),
                         "TabularPolicy: row " + std::to_string(s));
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return TabularPolicy(
      Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions));
}

}  // namespace visitrl
