#include "visitrl/env.hpp"

#include <numeric>
#include <stdexcept>

namespace visitrl {

int DiscreteEnv::encoding_size() const {
  const auto& widths = encoding_widths();
  return std::accumulate(widths.begin(), widths.end(), 0);
}

Eigen::VectorXd DiscreteEnv::encode(int state) const {
  const std::vector<int> components = state_components(state);
  return encode_components(components);
}

Eigen::VectorXd DiscreteEnv::encode_components(std::span<const int> components) const {
  const auto& widths = encoding_widths();
  if (components.size() != widths.size())
    throw std::invalid_argument("encode_components: wrong component count");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(encoding_size());
  int offset = 0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (components[i] < 0 || components[i] >= widths[i])
      throw std::invalid_argument("encode_components: component out of range");
    out[offset + components[i]] = 1.0;
    offset += widths[i];
  }
  return out;
}

TabularEnv::TabularEnv(TabularMdp mdp) : mdp_(std::move(mdp)) {
  widths_ = {mdp_.state_count()};
  absorbing_.resize(mdp_.state_count());
  for (int s = 0; s < mdp_.state_count(); ++s) {
    bool absorbing = true;
    for (int a = 0; a < mdp_.action_count() && absorbing; ++a)
      absorbing = mdp_.transition(s, a, s) == 1.0 && mdp_.reward(s, a) == 0.0;
    absorbing_[s] = absorbing;
  }
}

std::vector<int> TabularEnv::state_components(int state) const {
  return {state};
}

int TabularEnv::state_from_components(std::span<const int> components) const {
  if (components.size() != 1) return -1;
  if (components[0] < 0 || components[0] >= state_count()) return -1;
  return components[0];
}

int TabularEnv::sample_initial(Rng& rng) const {
  return rng.categorical(mdp_.initial());
}

StepOutcome TabularEnv::sample_step(int state, int action, Rng& rng) const {
  const Eigen::VectorXd row = mdp_.transition_matrix(action).row(state).transpose();
  return {rng.categorical(row), mdp_.reward(state, action)};
}

}  // namespace visitrl
