#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "visitrl/mdp.hpp"
#include "visitrl/rng.hpp"

namespace visitrl {

struct StepOutcome {
  int next_state = 0;
  double reward = 0.0;
};

/// A finite-state environment whose observations are concatenated one-hot
/// blocks, one block per state component. Agents and learned models only see
/// the encoding; oracles and tests work with the integer state index.
///
/// Implementations must be immutable after construction: sample_step may draw
/// randomness but must not mutate the environment, so a single instance can
/// serve several evaluation workers at once.
class DiscreteEnv {
 public:
  virtual ~DiscreteEnv() = default;

  virtual int state_count() const = 0;
  virtual int action_count() const = 0;

  /// Widths of the one-hot blocks making up an observation, in order.
  virtual const std::vector<int>& encoding_widths() const = 0;

  /// Per-block class indices of a state; components[i] < encoding_widths()[i].
  virtual std::vector<int> state_components(int state) const = 0;

  /// Inverse of state_components. Returns -1 for component combinations that
  /// do not correspond to a state (e.g. positions inside walls).
  virtual int state_from_components(std::span<const int> components) const = 0;

  virtual int sample_initial(Rng& rng) const = 0;
  virtual StepOutcome sample_step(int state, int action, Rng& rng) const = 0;

  /// True when the state transitions to itself with probability one and zero
  /// reward under every action. Trajectory collection stops there.
  virtual bool is_absorbing(int state) const = 0;

  int encoding_size() const;
  Eigen::VectorXd encode(int state) const;
  Eigen::VectorXd encode_components(std::span<const int> components) const;
};

/// Exposes a TabularMdp as an environment with a single one-hot block over
/// the state space.
class TabularEnv final : public DiscreteEnv {
 public:
  explicit TabularEnv(TabularMdp mdp);

  const TabularMdp& mdp() const { return mdp_; }

  int state_count() const override { return mdp_.state_count(); }
  int action_count() const override { return mdp_.action_count(); }
  const std::vector<int>& encoding_widths() const override { return widths_; }
  std::vector<int> state_components(int state) const override;
  int state_from_components(std::span<const int> components) const override;
  int sample_initial(Rng& rng) const override;
  StepOutcome sample_step(int state, int action, Rng& rng) const override;
  bool is_absorbing(int state) const override { return absorbing_[state]; }

 private:
  TabularMdp mdp_;
  std::vector<int> widths_;
  std::vector<bool> absorbing_;
};

}  // namespace visitrl
