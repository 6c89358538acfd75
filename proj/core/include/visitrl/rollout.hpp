#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "visitrl/env.hpp"
#include "visitrl/rng.hpp"

namespace visitrl {

/// Maps a state index to a probability vector over actions.
using PolicyFn = std::function<Eigen::VectorXd(int state)>;

PolicyFn uniform_policy(int n_actions);
PolicyFn tabular_policy_fn(const TabularPolicy& policy);

struct Trajectory {
  std::vector<int> states;      // length() + 1 entries
  std::vector<int> actions;
  std::vector<double> rewards;  // aligned with actions
  bool absorbed = false;        // ended by reaching an absorbing state

  int length() const { return static_cast<int>(actions.size()); }
};

/// Rolls out the policy from a fresh initial state. Stops after max_steps
/// actions or as soon as an absorbing state is reached.
Trajectory sample_trajectory(const DiscreteEnv& env, const PolicyFn& policy,
                             int max_steps, Rng& rng);

double discounted_return(const std::vector<double>& rewards, double gamma);
double discounted_return(const Trajectory& traj, double gamma);

/// Contiguous window of horizon+1 states and horizon actions starting at some
/// step of an episode. Windows that run past the episode end keep their full
/// length by repeating the last in-episode state and carry truncated_at, the
/// number of real transitions in the window (in [1, horizon)). Consumers must
/// not read states past index valid_steps().
struct NStepSegment {
  std::vector<int> states;
  std::vector<int> actions;
  double reward = 0.0;  // R(s_0, a_0) of the window head
  int horizon = 0;
  std::optional<int> truncated_at;
  int start_time = 0;  // index of states[0] within its source episode

  int valid_steps() const { return truncated_at.value_or(horizon); }
};

/// All sliding windows of the trajectory: one segment per time step, so every
/// step appears as a segment head exactly once.
std::vector<NStepSegment> segment_trajectory(const Trajectory& traj, int horizon);

/// Samples trajectories until at least min_segments windows are available and
/// returns all windows of the sampled trajectories.
std::vector<NStepSegment> collect_segments(const DiscreteEnv& env, const PolicyFn& policy,
                                           int min_segments, int horizon, int max_steps,
                                           Rng& rng);

/// FIFO segment store with uniform-with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  const NStepSegment& at(std::size_t i) const { return segments_[i]; }

  void push(NStepSegment segment);
  void push_all(std::vector<NStepSegment> segments);
  void clear() { segments_.clear(); }

  /// Throws when the buffer is empty: sampling before the first collection
  /// indicates a mis-ordered training loop.
  const NStepSegment& sample_one(Rng& rng) const;
  std::vector<NStepSegment> sample(int batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<NStepSegment> segments_;
};

}  // namespace visitrl
