#include "visitrl/rollout.hpp"

#include <stdexcept>

namespace visitrl {

PolicyFn uniform_policy(int n_actions) {
  Eigen::VectorXd probs = Eigen::VectorXd::Constant(n_actions, 1.0 / n_actions);
  return [probs](int) { return probs; };
}

PolicyFn tabular_policy_fn(const TabularPolicy& policy) {
  Eigen::MatrixXd probs = policy.probs();
  return [probs](int s) { return probs.row(s).transpose().eval(); };
}

Trajectory sample_trajectory(const DiscreteEnv& env, const PolicyFn& policy,
                             int max_steps, Rng& rng) {
  if (max_steps < 1) throw std::invalid_argument("sample_trajectory: max_steps must be >= 1");
  Trajectory traj;
  int state = env.sample_initial(rng);
  traj.states.push_back(state);
  if (env.is_absorbing(state)) {
    traj.absorbed = true;
    return traj;
  }
  for (int t = 0; t < max_steps; ++t) {
    const int action = rng.categorical(policy(state));
    const StepOutcome outcome = env.sample_step(state, action, rng);
    traj.actions.push_back(action);
    traj.rewards.push_back(outcome.reward);
    traj.states.push_back(outcome.next_state);
    state = outcome.next_state;
    if (env.is_absorbing(state)) {
      traj.absorbed = true;
      break;
    }
  }
  return traj;
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("discounted_return: gamma must be in [0, 1)");
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    total += weight * r;
    weight *= gamma;
  }
  return total;
}

double discounted_return(const Trajectory& traj, double gamma) {
  return discounted_return(traj.rewards, gamma);
}

std::vector<NStepSegment> segment_trajectory(const Trajectory& traj, int horizon) {
  if (horizon < 1) throw std::invalid_argument("segment_trajectory: horizon must be >= 1");
  const int length = traj.length();
  std::vector<NStepSegment> segments;
  segments.reserve(static_cast<std::size_t>(length));
  for (int head = 0; head < length; ++head) {
    const int valid = std::min(horizon, length - head);
    NStepSegment seg;
    seg.horizon = horizon;
    seg.start_time = head;
    seg.reward = traj.rewards[head];
    seg.states.resize(horizon + 1);
    seg.actions.resize(horizon);
    for (int i = 0; i <= horizon; ++i)
      seg.states[i] = traj.states[head + std::min(i, valid)];
    for (int i = 0; i < horizon; ++i)
      seg.actions[i] = traj.actions[head + std::min(i, valid - 1)];
    if (valid < horizon) seg.truncated_at = valid;
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<NStepSegment> collect_segments(const DiscreteEnv& env, const PolicyFn& policy,
                                           int min_segments, int horizon, int max_steps,
                                           Rng& rng) {
  if (horizon < 1) throw std::invalid_argument("collect_segments: horizon must be >= 1");
  std::vector<NStepSegment> segments;
  while (static_cast<int>(segments.size()) < min_segments) {
    const Trajectory traj = sample_trajectory(env, policy, max_steps, rng);
    if (traj.length() == 0) continue;  // absorbed at the initial state
    auto windows = segment_trajectory(traj, horizon);
    segments.insert(segments.end(), std::make_move_iterator(windows.begin()),
                    std::make_move_iterator(windows.end()));
  }
  return segments;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::push(NStepSegment segment) {
  segments_.push_back(std::move(segment));
  while (segments_.size() > capacity_) segments_.pop_front();
}

void ReplayBuffer::push_all(std::vector<NStepSegment> segments) {
  for (auto& seg : segments) push(std::move(seg));
}

const NStepSegment& ReplayBuffer::sample_one(Rng& rng) const {
  if (segments_.empty())
    throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
  return segments_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(segments_.size())))];
}

std::vector<NStepSegment> ReplayBuffer::sample(int batch, Rng& rng) const {
  std::vector<NStepSegment> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) out.push_back(sample_one(rng));
  return out;
}

}  // namespace visitrl
