#include "visitrl/visitation.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace visitrl {

FactoredVisitationNet::FactoredVisitationNet(int state_dim, int action_count,
                                             std::vector<int> head_widths, int hidden_width,
                                             int hidden_layers, double tau, Rng& rng)
    : state_dim_(state_dim), action_count_(action_count), head_widths_(std::move(head_widths)) {
  if (head_widths_.empty())
    throw std::invalid_argument("FactoredVisitationNet: need at least one head");
  head_offsets_.resize(head_widths_.size());
  int offset = 0;
  for (std::size_t i = 0; i < head_widths_.size(); ++i) {
    head_offsets_[i] = offset;
    offset += head_widths_[i];
  }
  std::vector<int> widths(static_cast<std::size_t>(hidden_layers), hidden_width);
  widths.push_back(offset);
  pair_ = TargetPair(Mlp(input_dim(), widths, rng), tau);
}

FactoredVisitationNet FactoredVisitationNet::for_env(const DiscreteEnv& env, int hidden_width,
                                                     int hidden_layers, double tau, Rng& rng) {
  return FactoredVisitationNet(env.encoding_size(), env.action_count(), env.encoding_widths(),
                               hidden_width, hidden_layers, tau, rng);
}

std::vector<Eigen::VectorXd> FactoredVisitationNet::head_probs(const Eigen::VectorXd& input,
                                                               bool use_target) const {
  const Eigen::VectorXd logits =
      (use_target ? pair_.target : pair_.online).forward(input);
  std::vector<Eigen::VectorXd> probs;
  probs.reserve(head_widths_.size());
  for (std::size_t h = 0; h < head_widths_.size(); ++h)
    probs.push_back(softmax(logits.segment(head_offsets_[h], head_widths_[h])));
  return probs;
}

std::vector<int> FactoredVisitationNet::sample_components(const Eigen::VectorXd& input,
                                                          bool use_target, Rng& rng) const {
  const auto probs = head_probs(input, use_target);
  std::vector<int> components(probs.size());
  for (std::size_t h = 0; h < probs.size(); ++h) components[h] = rng.categorical(probs[h]);
  return components;
}

double FactoredVisitationNet::log_prob_components(const Eigen::VectorXd& input,
                                                  std::span<const int> components,
                                                  bool use_target) const {
  if (components.size() != head_widths_.size())
    throw std::invalid_argument("log_prob_components: component count mismatch");
  const Eigen::VectorXd logits =
      (use_target ? pair_.target : pair_.online).forward(input);
  double total = 0.0;
  for (std::size_t h = 0; h < head_widths_.size(); ++h) {
    if (components[h] < 0 || components[h] >= head_widths_[h])
      throw std::invalid_argument("log_prob_components: component out of range");
    const Eigen::VectorXd block = logits.segment(head_offsets_[h], head_widths_[h]);
    total += block[components[h]] - log_sum_exp(block);
  }
  return total;
}

Eigen::VectorXd sa_input(const DiscreteEnv& env, int state, int action) {
  const int state_dim = env.encoding_size();
  Eigen::VectorXd input = Eigen::VectorXd::Zero(state_dim + env.action_count());
  input.head(state_dim) = env.encode(state);
  input[state_dim + action] = 1.0;
  return input;
}

int sample_geometric(double gamma, Rng& rng) { return rng.geometric(gamma); }

std::vector<int> sample_future_state(const FactoredVisitationNet& net, const DiscreteEnv& env,
                                     int state, int action, bool use_target, Rng& rng) {
  return net.sample_components(sa_input(env, state, action), use_target, rng);
}

double log_prob_future(const FactoredVisitationNet& net, const DiscreteEnv& env, int state,
                       int action, std::span<const int> future_components, bool use_target) {
  return net.log_prob_components(sa_input(env, state, action), future_components, use_target);
}

BootstrapTargetSample make_target(const NStepSegment& segment, const DiscreteEnv& env,
                                  const PolicyFn& policy, const FactoredVisitationNet& net,
                                  double gamma, Rng& rng) {
  BootstrapTargetSample out;
  out.head_state = segment.states[0];
  out.head_action = segment.actions[0];
  out.delta = rng.geometric(gamma);
  const int valid = segment.valid_steps();
  if (out.delta <= valid) {
    out.target_components = env.state_components(segment.states[static_cast<std::size_t>(out.delta)]);
    return out;
  }
  out.bootstrapped = true;
  const int anchor = segment.states[static_cast<std::size_t>(valid)];
  if (env.is_absorbing(anchor)) {
    out.target_components = env.state_components(anchor);
  } else {
    const int next_action = rng.categorical(policy(anchor));
    out.target_components =
        net.sample_components(sa_input(env, anchor, next_action), /*use_target=*/true, rng);
  }
  return out;
}

VisitationBatch prepare_visitation_batch(const std::vector<NStepSegment>& segments,
                                         const DiscreteEnv& env, const PolicyFn& policy,
                                         const FactoredVisitationNet& net, double gamma,
                                         Rng& rng) {
  VisitationBatch batch;
  batch.inputs.resize(net.input_dim(), static_cast<Eigen::Index>(segments.size()));
  batch.target_components.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    BootstrapTargetSample target = make_target(segments[i], env, policy, net, gamma, rng);
    batch.inputs.col(static_cast<Eigen::Index>(i)) =
        sa_input(env, target.head_state, target.head_action);
    batch.target_components.push_back(std::move(target.target_components));
  }
  return batch;
}

namespace {

double visitation_loss_impl(const FactoredVisitationNet& net, const VisitationBatch& batch,
                            MlpGrads* grads) {
  if (batch.size() == 0) throw std::invalid_argument("visitation loss: empty batch");
  const auto& widths = net.head_widths();
  MlpCache cache;
  const Eigen::MatrixXd logits = net.online().forward_cached(batch.inputs, cache);
  Eigen::MatrixXd logit_grad;
  if (grads != nullptr) logit_grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  const double inv_batch = 1.0 / batch.size();
  double loss = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    const auto& components = batch.target_components[static_cast<std::size_t>(i)];
    int offset = 0;
    for (std::size_t h = 0; h < widths.size(); ++h) {
      const Eigen::VectorXd block = logits.col(i).segment(offset, widths[h]);
      const Eigen::VectorXd probs = softmax(block);
      loss -= inv_batch * (block[components[h]] - log_sum_exp(block));
      if (grads != nullptr) {
        logit_grad.col(i).segment(offset, widths[h]) = inv_batch * probs;
        logit_grad(offset + components[h], i) -= inv_batch;
      }
      offset += widths[h];
    }
  }
  if (grads != nullptr) net.online().backward(cache, logit_grad, *grads);
  return loss;
}

}  // namespace

double visitation_loss(const FactoredVisitationNet& net, const VisitationBatch& batch) {
  return visitation_loss_impl(net, batch, nullptr);
}

double visitation_loss_and_grad(const FactoredVisitationNet& net, const VisitationBatch& batch,
                                MlpGrads& grads) {
  return visitation_loss_impl(net, batch, &grads);
}

double visitation_train_step(FactoredVisitationNet& net, AdamOptimizer& optimizer,
                             const ReplayBuffer& buffer, int batch_size,
                             const DiscreteEnv& env, const PolicyFn& policy, double gamma,
                             Rng& rng) {
  const std::vector<NStepSegment> segments = buffer.sample(batch_size, rng);
  const VisitationBatch batch = prepare_visitation_batch(segments, env, policy, net, gamma, rng);
  MlpGrads grads = net.online().zero_grads();
  const double loss = visitation_loss_and_grad(net, batch, grads);
  optimizer.step(net.online(), grads);
  return loss;
}

}  // namespace visitrl
