#include "visitrl/nnet.hpp"

#include <cmath>
#include <stdexcept>

namespace visitrl {

void MlpGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void MlpGrads::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

std::size_t MlpGrads::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

Mlp::Mlp(int input_dim, const std::vector<int>& layer_widths, Rng& rng)
    : input_dim_(input_dim) {
  if (input_dim < 1) throw std::invalid_argument("Mlp: input_dim must be >= 1");
  if (layer_widths.empty()) throw std::invalid_argument("Mlp: need at least one layer");
  int in = input_dim;
  for (int out : layer_widths) {
    if (out < 1) throw std::invalid_argument("Mlp: layer width must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    Eigen::VectorXd b(out);
    for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = bound * (2.0 * rng.uniform() - 1.0);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
    in = out;
  }
}

int Mlp::output_dim() const {
  if (weights_.empty()) return 0;
  return static_cast<int>(weights_.back().rows());
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input)).col(0);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim_)
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  Eigen::MatrixXd h = inputs;
  for (int i = 0; i < layer_count(); ++i) {
    h = (weights_[static_cast<std::size_t>(i)] * h).colwise() +
        biases_[static_cast<std::size_t>(i)];
    if (i + 1 < layer_count()) h = h.cwiseMax(0.0);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_cached(const Eigen::MatrixXd& inputs, MlpCache& cache) const {
  if (inputs.rows() != input_dim_)
    throw std::invalid_argument("Mlp::forward_cached: input dimension mismatch");
  cache.input = inputs;
  cache.pre_activation.assign(static_cast<std::size_t>(layer_count()), {});
  cache.activation.assign(static_cast<std::size_t>(layer_count()), {});
  Eigen::MatrixXd h = inputs;
  for (int i = 0; i < layer_count(); ++i) {
    Eigen::MatrixXd z = (weights_[static_cast<std::size_t>(i)] * h).colwise() +
                        biases_[static_cast<std::size_t>(i)];
    cache.pre_activation[static_cast<std::size_t>(i)] = z;
    h = (i + 1 < layer_count()) ? z.cwiseMax(0.0).eval() : z;
    cache.activation[static_cast<std::size_t>(i)] = h;
  }
  return h;
}

void Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& output_grad,
                   MlpGrads& grads) const {
  if (grads.weights.empty()) grads = zero_grads();
  Eigen::MatrixXd g = output_grad;
  for (int i = layer_count() - 1; i >= 0; --i) {
    const Eigen::MatrixXd& below =
        i == 0 ? cache.input : cache.activation[static_cast<std::size_t>(i - 1)];
    grads.weights[static_cast<std::size_t>(i)].noalias() += g * below.transpose();
    grads.biases[static_cast<std::size_t>(i)] += g.rowwise().sum();
    if (i > 0) {
      g = (weights_[static_cast<std::size_t>(i)].transpose() * g).eval();
      // ReLU mask from the stored pre-activations.
      g = (cache.pre_activation[static_cast<std::size_t>(i - 1)].array() > 0.0)
              .select(g, Eigen::MatrixXd::Zero(g.rows(), g.cols()));
    }
  }
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads grads;
  for (const auto& w : weights_) grads.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases_) grads.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return grads;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights_) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases_) n += static_cast<std::size_t>(b.size());
  return n;
}

namespace {

// Parameter layout for flat indexing: per layer, weights (column-major, the
// Eigen default) then bias.
template <typename Net, typename Fn>
void locate_parameter(Net& net, std::size_t index, Fn&& fn) {
  for (int i = 0; i < net.layer_count(); ++i) {
    const std::size_t w_size = static_cast<std::size_t>(net.weight(i).size());
    if (index < w_size) {
      fn(net.weight(i).data()[index]);
      return;
    }
    index -= w_size;
    const std::size_t b_size = static_cast<std::size_t>(net.bias(i).size());
    if (index < b_size) {
      fn(net.bias(i).data()[index]);
      return;
    }
    index -= b_size;
  }
  throw std::out_of_range("Mlp parameter index out of range");
}

}  // namespace

double Mlp::parameter(std::size_t index) const {
  double value = 0.0;
  locate_parameter(*this, index, [&](const double& p) { value = p; });
  return value;
}

void Mlp::set_parameter(std::size_t index, double value) {
  locate_parameter(*this, index, [&](double& p) { p = value; });
}

Eigen::VectorXd Mlp::flatten() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index pos = 0;
  for (int i = 0; i < layer_count(); ++i) {
    const auto& w = weights_[static_cast<std::size_t>(i)];
    out.segment(pos, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    pos += w.size();
    const auto& b = biases_[static_cast<std::size_t>(i)];
    out.segment(pos, b.size()) = b;
    pos += b.size();
  }
  return out;
}

void Mlp::unflatten(const Eigen::VectorXd& params) {
  if (params.size() != static_cast<Eigen::Index>(parameter_count()))
    throw std::invalid_argument("Mlp::unflatten: parameter count mismatch");
  Eigen::Index pos = 0;
  for (int i = 0; i < layer_count(); ++i) {
    auto& w = weights_[static_cast<std::size_t>(i)];
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = params.segment(pos, w.size());
    pos += w.size();
    auto& b = biases_[static_cast<std::size_t>(i)];
    b = params.segment(pos, b.size());
    pos += b.size();
  }
}

bool Mlp::same_shape(const Mlp& other) const {
  if (input_dim_ != other.input_dim_ || layer_count() != other.layer_count()) return false;
  for (int i = 0; i < layer_count(); ++i)
    if (weight(i).rows() != other.weight(i).rows() || weight(i).cols() != other.weight(i).cols())
      return false;
  return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (!a.same_shape(b)) return false;
  for (int i = 0; i < a.layer_count(); ++i)
    if (a.weight(i) != b.weight(i) || a.bias(i) != b.bias(i)) return false;
  return true;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  const Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  return logits.array() - log_sum_exp(logits);
}

void sgd_step(Mlp& net, const MlpGrads& grads, double learning_rate) {
  for (int i = 0; i < net.layer_count(); ++i) {
    net.weight(i) -= learning_rate * grads.weights[static_cast<std::size_t>(i)];
    net.bias(i) -= learning_rate * grads.biases[static_cast<std::size_t>(i)];
  }
}

AdamOptimizer::AdamOptimizer(const Mlp& net, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  m_ = net.zero_grads();
  v_ = net.zero_grads();
}

void AdamOptimizer::step(Mlp& net, const MlpGrads& grads) {
  if (m_.weights.size() != static_cast<std::size_t>(net.layer_count()))
    throw std::invalid_argument("AdamOptimizer: state does not match the network");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (int i = 0; i < net.layer_count(); ++i) {
    auto& mw = m_.weights[static_cast<std::size_t>(i)];
    auto& vw = v_.weights[static_cast<std::size_t>(i)];
    const auto& gw = grads.weights[static_cast<std::size_t>(i)];
    mw = beta1_ * mw + (1.0 - beta1_) * gw;
    vw = beta2_ * vw + (1.0 - beta2_) * gw.cwiseProduct(gw);
    net.weight(i).array() -=
        learning_rate_ * (mw.array() / bc1) / ((vw.array() / bc2).sqrt() + epsilon_);

    auto& mb = m_.biases[static_cast<std::size_t>(i)];
    auto& vb = v_.biases[static_cast<std::size_t>(i)];
    const auto& gb = grads.biases[static_cast<std::size_t>(i)];
    mb = beta1_ * mb + (1.0 - beta1_) * gb;
    vb = beta2_ * vb + (1.0 - beta2_) * gb.cwiseProduct(gb);
    net.bias(i).array() -=
        learning_rate_ * (mb.array() / bc1) / ((vb.array() / bc2).sqrt() + epsilon_);
  }
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
  if (!target.same_shape(online))
    throw std::invalid_argument("polyak_update: shape mismatch");
  if (tau <= 0.0 || tau > 1.0)
    throw std::invalid_argument("polyak_update: tau must be in (0, 1]");
  for (int i = 0; i < target.layer_count(); ++i) {
    target.weight(i) = tau * online.weight(i) + (1.0 - tau) * target.weight(i);
    target.bias(i) = tau * online.bias(i) + (1.0 - tau) * target.bias(i);
  }
}

}  // namespace visitrl
