#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Core>

namespace visitrl {

/// Deterministic random source used by every stochastic routine in the
/// library. Sampling primitives are implemented directly on top of the
/// mt19937_64 stream (instead of the std:: distributions) so that a seed
/// reproduces the same draws on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in {0, ..., n-1}. Requires n >= 1.
  int uniform_int(int n);

  /// Index sampled proportionally to the (nonnegative) entries of probs.
  int categorical(const Eigen::VectorXd& probs);

  /// Delta >= 1 with P(delta = k) = (1 - gamma) * gamma^(k-1).
  /// gamma == 0 degenerates to the constant 1.
  int geometric(double gamma);

  /// Geometric draw conditioned on delta <= max_delta.
  int truncated_geometric(double gamma, int max_delta);

  std::uint64_t raw() { return gen_(); }

  /// Serializes / restores the full generator state (textual, exact).
  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 gen_;
};

/// Derives an independent child seed from a base seed and a stream index
/// (splitmix64 finalizer over the combined value).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace visitrl
