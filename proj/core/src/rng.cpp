#include "visitrl/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace visitrl {

double Rng::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int n) {
  if (n < 1) throw std::invalid_argument("uniform_int: n must be >= 1");
  // Rejection sampling over the top range to avoid modulo bias.
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t v;
  do {
    v = gen_();
  } while (v >= limit);
  return static_cast<int>(v % un);
}

int Rng::categorical(const Eigen::VectorXd& probs) {
  if (probs.size() == 0) throw std::invalid_argument("categorical: empty distribution");
  const double total = probs.sum();
  if (!(total > 0.0)) throw std::invalid_argument("categorical: nonpositive total mass");
  double u = uniform() * total;
  int last_positive = -1;
  for (int i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p <= 0.0) continue;
    last_positive = i;
    u -= p;
    if (u < 0.0) return i;
  }
  return last_positive;  // guard against accumulated rounding
}

int Rng::geometric(double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("geometric: gamma must be in [0, 1)");
  if (gamma == 0.0) return 1;
  // Inverse CDF: smallest k >= 1 with 1 - gamma^k >= u.
  const double u = uniform();
  const double k = std::log1p(-u) / std::log(gamma);
  const double delta = std::floor(k) + 1.0;
  if (delta < 1.0) return 1;
  if (delta > 1e9) return 1000000000;
  return static_cast<int>(delta);
}

int Rng::truncated_geometric(double gamma, int max_delta) {
  if (max_delta < 1) throw std::invalid_argument("truncated_geometric: max_delta must be >= 1");
  if (gamma <= 0.0) return 1;
  // Inverse CDF of the geometric conditioned on delta <= max_delta.
  const double tail = std::pow(gamma, max_delta);
  const double u = uniform() * (1.0 - tail);
  const double k = std::log1p(-u) / std::log(gamma);
  int delta = static_cast<int>(std::floor(k)) + 1;
  if (delta < 1) delta = 1;
  if (delta > max_delta) delta = max_delta;
  return delta;
}

std::string Rng::state() const {
  std::ostringstream out;
  out << gen_;
  return out.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream in(state);
  in >> gen_;
  if (in.fail()) throw std::invalid_argument("Rng::set_state: malformed state string");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace visitrl
