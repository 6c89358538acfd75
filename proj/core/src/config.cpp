#include "visitrl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace visitrl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string ExperimentConfig::resolved_channel() const {
  if (channel != "auto") return channel;
  if (agent == "opac-cv") return "cv-position";
  if (agent == "opac-mv") return "mv-position";
  if (agent == "sac") return "none";
  return "none";
}

std::vector<std::string> ExperimentConfig::problems() const {
  std::vector<std::string> out;
  const auto positive = [&](const char* field, double v) {
    if (!(v > 0.0)) out.push_back(std::string(field) + ": must be positive");
  };
  if (agent != "opac-cv" && agent != "opac-mv" && agent != "sac")
    out.push_back("agent: must be one of opac-cv, opac-mv, sac");
  if (channel != "auto" && channel != "none" && channel != "cv-position" &&
      channel != "mv-position" && channel != "policy-entropy")
    out.push_back("channel: unknown key '" + channel + "'");
  if (seeds.empty()) out.push_back("seeds: need at least one seed");
  if (iterations < 1) out.push_back("iterations: must be >= 1");
  if (eval_every < 1) out.push_back("eval_every: must be >= 1");
  if (eval_rollouts < 1) out.push_back("eval_rollouts: must be >= 1");
  if (hidden_width < 1) out.push_back("hidden_width: must be >= 1");
  if (hidden_layers < 1) out.push_back("hidden_layers: must be >= 1");
  positive("lr_policy", lr_policy);
  positive("lr_critic", lr_critic);
  positive("lr_visitation", lr_visitation);
  if (max_steps < 1) out.push_back("max_steps: must be >= 1");
  if (buffer_size < 1) out.push_back("buffer_size: must be >= 1");
  if (batch_size < 1) out.push_back("batch_size: must be >= 1");
  if (tau_critic <= 0.0 || tau_critic > 1.0) out.push_back("tau_critic: must be in (0, 1]");
  if (tau_visitation <= 0.0 || tau_visitation > 1.0)
    out.push_back("tau_visitation: must be in (0, 1]");
  if (gamma < 0.0 || gamma >= 1.0) out.push_back("gamma: must be in [0, 1)");
  if (lambda_sac < 0.0) out.push_back("lambda_sac: must be >= 0");
  if (lambda < 0.0) out.push_back("lambda: must be >= 0");
  if (horizon < 1) out.push_back("horizon: must be >= 1");
  if (visitation_steps < 0) out.push_back("visitation_steps: must be >= 0");
  if (critic_steps < 1) out.push_back("critic_steps: must be >= 1");
  if (trajectories_per_iter < 1) out.push_back("trajectories_per_iter: must be >= 1");
  if (marginal_smoothing <= 0.0) out.push_back("marginal_smoothing: must be positive");
  return out;
}

void ExperimentConfig::validate() const {
  const auto issues = problems();
  if (issues.empty()) return;
  std::string message = "invalid config:";
  for (const auto& issue : issues) message += "\n  " + issue;
  throw std::invalid_argument(message);
}

std::string ExperimentConfig::to_key_values() const {
  std::ostringstream out;
  out << "env = " << env << "\n";
  out << "agent = " << agent << "\n";
  out << "channel = " << channel << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  out << "\n";
  out << "env_seed = " << env_seed << "\n";
  out << "iterations = " << iterations << "\n";
  out << "eval_every = " << eval_every << "\n";
  out << "eval_rollouts = " << eval_rollouts << "\n";
  out << "hidden_width = " << hidden_width << "\n";
  out << "hidden_layers = " << hidden_layers << "\n";
  out << "lr_policy = " << format_double(lr_policy) << "\n";
  out << "lr_critic = " << format_double(lr_critic) << "\n";
  out << "lr_visitation = " << format_double(lr_visitation) << "\n";
  out << "max_steps = " << max_steps << "\n";
  out << "buffer_size = " << buffer_size << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "tau_critic = " << format_double(tau_critic) << "\n";
  out << "tau_visitation = " << format_double(tau_visitation) << "\n";
  out << "gamma = " << format_double(gamma) << "\n";
  out << "lambda_sac = " << format_double(lambda_sac) << "\n";
  out << "lambda = " << format_double(lambda) << "\n";
  out << "horizon = " << horizon << "\n";
  out << "visitation_steps = " << visitation_steps << "\n";
  out << "critic_steps = " << critic_steps << "\n";
  out << "trajectories_per_iter = " << trajectories_per_iter << "\n";
  out << "use_env_reward = " << (use_env_reward ? "true" : "false") << "\n";
  out << "marginal_smoothing = " << format_double(marginal_smoothing) << "\n";
  out << "prefill = " << (prefill ? "true" : "false") << "\n";
  return out.str();
}

ExperimentConfig ExperimentConfig::from_key_values(const std::string& text) {
  ExperimentConfig cfg;
  const auto parse_bool = [](const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("invalid config: " + key + ": expected true/false, got '" + v + "'");
  };
  const auto parse_int = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const int out = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      return out;
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid config: " + key + ": expected an integer, got '" + v + "'");
    }
  };
  const auto parse_double = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(out)) throw std::invalid_argument("");
      return out;
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid config: " + key + ": expected a number, got '" + v + "'");
    }
  };
  const auto parse_seeds = [&](const std::string& v) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(v);
    std::string token;
    while (std::getline(in, token, ',')) {
      token = trim(token);
      if (token.empty()) continue;
      try {
        seeds.push_back(std::stoull(token));
      } catch (const std::exception&) {
        throw std::invalid_argument("invalid config: seeds: bad entry '" + token + "'");
      }
    }
    if (seeds.empty()) throw std::invalid_argument("invalid config: seeds: empty list");
    return seeds;
  };

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("invalid config: line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "env") cfg.env = value;
    else if (key == "agent") cfg.agent = value;
    else if (key == "channel") cfg.channel = value;
    else if (key == "seeds") cfg.seeds = parse_seeds(value);
    else if (key == "env_seed") cfg.env_seed = std::stoull(value);
    else if (key == "iterations") cfg.iterations = parse_int(key, value);
    else if (key == "eval_every") cfg.eval_every = parse_int(key, value);
    else if (key == "eval_rollouts") cfg.eval_rollouts = parse_int(key, value);
    else if (key == "hidden_width") cfg.hidden_width = parse_int(key, value);
    else if (key == "hidden_layers") cfg.hidden_layers = parse_int(key, value);
    else if (key == "lr_policy") cfg.lr_policy = parse_double(key, value);
    else if (key == "lr_critic") cfg.lr_critic = parse_double(key, value);
    else if (key == "lr_visitation") cfg.lr_visitation = parse_double(key, value);
    else if (key == "max_steps") cfg.max_steps = parse_int(key, value);
    else if (key == "buffer_size") cfg.buffer_size = parse_int(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
    else if (key == "tau_critic") cfg.tau_critic = parse_double(key, value);
    else if (key == "tau_visitation") cfg.tau_visitation = parse_double(key, value);
    else if (key == "gamma") cfg.gamma = parse_double(key, value);
    else if (key == "lambda_sac") cfg.lambda_sac = parse_double(key, value);
    else if (key == "lambda") cfg.lambda = parse_double(key, value);
    else if (key == "horizon") cfg.horizon = parse_int(key, value);
    else if (key == "visitation_steps") cfg.visitation_steps = parse_int(key, value);
    else if (key == "critic_steps") cfg.critic_steps = parse_int(key, value);
    else if (key == "trajectories_per_iter") cfg.trajectories_per_iter = parse_int(key, value);
    else if (key == "use_env_reward") cfg.use_env_reward = parse_bool(key, value);
    else if (key == "marginal_smoothing") cfg.marginal_smoothing = parse_double(key, value);
    else if (key == "prefill") cfg.prefill = parse_bool(key, value);
    else
      throw std::invalid_argument("invalid config: unknown key '" + key + "' on line " +
                                  std::to_string(line_no));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_key_values(buf.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path);
  out << to_key_values();
}

}  // namespace visitrl
