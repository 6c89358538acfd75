#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "visitrl/agents.hpp"
#include "visitrl/experiment.hpp"
#include "visitrl/gridworld.hpp"
#include "visitrl/verify.hpp"

namespace {

int print_checks(const std::vector<visitrl::CheckResult>& results) {
  bool all_passed = true;
  for (const auto& result : results) {
    std::printf("%s  %-24s %s\n", result.passed ? "PASS" : "FAIL", result.name.c_str(),
                result.detail.c_str());
    all_passed &= result.passed;
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-entropy RL with learned future-visitation models"};
  app.require_subcommand(1);

  std::string config_path, env_id, agent, out_dir = "runs", ckpt_path;
  std::int64_t seed = -1;
  int jobs = 0, rollouts = 200;

  CLI::App* train = app.add_subcommand("train", "Run a training experiment, writing CSV curves");
  train->add_option("--config", config_path, "Config file (key = value lines)");
  train->add_option("--env", env_id, "Environment id (e.g. Empty-6x6, SimpleCrossingS9N1)");
  train->add_option("--agent", agent, "Agent: opac-cv, opac-mv or sac");
  train->add_option("--seed", seed, "Single seed override");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--jobs", jobs, "Parallel seed jobs (default: hardware)");

  CLI::App* oracle = app.add_subcommand(
      "oracle", "Exact tabular verification: contraction, fixed point, value identities");
  std::uint64_t oracle_seed = 0;
  oracle->add_option("--seed", oracle_seed, "Random instance seed");

  CLI::App* verify = app.add_subcommand("verify", "Full property suite (oracle checks, "
                                                  "sampler fit, unbiasedness, gradients)");
  std::uint64_t verify_seed = 0;
  verify->add_option("--seed", verify_seed, "Random instance seed");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint: return and entropy");
  eval->add_option("--ckpt", ckpt_path, "Checkpoint written by train")->required();
  eval->add_option("--rollouts", rollouts, "Monte-Carlo rollouts");
  eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("--env", env_id, "Environment id override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      visitrl::ExperimentConfig config;
      if (!config_path.empty()) config = visitrl::ExperimentConfig::load(config_path);
      if (!env_id.empty()) config.env = env_id;
      if (!agent.empty()) config.agent = agent;
      if (seed >= 0) config.seeds = {static_cast<std::uint64_t>(seed)};
      config.validate();
      const visitrl::ExperimentResult result =
          visitrl::run_experiment(config, out_dir, jobs);
      for (const auto& path : result.seed_csv_paths) std::printf("wrote %s\n", path.c_str());
      for (const auto& path : result.artifact_paths) std::printf("wrote %s\n", path.c_str());
      std::printf("wrote %s\n", result.aggregate_csv_path.c_str());
      return 0;
    }
    if (oracle->parsed()) {
      visitrl::Rng rng(oracle_seed);
      return print_checks(visitrl::run_oracle_suite(rng));
    }
    if (verify->parsed()) {
      visitrl::Rng rng(verify_seed);
      return print_checks(visitrl::run_verification_suite(rng));
    }
    if (eval->parsed()) {
      visitrl::TrainedArtifacts artifacts = visitrl::load_artifacts(ckpt_path);
      if (!env_id.empty()) artifacts.config.env = env_id;
      const auto env = visitrl::build_env(artifacts.config);
      const auto channel = visitrl::metric_channel(*env);
      visitrl::Rng rng(seed >= 0 ? static_cast<std::uint64_t>(seed) : 0);
      const visitrl::PolicyFn policy = artifacts.actor.policy_fn(*env);
      const double ret = visitrl::mc_expected_return(
          *env, policy, rollouts, artifacts.config.max_steps, artifacts.config.gamma, rng);
      const double entropy = visitrl::mc_discounted_feature_entropy(
          *env, policy, *channel, rollouts, artifacts.config.max_steps,
          artifacts.config.gamma, rng);
      std::printf("env                %s\n", artifacts.config.env.c_str());
      std::printf("agent              %s\n", artifacts.config.agent.c_str());
      std::printf("seed               %llu\n",
                  static_cast<unsigned long long>(artifacts.seed));
      std::printf("expected return    %.6f\n", ret);
      std::printf("feature entropy    %.6f nats (max %.6f)\n", entropy,
                  std::log(static_cast<double>(channel->feature_count())));
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
