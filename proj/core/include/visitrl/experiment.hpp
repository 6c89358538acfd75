#pragma once

#include <string>
#include <vector>

#include "visitrl/agents.hpp"
#include "visitrl/eval.hpp"

namespace visitrl {

struct ExperimentResult {
  std::vector<std::string> seed_csv_paths;
  std::vector<std::string> artifact_paths;
  std::string aggregate_csv_path;
  std::string config_path;
  std::vector<std::vector<MetricRow>> per_seed_metrics;
};

/// Formats metric rows as CSV (fixed column order, decimal-point floats):
/// seed,iteration,return,entropy,visitation_loss,critic_loss,actor_loss.
std::string metrics_csv(const std::vector<MetricRow>& rows);

/// Per-iteration interquartile means over seeds with percentile-bootstrap 95%
/// bands (1000 resamples, deterministic resampling stream):
/// iteration,return_iqm,return_lo,return_hi,entropy_iqm,entropy_lo,entropy_hi.
std::string aggregate_csv(const std::vector<std::vector<MetricRow>>& per_seed);

/// Trains every seed of the config (optionally with several worker threads),
/// writes one CSV and one artifact checkpoint per seed plus the aggregate
/// CSV and a copy of the config into out_dir. Outputs are byte-identical
/// across reruns of the same config.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                int jobs = 0);

}  // namespace visitrl
