#include "visitrl/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace visitrl {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "seed,iteration,return,entropy,visitation_loss,critic_loss,actor_loss\n";
  for (const auto& row : rows) {
    out += std::to_string(row.seed);
    out += ',';
    out += std::to_string(row.iteration);
    out += ',';
    out += format_value(row.return_estimate);
    out += ',';
    out += format_value(row.entropy_estimate);
    out += ',';
    out += format_value(row.visitation_loss);
    out += ',';
    out += format_value(row.critic_loss);
    out += ',';
    out += format_value(row.actor_loss);
    out += '\n';
  }
  return out;
}

std::string aggregate_csv(const std::vector<std::vector<MetricRow>>& per_seed) {
  if (per_seed.empty()) throw std::invalid_argument("aggregate_csv: no seeds");
  const std::size_t iterations = per_seed.front().size();
  for (const auto& rows : per_seed)
    if (rows.size() != iterations)
      throw std::invalid_argument("aggregate_csv: seed logs have different lengths");

  std::string out =
      "iteration,return_iqm,return_lo,return_hi,entropy_iqm,entropy_lo,entropy_hi\n";
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> returns, entropies;
    returns.reserve(per_seed.size());
    entropies.reserve(per_seed.size());
    for (const auto& rows : per_seed) {
      returns.push_back(rows[it].return_estimate);
      entropies.push_back(rows[it].entropy_estimate);
    }
    Rng band_rng(derive_seed(0xA66, it));
    const ConfidenceBand ret = iqm_bootstrap_band(returns, 1000, 0.95, band_rng);
    const ConfidenceBand ent = iqm_bootstrap_band(entropies, 1000, 0.95, band_rng);
    out += std::to_string(per_seed.front()[it].iteration);
    for (double v : {ret.point, ret.lo, ret.hi, ent.point, ent.lo, ent.hi}) {
      out += ',';
      out += format_value(v);
    }
    out += '\n';
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                int jobs) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  const int n_seeds = static_cast<int>(config.seeds.size());
  if (jobs <= 0)
    jobs = std::max(1, std::min<int>(n_seeds,
                                     static_cast<int>(std::thread::hardware_concurrency())));

  // Seeds are independent jobs; results land in their slot so the output
  // order never depends on scheduling.
  std::vector<TrainedArtifacts> runs;
  runs.reserve(static_cast<std::size_t>(n_seeds));
  {
    std::vector<std::unique_ptr<TrainedArtifacts>> slots(static_cast<std::size_t>(n_seeds));
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&, w] {
        for (int i = w; i < n_seeds; i += jobs)
          slots[static_cast<std::size_t>(i)] = std::make_unique<TrainedArtifacts>(
              train_agent(config, config.seeds[static_cast<std::size_t>(i)]));
      });
    for (auto& worker : workers) worker.join();
    for (auto& slot : slots) runs.push_back(std::move(*slot));
  }

  ExperimentResult result;
  const std::filesystem::path dir(out_dir);
  result.config_path = (dir / "config.cfg").string();
  config.save(result.config_path);
  for (const auto& run : runs) {
    const std::string stem = "seed_" + std::to_string(run.seed);
    const std::string csv_path = (dir / (stem + ".csv")).string();
    write_file(csv_path, metrics_csv(run.metrics));
    result.seed_csv_paths.push_back(csv_path);
    const std::string artifact_path = (dir / (stem + ".ckpt")).string();
    save_artifacts(run, artifact_path);
    result.artifact_paths.push_back(artifact_path);
    result.per_seed_metrics.push_back(run.metrics);
  }
  result.aggregate_csv_path = (dir / "aggregate.csv").string();
  write_file(result.aggregate_csv_path, aggregate_csv(result.per_seed_metrics));
  return result;
}

}  // namespace visitrl
