#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rssgh/config.hpp"
#include "rssgh/excess.hpp"
#include "rssgh/postprocess.hpp"
#include "rssgh/sampler.hpp"
#include "rssgh/simulator.hpp"

namespace rssgh {

/// Data, population table and region graph named by a run configuration.
struct Inputs {
  Dataset data;
  std::shared_ptr<const LifeTable> table;    ///< null in overall-survival mode
  std::shared_ptr<const RegionGraph> graph;  ///< null when no adjacency is given
  std::size_t regions = 1;
};

Inputs load_inputs(const RunConfig& config);

struct Simulation {
  SimResult result;
  std::shared_ptr<const LifeTable> table;
  std::shared_ptr<const RegionGraph> graph;
  SimConfig sim;
};

/// Truth and simulation settings for the `simulate` block of a config.
SimConfig simulation_config(const RunConfig& config, std::shared_ptr<const LifeTable> table,
                            const RegionGraph& graph);
Simulation run_simulation(const RunConfig& config);
/// patients.csv, lifetable.csv, adjacency.adj, truth.json and config.yaml
/// pointing at those files.
void write_simulation(const Simulation& sim, const RunConfig& config, const fs::path& out);

struct FitResult {
  std::shared_ptr<const Posterior> posterior;
  SampleResult samples;
  std::optional<LooResult> loo;  ///< absent with fewer than 100 kept draws
};

std::shared_ptr<const Posterior> build_posterior(const RunConfig& config, const Inputs& inputs);
FitResult fit_model(const RunConfig& config, const Inputs& inputs);
/// draws_chain<k>.csv, summary.csv, diagnostics.json, loo.json, config.yaml.
void write_fit(const FitResult& fit, const RunConfig& config, const fs::path& out);

/// A finished run directory read back from disk.
struct LoadedRun {
  RunConfig config;
  Inputs inputs;
  std::shared_ptr<const Posterior> posterior;
  std::vector<std::string> names;
  std::vector<ChainDraws> chains;  ///< with unconstrained draws rebuilt

  Eigen::MatrixXd pooled() const;
  Eigen::MatrixXd pooled_unconstrained() const;
  /// Every `thin`-th pooled draw as natural-scale states.
  std::vector<ParamState> states(std::size_t thin = 1) const;
};

LoadedRun load_run(const fs::path& dir);
LooResult load_loo(const fs::path& dir);

std::string loo_json(const LooResult& loo);
std::string truth_json(const SimResult& sim, const ModelSpec& spec);
std::string diagnostics_json(const SampleResult& samples);

}  // namespace rssgh
