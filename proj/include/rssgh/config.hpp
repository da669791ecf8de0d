#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rssgh/io.hpp"
#include "rssgh/model.hpp"
#include "rssgh/sampler.hpp"
#include "rssgh/simulator.hpp"

namespace rssgh {

struct DataPaths {
  fs::path patients, lifetable, adjacency;
  std::size_t regions = 0;  ///< 0: from the adjacency file
  std::vector<std::string> stratum_keys = {"sex", "deprivation", "region"};
};

/// Simulation block. Effects are "none", "icar" (drawn with precision tau)
/// or "fixed" (given vectors).
struct SimulateBlock {
  std::size_t n = 2000;
  double horizon = 4.0;
  double dropout_rate = 0.01;
  std::string effects = "icar";
  double tau = 10.0;
  std::vector<double> time_effect, hazard_effect;
  std::vector<double> theta, alpha, beta;  ///< empty: reference truth
  CovariateScheme covariates;
  int life_table_year_min = 2000;
  int life_table_year_max = 2030;
};

struct RunConfig {
  std::uint64_t seed = 1;
  ModelSpec spec;
  std::vector<std::string> covariates;
  std::vector<std::string> time_covariates;
  std::vector<SplineSpec> splines;
  HyperConfig hyper;
  SamplerConfig sampler;
  DataPaths data;
  std::optional<SimulateBlock> simulate;
  fs::path output;  ///< default output directory

  PatientSchema schema() const { return {covariates, splines, data.stratum_keys}; }
  /// Throws ConfigError when a file needed for fitting is missing.
  void require_fit_inputs() const;
};

/// Parse a YAML run configuration; relative paths resolve against the file's directory.
RunConfig load_config(const fs::path& path);
RunConfig parse_config(const std::string& yaml, const fs::path& base_dir);
/// YAML with absolute paths and every default spelled out.
std::string dump_config(const RunConfig& config);

}  // namespace rssgh
