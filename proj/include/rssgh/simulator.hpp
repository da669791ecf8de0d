#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "rssgh/data.hpp"
#include "rssgh/graph.hpp"
#include "rssgh/lifetable.hpp"
#include "rssgh/model.hpp"

namespace rssgh {

/// Synthetic covariates: sex split evenly, deprivation 1-5, region by
/// weights, age truncated normal. Columns of x are
/// age_std, dep2, dep3, dep4, dep5, sex.
struct CovariateScheme {
  double age_mean = 70.0;
  double age_sd = 10.0;
  double age_min = 15.0;
  double age_max = 99.0;
  std::vector<double> region_weights;       ///< empty: uniform over regions
  std::vector<double> deprivation_weights;  ///< empty: uniform over 1-5
  double year_min = 2010.0;                 ///< diagnosis date uniform on [year_min, year_max)
  double year_max = 2015.0;

  static std::vector<std::string> columns();
};

struct SimConfig {
  std::size_t n = 2000;
  ModelSpec spec;
  ParamState truth;
  std::shared_ptr<const LifeTable> table;  ///< null: no population deaths
  std::size_t regions = 9;
  double horizon = 4.0;        ///< administrative censoring (years)
  double dropout_rate = 0.01;  ///< exponential dropout (per year)
  std::uint64_t seed = 1;
  CovariateScheme covariates;

  void validate() const;
};

/// Latent draws behind one simulated record.
struct LatentRecord {
  double z = 0.0;  ///< uniform used for the excess time
  double population_time = 0.0;
  double excess_time = 0.0;
  double admin_censor = 0.0;
  double dropout_censor = 0.0;
};

struct SimResult {
  Dataset data;
  ParamState truth;
  std::vector<LatentRecord> latent;

  double censoring_fraction() const;
};

/// Sequential inversion through the piecewise-constant cells along the Lexis
/// diagonal. Returns +inf when the cumulative rate never reaches the draw.
double simulate_population_time(const LifeTable& table, const PatientRecord& rec, std::mt19937_64& rng);

/// Excess time with S_N(t) = 1 - z; +inf when the quantile overflows.
double excess_time_from_uniform(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double z);
double simulate_excess_time(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec,
                            std::mt19937_64& rng);

/// Draw from the sum-to-zero ICAR with precision tau.
std::vector<double> sample_icar(const RegionGraph& graph, double tau, std::mt19937_64& rng);

SimResult simulate_dataset(const SimConfig& config);

/// Gompertz-type mortality by sex, deprivation and region (1-based labels),
/// ages 0-110, calendar years [year_min, year_max].
LifeTable synthetic_life_table(std::size_t regions, int year_min = 2000, int year_max = 2030);

/// Reference truth: LN(0.65, 1.15) or PGW(0.5, 3.75, 8) baseline,
/// alpha = 1 on age, beta = (1, -1, -1, -1, -1, 2).
ParamState reference_truth(Family family, std::vector<double> time_effect, std::vector<double> hazard_effect);

}  // namespace rssgh
