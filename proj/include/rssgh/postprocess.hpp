#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rssgh/data.hpp"
#include "rssgh/excess.hpp"
#include "rssgh/model.hpp"

namespace rssgh {

struct NetSurvivalCurve {
  std::vector<double> times;
  Eigen::MatrixXd draws;  ///< draws x times
  std::vector<double> mean, lower, upper;
  double level = 0.95;
};

/// Posterior mean and equal-tailed interval per time point.
NetSurvivalCurve summarize_curve(std::vector<double> times, Eigen::MatrixXd draws, double level = 0.95);

/// `steps` equal steps on [0, max observed time].
std::vector<double> default_time_grid(const Dataset& data, std::size_t steps = 200);

/// Natural-scale states from unconstrained draw rows.
std::vector<ParamState> states_from_draws(const ParamLayout& layout, const Eigen::MatrixXd& unconstrained);

NetSurvivalCurve net_survival_individual(const std::vector<ParamState>& states, const ModelSpec& spec,
                                         const PatientRecord& rec, const std::vector<double>& times,
                                         double level = 0.95);
/// Per draw, the average of individual curves over the records of one region (0-based).
NetSurvivalCurve net_survival_region(const std::vector<ParamState>& states, const ModelSpec& spec,
                                     const Dataset& data, std::size_t region, const std::vector<double>& times,
                                     double level = 0.95);
/// Per draw, the average over all records.
NetSurvivalCurve net_survival_marginal(const std::vector<ParamState>& states, const ModelSpec& spec,
                                       std::span<const PatientRecord> records, const std::vector<double>& times,
                                       double level = 0.95);

/// Per-draw average of net survival over `records` on `times`.
Eigen::MatrixXd average_net_survival(const std::vector<ParamState>& states, const ModelSpec& spec,
                                     std::span<const PatientRecord* const> records, const std::vector<double>& times);

/// P(effect_k > c) per region from constrained draws. `selector` is "u"
/// (hazard level) or "ut" (time level); columns are named selector[k].
std::vector<double> exceedance_probability(const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
                                           const std::string& selector, double c);

/// Composite trapezoid of |f - g| over [t1, t2] on a shared grid; the
/// curves are linearly interpolated at interval ends inside the grid.
double error_integral(const std::vector<double>& times, const std::vector<double>& f, const std::vector<double>& g,
                      double t1, double t2);

/// draws x records log-likelihood contributions.
Eigen::MatrixXd pointwise_loglik(const Posterior& posterior, const std::vector<ParamState>& states);

struct ParetoFit {
  double k = 0.0;
  double sigma = 0.0;
};

/// Zhang-Stephens generalized Pareto fit to positive exceedances (sorted
/// ascending), with the weakly informative shrinkage of k toward 0.5.
ParetoFit fit_generalized_pareto(std::span<const double> exceedances);

struct PsisResult {
  std::vector<double> log_weights;  ///< normalized
  double khat = 0.0;                ///< -inf when the tail is flat
};

/// Pareto-smoothed importance weights from log ratios of one observation.
PsisResult psis(std::span<const double> log_ratios);

struct LooResult {
  double elpd = 0.0;
  double se = 0.0;
  std::vector<double> pointwise;  ///< per observation elpd
  std::vector<double> khat;

  std::size_t count_khat_above(double threshold) const;
};

/// PSIS-LOO from a draws x observations log-likelihood matrix (>= 100 draws).
LooResult psis_loo(const Eigen::MatrixXd& loglik);

struct ComparisonRow {
  std::string name;
  double elpd = 0.0;
  double se = 0.0;
  double elpd_diff = 0.0;  ///< relative to the best model (<= 0)
  double se_diff = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;  ///< best first
};

ComparisonReport compare_models(const std::vector<std::string>& names, const std::vector<LooResult>& results);

/// Type-7 sample quantile.
double sample_quantile(std::vector<double> v, double prob);

}  // namespace rssgh
