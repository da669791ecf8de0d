#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rssgh/data.hpp"
#include "rssgh/graph.hpp"
#include "rssgh/lifetable.hpp"
#include "rssgh/model.hpp"

namespace rssgh {

/// Time-level and hazard-level linear predictors of one record:
/// time = x~'alpha + u~_i, hazard = s'gamma + x'beta + u_i.
struct LinearPredictors {
  double time = 0.0;
  double hazard = 0.0;
};

LinearPredictors linear_predictors(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec);

/// log h_E(t) = log h_0(t exp(lp_t)) + lp_h. Requires t > 0.
double log_excess_hazard(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t);
double excess_hazard(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t);

/// H_0(t exp(lp_t)) exp(lp_h - lp_t). Requires t >= 0.
double cum_excess_hazard(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t);

/// Net survival exp(-H_E(t)).
double net_survival(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t);

/// h_P at attained age age + t in calendar year year + t.
double population_hazard(const LifeTable& table, const PatientRecord& rec, double t);
double population_cum_hazard(const LifeTable& table, const PatientRecord& rec, double t);

/// One record's log-likelihood contribution: delta log(h_P + h_E) - H_E.
double record_log_likelihood(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec,
                             double pop_hazard);

/// Sum of record contributions; `table` may be null only in overall-survival mode.
double log_likelihood(const ParamState& state, const ModelSpec& spec, const Dataset& data, const LifeTable* table);

/// Censoring-adjusted g = (n - 0.5 (n - n_obs)) / q.
double spline_g_factor(std::size_t n, std::size_t n_obs, std::size_t q);

/// Log-posterior on the unconstrained scale with its analytic gradient.
/// Data, table and graph are copied into a compiled form; the object is
/// immutable afterwards and safe to share across threads.
class Posterior {
 public:
  Posterior(const ModelSpec& spec, const Dataset& data, const LifeTable* table, const RegionGraph* graph,
            HyperConfig hyper = {});

  const ParamLayout& layout() const noexcept { return layout_; }
  const ModelSpec& spec() const noexcept { return layout_.spec(); }
  const HyperConfig& hyper() const noexcept { return hyper_; }
  std::size_t dim() const noexcept { return layout_.dim(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(time_.size()); }
  const RegionGraph* graph() const noexcept { return graph_.get(); }
  double bym2_scaling() const noexcept { return scaling_; }
  double g_factor() const noexcept { return g_; }
  /// log h_P at each record's exit time (-inf when zero).
  const Eigen::VectorXd& log_pop_hazard() const noexcept { return log_hp_; }

  double log_density(std::span<const double> z) const;
  /// Writes the gradient (size dim()) and returns the log-density.
  double log_density_gradient(std::span<const double> z, std::span<double> grad) const;

  double log_likelihood(const ParamState& state) const;
  double log_prior(std::span<const double> z) const;
  /// Adds the prior gradient into grad.
  double log_prior_gradient(std::span<const double> z, std::span<double> grad) const;

  /// Per-record log-likelihood contributions at one state.
  void pointwise(const ParamState& state, std::span<double> out) const;

 private:
  struct ExpandedGrad;
  double likelihood_pass(const ParamState& s, ExpandedGrad* g, std::span<double> pointwise) const;
  void fold(const ParamState& s, const ExpandedGrad& g, std::span<double> grad) const;

  ParamLayout layout_;
  HyperConfig hyper_;
  std::shared_ptr<const RegionGraph> graph_;
  double scaling_ = 1.0;
  double g_ = 0.0;
  Eigen::MatrixXd x_, xt_, s_;
  Eigen::VectorXd time_, log_hp_;
  std::vector<int> status_;
  std::vector<std::size_t> region_;
  std::vector<Eigen::MatrixXd> gram_;  ///< S_b'S_b per spline block
  std::vector<double> gram_logdet_;
};

}  // namespace rssgh
