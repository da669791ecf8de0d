#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace rssgh {

/// Parametric baseline families for the excess hazard. Weibull is not
/// offered: with it the general hazard structure is not identifiable.
enum class Family { LogNormal, LogLogistic, PowerGeneralizedWeibull, Gamma, GeneralizedGamma };

/// Short code used in files and on the command line ("LN", "LL", "PGW", "GAM", "GG").
std::string_view family_code(Family f);
Family family_from_code(std::string_view code);

/// Number of distribution parameters (2 or 3).
std::size_t family_arity(Family f);

/// Natural-scale parameter names, in storage order.
std::span<const std::string_view> family_parameter_names(Family f);

/// Validated baseline parameter vector.
///
/// Storage order: LN/LL (mu, sigma); GAM (eta, nu); PGW/GG (eta, nu, kappa).
/// The log-normal uses the standard (log t - mu) / sigma standardization in
/// every function.
class BaselineParams {
 public:
  BaselineParams(Family family, std::span<const double> values);

  static BaselineParams log_normal(double mu, double sigma);
  static BaselineParams log_logistic(double mu, double sigma);
  static BaselineParams power_generalized_weibull(double eta, double nu, double kappa);
  static BaselineParams gamma(double eta, double nu);
  static BaselineParams generalized_gamma(double eta, double nu, double kappa);

  /// Build from unconstrained coordinates: mu identity, every positive
  /// parameter through log.
  static BaselineParams from_unconstrained(Family family, std::span<const double> coords);

  Family family() const noexcept { return family_; }
  std::size_t size() const noexcept { return family_arity(family_); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return {values_.data(), size()}; }

  /// Unconstrained image of the parameters, written to `out[0..size())`.
  void to_unconstrained(std::span<double> out) const;

  /// log |d(natural) / d(unconstrained)| summed over parameters.
  double log_jacobian() const;

 private:
  Family family_;
  std::array<double, 3> values_{};
};

double log_density(const BaselineParams& p, double t);
double log_hazard(const BaselineParams& p, double t);
double cum_hazard(const BaselineParams& p, double t);
double log_survival(const BaselineParams& p, double t);
double survival(const BaselineParams& p, double t);
double cdf(const BaselineParams& p, double t);
double hazard(const BaselineParams& p, double t);
double density(const BaselineParams& p, double t);

/// F^{-1}(prob) for prob in (0, 1).
double quantile(const BaselineParams& p, double prob);

/// t with log S(t) = log_s for log_s < 0, accurate deep in the upper tail.
double survival_quantile(const BaselineParams& p, double log_s);

/// Hazard quantities at one time point together with their first
/// derivatives. Derivatives with respect to theta are taken along the
/// unconstrained coordinates (mu, log sigma, log eta, ...).
struct HazardTerms {
  double log_h = 0.0;
  double cum_h = 0.0;
  double dlog_h_dlog_t = 0.0;
  double dcum_h_dlog_t = 0.0;  ///< equals t * h(t)
  std::array<double, 3> dlog_h_dtheta{};
  std::array<double, 3> dcum_h_dtheta{};
};

/// Requires t > 0.
HazardTerms hazard_terms(const BaselineParams& p, double t);

}  // namespace rssgh
