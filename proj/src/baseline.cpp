#include "rssgh/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rssgh/errors.hpp"
#include "rssgh/special.hpp"

namespace rssgh {
namespace {

using special::log1pexp;

constexpr std::string_view kNamesLocScale[] = {"mu", "sigma"};
constexpr std::string_view kNamesGamma[] = {"eta", "nu"};
constexpr std::string_view kNamesThree[] = {"eta", "nu", "kappa"};

bool has_location(Family f) { return f == Family::LogNormal || f == Family::LogLogistic; }

void require_positive_time(double t, const char* what) {
  if (!(t > 0.0) || std::isnan(t)) {
    throw DomainError(std::string(what) + ": time must be positive");
  }
}

void require_nonnegative_time(double t, const char* what) {
  if (!(t >= 0.0)) {
    throw DomainError(std::string(what) + ": time must be non-negative");
  }
}

// Standardized log-time for the location-scale families.
double standardize(const BaselineParams& p, double t) { return (std::log(t) - p[0]) / p[1]; }

// Shape, log x and kappa for the gamma-type families, with x = (t / eta)^kappa.
struct GammaArgs {
  double a;
  double lx;
  double kappa;
};

GammaArgs gamma_args(const BaselineParams& p, double t) {
  const double kappa = p.family() == Family::Gamma ? 1.0 : p[2];
  return {p[1] / kappa, kappa * (std::log(t) - std::log(p[0])), kappa};
}

double pgw_log1p_w(const BaselineParams& p, double t) {
  return log1pexp(p[1] * (std::log(t) - std::log(p[0])));
}

}  // namespace

std::string_view family_code(Family f) {
  switch (f) {
    case Family::LogNormal: return "LN";
    case Family::LogLogistic: return "LL";
    case Family::PowerGeneralizedWeibull: return "PGW";
    case Family::Gamma: return "GAM";
    case Family::GeneralizedGamma: return "GG";
  }
  return "?";
}

Family family_from_code(std::string_view code) {
  if (code == "LN") return Family::LogNormal;
  if (code == "LL") return Family::LogLogistic;
  if (code == "PGW") return Family::PowerGeneralizedWeibull;
  if (code == "GAM") return Family::Gamma;
  if (code == "GG") return Family::GeneralizedGamma;
  throw DomainError("unknown baseline family '" + std::string(code) + "'");
}

std::size_t family_arity(Family f) {
  return (f == Family::PowerGeneralizedWeibull || f == Family::GeneralizedGamma) ? 3 : 2;
}

std::span<const std::string_view> family_parameter_names(Family f) {
  if (has_location(f)) return kNamesLocScale;
  if (f == Family::Gamma) return kNamesGamma;
  return kNamesThree;
}

BaselineParams::BaselineParams(Family family, std::span<const double> values) : family_(family) {
  if (values.size() != family_arity(family)) {
    throw DimensionError("baseline " + std::string(family_code(family)) + " expects " +
                         std::to_string(family_arity(family)) + " parameters, got " +
                         std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DomainError("baseline parameters must be finite");
    }
    const bool positive_required = !(has_location(family) && i == 0);
    if (positive_required && !(values[i] > 0.0)) {
      throw DomainError("baseline parameter '" + std::string(family_parameter_names(family)[i]) +
                        "' must be positive");
    }
    values_[i] = values[i];
  }
}

BaselineParams BaselineParams::log_normal(double mu, double sigma) {
  const double v[] = {mu, sigma};
  return {Family::LogNormal, v};
}
BaselineParams BaselineParams::log_logistic(double mu, double sigma) {
  const double v[] = {mu, sigma};
  return {Family::LogLogistic, v};
}
BaselineParams BaselineParams::power_generalized_weibull(double eta, double nu, double kappa) {
  const double v[] = {eta, nu, kappa};
  return {Family::PowerGeneralizedWeibull, v};
}
BaselineParams BaselineParams::gamma(double eta, double nu) {
  const double v[] = {eta, nu};
  return {Family::Gamma, v};
}
BaselineParams BaselineParams::generalized_gamma(double eta, double nu, double kappa) {
  const double v[] = {eta, nu, kappa};
  return {Family::GeneralizedGamma, v};
}

BaselineParams BaselineParams::from_unconstrained(Family family, std::span<const double> coords) {
  const std::size_t k = family_arity(family);
  if (coords.size() != k) throw DimensionError("baseline: wrong unconstrained length");
  std::array<double, 3> v{};
  for (std::size_t i = 0; i < k; ++i) {
    v[i] = (has_location(family) && i == 0) ? coords[i] : std::exp(coords[i]);
  }
  return {family, std::span<const double>(v.data(), k)};
}

void BaselineParams::to_unconstrained(std::span<double> out) const {
  for (std::size_t i = 0; i < size(); ++i) {
    out[i] = (has_location(family_) && i == 0) ? values_[i] : std::log(values_[i]);
  }
}

double BaselineParams::log_jacobian() const {
  double lj = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(has_location(family_) && i == 0)) lj += std::log(values_[i]);
  }
  return lj;
}

double log_survival(const BaselineParams& p, double t) {
  require_nonnegative_time(t, "log_survival");
  if (t == 0.0) return 0.0;
  switch (p.family()) {
    case Family::LogNormal: return special::log_normal_sf(standardize(p, t));
    case Family::LogLogistic: return -log1pexp(standardize(p, t));
    case Family::PowerGeneralizedWeibull: return -std::expm1(pgw_log1p_w(p, t) / p[2]);
    case Family::Gamma:
    case Family::GeneralizedGamma: {
      const GammaArgs g = gamma_args(p, t);
      return special::log_incomplete_gamma(g.a, std::exp(g.lx)).log_q;
    }
  }
  return 0.0;
}

double cum_hazard(const BaselineParams& p, double t) {
  require_nonnegative_time(t, "cum_hazard");
  // -0.0 would leak through for t = 0
  return t == 0.0 ? 0.0 : -log_survival(p, t);
}

double survival(const BaselineParams& p, double t) { return std::exp(log_survival(p, t)); }

double cdf(const BaselineParams& p, double t) { return -std::expm1(log_survival(p, t)); }

double log_density(const BaselineParams& p, double t) {
  require_positive_time(t, "log_density");
  const double lt = std::log(t);
  switch (p.family()) {
    case Family::LogNormal:
      return special::log_normal_pdf(standardize(p, t)) - lt - std::log(p[1]);
    case Family::LogLogistic: {
      const double z = standardize(p, t);
      return -z - 2.0 * log1pexp(-z) - lt - std::log(p[1]);
    }
    case Family::PowerGeneralizedWeibull:
      return log_hazard(p, t) + log_survival(p, t);
    case Family::Gamma:
    case Family::GeneralizedGamma: {
      const GammaArgs g = gamma_args(p, t);
      return std::log(g.kappa) - std::lgamma(g.a) - lt + g.a * g.lx - std::exp(g.lx);
    }
  }
  return 0.0;
}

double log_hazard(const BaselineParams& p, double t) {
  require_positive_time(t, "log_hazard");
  switch (p.family()) {
    case Family::LogNormal:
    case Family::GeneralizedGamma:
    case Family::Gamma:
      return log_density(p, t) - log_survival(p, t);
    case Family::LogLogistic:
      return -log1pexp(-standardize(p, t)) - std::log(t) - std::log(p[1]);
    case Family::PowerGeneralizedWeibull: {
      const double lw = p[1] * (std::log(t) - std::log(p[0]));
      return std::log(p[1]) - std::log(p[2]) - std::log(t) + lw + (1.0 / p[2] - 1.0) * log1pexp(lw);
    }
  }
  return 0.0;
}

double hazard(const BaselineParams& p, double t) { return std::exp(log_hazard(p, t)); }
double density(const BaselineParams& p, double t) { return std::exp(log_density(p, t)); }

double quantile(const BaselineParams& p, double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw DomainError("quantile: probability must lie in (0, 1)");
  }
  switch (p.family()) {
    case Family::LogNormal:
      return std::exp(p[0] + p[1] * special::normal_quantile(prob));
    case Family::LogLogistic:
      return std::exp(p[0] + p[1] * (std::log(prob) - std::log1p(-prob)));
    case Family::PowerGeneralizedWeibull: {
      // (1 + w)^{1/kappa} = 1 - log(1 - prob)
      const double lw = std::log(std::expm1(p[2] * std::log1p(-std::log1p(-prob))));
      return p[0] * std::exp(lw / p[1]);
    }
    case Family::Gamma:
    case Family::GeneralizedGamma: {
      const double kappa = p.family() == Family::Gamma ? 1.0 : p[2];
      const double x = special::gamma_p_inverse(p[1] / kappa, prob);
      return p[0] * std::pow(x, 1.0 / kappa);
    }
  }
  return 0.0;
}

double survival_quantile(const BaselineParams& p, double log_s) {
  if (!(log_s < 0.0)) throw DomainError("survival_quantile: log survival must be negative");
  const double prob = std::min(-std::expm1(log_s), std::nextafter(1.0, 0.0));
  double lt = std::log(quantile(p, prob));
  for (int it = 0; it < 50 && std::isfinite(lt); ++it) {
    const auto terms = hazard_terms(p, std::exp(lt));
    const double g = -terms.cum_h - log_s;
    if (std::abs(g) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(log_s)) break;
    if (!(terms.dcum_h_dlog_t > 0.0)) break;
    lt += g / terms.dcum_h_dlog_t;
  }
  return std::exp(lt);
}

HazardTerms hazard_terms(const BaselineParams& p, double t) {
  require_positive_time(t, "hazard_terms");
  HazardTerms out;
  const double lt = std::log(t);
  switch (p.family()) {
    case Family::LogNormal: {
      const double s = p[1];
      const double z = (lt - p[0]) / s;
      const double log_q = special::log_normal_sf(z);
      const double m = std::exp(special::log_normal_pdf(z) - log_q);
      const double dlogh_dz = m - z;
      out.cum_h = -log_q;
      out.log_h = special::log_normal_pdf(z) - lt - std::log(s) - log_q;
      out.dlog_h_dlog_t = -1.0 + dlogh_dz / s;
      out.dcum_h_dlog_t = m / s;
      out.dlog_h_dtheta[0] = -dlogh_dz / s;
      out.dcum_h_dtheta[0] = -m / s;
      out.dlog_h_dtheta[1] = -1.0 - dlogh_dz * z;
      out.dcum_h_dtheta[1] = -m * z;
      break;
    }
    case Family::LogLogistic: {
      const double s = p[1];
      const double z = (lt - p[0]) / s;
      const double g_pos = std::exp(-log1pexp(-z));  // G(z)
      const double g_neg = std::exp(-log1pexp(z));   // G(-z)
      out.cum_h = log1pexp(z);
      out.log_h = -log1pexp(-z) - lt - std::log(s);
      out.dlog_h_dlog_t = -1.0 + g_neg / s;
      out.dcum_h_dlog_t = g_pos / s;
      out.dlog_h_dtheta[0] = -g_neg / s;
      out.dcum_h_dtheta[0] = -g_pos / s;
      out.dlog_h_dtheta[1] = -1.0 - g_neg * z;
      out.dcum_h_dtheta[1] = -g_pos * z;
      break;
    }
    case Family::PowerGeneralizedWeibull: {
      const double nu = p[1];
      const double kappa = p[2];
      const double lw = nu * (lt - std::log(p[0]));
      const double l1w = log1pexp(lw);
      const double r = std::exp(lw - l1w);  // w / (1 + w)
      const double pow_term = std::exp(l1w / kappa);
      const double dlogh_dlw = 1.0 + (1.0 / kappa - 1.0) * r;
      const double dcum_dlw = pow_term * r / kappa;
      out.cum_h = std::expm1(l1w / kappa);
      out.log_h = std::log(nu) - std::log(kappa) - lt + lw + (1.0 / kappa - 1.0) * l1w;
      out.dlog_h_dlog_t = -1.0 + nu * dlogh_dlw;
      out.dcum_h_dlog_t = nu * dcum_dlw;
      out.dlog_h_dtheta[0] = -nu * dlogh_dlw;
      out.dcum_h_dtheta[0] = -nu * dcum_dlw;
      out.dlog_h_dtheta[1] = 1.0 + lw * dlogh_dlw;
      out.dcum_h_dtheta[1] = lw * dcum_dlw;
      out.dlog_h_dtheta[2] = -1.0 - l1w / kappa;
      out.dcum_h_dtheta[2] = -pow_term * l1w / kappa;
      break;
    }
    case Family::Gamma:
    case Family::GeneralizedGamma: {
      const GammaArgs g = gamma_args(p, t);
      const double x = std::exp(g.lx);
      const auto q = special::log_gamma_q_with_shape_grad(g.a, x);
      const double lg = std::lgamma(g.a);
      // x f(x) / Q(a, x) for the standard gamma density f
      const double xh = std::exp(g.a * g.lx - x - lg - q.log_q);
      const double dlogh_dlx = g.a - x + xh;
      const double dlogh_da = -special::digamma(g.a) + g.lx - q.dlog_q_da;
      const double dcum_da = -q.dlog_q_da;
      out.cum_h = -q.log_q;
      out.log_h = std::log(g.kappa) - lg - lt + g.a * g.lx - x - q.log_q;
      out.dlog_h_dlog_t = -1.0 + g.kappa * dlogh_dlx;
      out.dcum_h_dlog_t = g.kappa * xh;
      out.dlog_h_dtheta[0] = -g.kappa * dlogh_dlx;
      out.dcum_h_dtheta[0] = -g.kappa * xh;
      out.dlog_h_dtheta[1] = g.a * dlogh_da;
      out.dcum_h_dtheta[1] = g.a * dcum_da;
      if (p.family() == Family::GeneralizedGamma) {
        out.dlog_h_dtheta[2] = 1.0 + g.lx * dlogh_dlx - g.a * dlogh_da;
        out.dcum_h_dtheta[2] = g.lx * xh - g.a * dcum_da;
      }
      break;
    }
  }
  return out;
}

}  // namespace rssgh
