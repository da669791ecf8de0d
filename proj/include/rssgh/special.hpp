#pragma once

// Special functions used by the baseline hazard families. Everything is
// computed in log space where the linear value can under- or overflow.

namespace rssgh::special {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kPi = 3.14159265358979323846;

/// log phi(z), standard normal density.
double log_normal_pdf(double z);

/// log(1 - Phi(z)); accurate in both tails.
double log_normal_sf(double z);

/// log Phi(z).
inline double log_normal_cdf(double z) { return log_normal_sf(-z); }

/// Inverse Mills ratio phi(z) / (1 - Phi(z)).
double inverse_mills(double z);

/// Phi^{-1}(p) for p in (0, 1). Rational approximation polished by one
/// Halley step; relative error near machine precision.
double normal_quantile(double p);

/// log(1 - exp(x)) for x < 0.
double log1mexp(double x);

/// log(1 + exp(x)).
double log1pexp(double x);

double digamma(double x);

/// Regularized incomplete gamma functions in log space.
struct LogIncGamma {
  double log_p;  ///< log P(a, x), the regularized lower function
  double log_q;  ///< log Q(a, x) = log(1 - P(a, x))
};

/// Series for x < a + 1, continued fraction otherwise.
LogIncGamma log_incomplete_gamma(double a, double x);

/// log Q(a, x) together with its derivative with respect to the shape `a`.
struct LogIncGammaShapeGrad {
  double log_q;
  double dlog_q_da;
};

/// The shape derivative is carried through the same series / continued
/// fraction by forward-mode differentiation.
LogIncGammaShapeGrad log_gamma_q_with_shape_grad(double a, double x);

/// Smallest x with P(a, x) >= p, solved by safeguarded Newton on log x.
double gamma_p_inverse(double a, double p);

}  // namespace rssgh::special
