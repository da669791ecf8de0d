#include "rssgh/special.hpp"

#include <cmath>
#include <limits>

#include "rssgh/errors.hpp"

namespace rssgh::special {
namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// value + derivative with respect to the incomplete-gamma shape
struct Dual {
  double v = 0.0;
  double d = 0.0;
};

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator/(Dual a, Dual b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}
Dual operator+(Dual a, double b) { return {a.v + b, a.d}; }
Dual operator*(Dual a, double b) { return {a.v * b, a.d * b}; }
Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
double log(double a) { return std::log(a); }

double value(double x) { return x; }
double value(Dual x) { return x.v; }
bool converged(double del, double sum) { return std::abs(del) <= std::abs(sum) * kEps; }
bool converged(Dual del, Dual sum) {
  return std::abs(del.v) <= std::abs(sum.v) * kEps &&
         std::abs(del.d) <= (std::abs(sum.d) + std::abs(sum.v)) * kEps;
}

Dual lgamma_dual(Dual a) { return {std::lgamma(a.v), digamma(a.v) * a.d}; }
double lgamma_dual(double a) { return std::lgamma(a); }

// log of x^a e^{-x} / Gamma(a)
template <class T>
T log_prefactor(T a, double x) {
  return a * std::log(x) + (-x) - lgamma_dual(a);
}

// log P(a, x) by the power series; valid for x < a + 1.
template <class T>
T log_p_series(T a, double x) {
  T ap = a;
  T del = T{1.0} / a;
  T sum = del;
  for (int n = 0; n < kMaxIter; ++n) {
    ap = ap + 1.0;
    del = del * (T{x} / ap);
    sum = sum + del;
    if (converged(del, sum)) {
      return log(sum) + log_prefactor(a, x);
    }
  }
  throw NumericalError("incomplete gamma series did not converge");
}

// log Q(a, x) by the Legendre continued fraction (modified Lentz); x >= a + 1.
template <class T>
T log_q_fraction(T a, double x) {
  T b = T{x + 1.0} - a;
  T c = T{1.0 / kTiny};
  T d = T{1.0} / b;
  T h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const T an = T{-static_cast<double>(i)} * (T{static_cast<double>(i)} - a);
    b = b + 2.0;
    d = an * d + b;
    if (std::abs(value(d)) < kTiny) d = T{kTiny};
    c = b + an / c;
    if (std::abs(value(c)) < kTiny) c = T{kTiny};
    d = T{1.0} / d;
    const T delta = d * c;
    h = h * delta;
    const T dm1 = delta + (-1.0);
    if (converged(dm1, T{1.0})) {
      return log(h) + log_prefactor(a, x);
    }
  }
  throw NumericalError("incomplete gamma continued fraction did not converge");
}

Dual log1mexp_dual(Dual x) {
  const double v = log1mexp(x.v);
  // d/dx log(1 - e^x) = -e^x / (1 - e^x)
  return {v, -std::exp(x.v - v) * x.d};
}

}  // namespace

double log_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double log_normal_sf(double z) {
  if (z < -8.0) {
    return std::log1p(-0.5 * std::erfc(-z / std::sqrt(2.0)));
  }
  if (z < 35.0) {
    return std::log(0.5 * std::erfc(z / std::sqrt(2.0)));
  }
  // Asymptotic Mills-ratio expansion.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) +
                        105.0 / (z2 * z2 * z2 * z2);
  return log_normal_pdf(z) - std::log(z) + std::log(series);
}

double inverse_mills(double z) {
  if (z < -35.0) return 0.0;
  return std::exp(log_normal_pdf(z) - log_normal_sf(z));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: p must lie in (0, 1)");
  }
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against whichever tail is smaller.
  for (int it = 0; it < 2; ++it) {
    double e;
    if (x < 0.0) {
      e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    } else {
      e = (1.0 - p) - 0.5 * std::erfc(x / std::sqrt(2.0));
    }
    const double u = e * std::exp(0.5 * x * x + kLogSqrt2Pi);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double log1mexp(double x) {
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double log1pexp(double x) {
  if (x > 33.3) return x + std::exp(-x);
  if (x < -37.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double digamma(double x) {
  if (!(x > 0.0)) {
    throw DomainError("digamma: argument must be positive");
  }
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Asymptotic expansion with Bernoulli coefficients.
  const double tail =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
  return result + std::log(x) - 0.5 * inv - tail;
}

LogIncGamma log_incomplete_gamma(double a, double x) {
  if (!(a > 0.0)) throw DomainError("incomplete gamma: shape must be positive");
  if (x < 0.0) throw DomainError("incomplete gamma: x must be non-negative");
  if (x == 0.0) return {-std::numeric_limits<double>::infinity(), 0.0};
  if (std::isinf(x)) return {0.0, -std::numeric_limits<double>::infinity()};
  if (x < a + 1.0) {
    const double lp = log_p_series(a, x);
    return {lp, log1mexp(lp)};
  }
  const double lq = log_q_fraction(a, x);
  return {log1mexp(lq), lq};
}

LogIncGammaShapeGrad log_gamma_q_with_shape_grad(double a, double x) {
  if (!(a > 0.0)) throw DomainError("incomplete gamma: shape must be positive");
  if (x < 0.0) throw DomainError("incomplete gamma: x must be non-negative");
  if (x == 0.0) return {0.0, 0.0};
  const Dual ad{a, 1.0};
  if (x < a + 1.0) {
    const Dual lq = log1mexp_dual(log_p_series(ad, x));
    return {lq.v, lq.d};
  }
  const Dual lq = log_q_fraction(ad, x);
  return {lq.v, lq.d};
}

double gamma_p_inverse(double a, double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("gamma quantile: p must lie in (0, 1)");
  if (!(a > 0.0)) throw DomainError("gamma quantile: shape must be positive");
  const bool lower = p < 0.5;
  const double target = lower ? std::log(p) : std::log1p(-p);

  // Wilson-Hilferty start.
  const double z = normal_quantile(p);
  double x;
  if (a > 0.1) {
    const double s = 1.0 / (9.0 * a);
    const double w = 1.0 - s + z * std::sqrt(s);
    x = w > 0.0 ? a * w * w * w : 0.5 * a * std::exp((std::log(p * a) + std::lgamma(a)) / a);
  } else {
    x = std::exp((std::log(p) + std::log(a) + std::lgamma(a)) / a);
  }
  if (!(x > 0.0) || !std::isfinite(x)) x = a;

  // Bracket on u = log x; g(u) = log P - log p (or log q - log(1-p)) is monotone.
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double u = std::log(x);
  for (int it = 0; it < 200; ++it) {
    const double xu = std::exp(u);
    const LogIncGamma v = log_incomplete_gamma(a, xu);
    const double g = lower ? v.log_p - target : v.log_q - target;
    // d log P / d log x = x f(x) / P
    const double lxf = a * u - xu - std::lgamma(a);
    const double slope = lower ? std::exp(lxf - v.log_p) : -std::exp(lxf - v.log_q);
    const bool increasing_side = lower ? g < 0.0 : g > 0.0;
    if (increasing_side) {
      lo = u;
    } else {
      hi = u;
    }
    if (g == 0.0) break;
    double next = u - g / slope;
    if (!std::isfinite(next) || next <= lo || next >= hi) {
      if (std::isfinite(lo) && std::isfinite(hi)) {
        next = 0.5 * (lo + hi);
      } else if (std::isfinite(lo)) {
        next = lo + 1.0;
      } else {
        next = hi - 1.0;
      }
    }
    if (std::abs(next - u) <= 1e-15 * std::max(1.0, std::abs(u))) {
      u = next;
      break;
    }
    u = next;
  }
  return std::exp(u);
}

}  // namespace rssgh::special
