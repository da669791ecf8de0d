#pragma once

// Shared generators for the unit and acceptance suites.

#include <cmath>
#include <random>

#include "rssgh/baseline.hpp"

namespace rssgh::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline BaselineParams random_params(Family f, std::mt19937_64& rng) {
  switch (f) {
    case Family::LogNormal:
      return BaselineParams::log_normal(uniform(rng, -2, 2), uniform(rng, 0.3, 3));
    case Family::LogLogistic:
      return BaselineParams::log_logistic(uniform(rng, -2, 2), uniform(rng, 0.3, 3));
    case Family::PowerGeneralizedWeibull:
      return BaselineParams::power_generalized_weibull(uniform(rng, 0.2, 5), uniform(rng, 0.3, 5),
                                                       uniform(rng, 0.2, 8));
    case Family::Gamma:
      return BaselineParams::gamma(uniform(rng, 0.2, 5), uniform(rng, 0.2, 10));
    case Family::GeneralizedGamma:
      return BaselineParams::generalized_gamma(uniform(rng, 0.2, 5), uniform(rng, 0.3, 8),
                                               uniform(rng, 0.3, 4));
  }
  return BaselineParams::log_normal(0, 1);
}

/// A time inside the bulk of the distribution: a random quantile in [1e-6, 1 - 1e-6].
inline double random_time(const BaselineParams& p, std::mt19937_64& rng) {
  const double u = std::exp(uniform(rng, std::log(1e-6), std::log(0.5)));
  const double prob = uniform(rng, 0, 1) < 0.5 ? u : 1.0 - u;
  return quantile(p, prob);
}

inline constexpr Family kAllFamilies[] = {Family::LogNormal, Family::LogLogistic,
                                          Family::PowerGeneralizedWeibull, Family::Gamma,
                                          Family::GeneralizedGamma};

}  // namespace rssgh::testing
