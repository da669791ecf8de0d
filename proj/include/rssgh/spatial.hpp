#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "rssgh/graph.hpp"

namespace rssgh {

enum class EffectStructure { None, IID, ICAR, BYM2 };

std::string_view structure_code(EffectStructure s);
EffectStructure structure_from_code(std::string_view code);

/// Default standard deviation of mean(u) in the soft sum-to-zero penalty.
inline constexpr double kSumToZeroSd = 0.001;

/// Sum over unordered edges of (u_k - u_l)^2.
double icar_pairwise(std::span<const double> u, const RegionGraph& g);

/// log N(sum(u) | 0, (sd * r)^2), i.e. mean(u) ~ N(0, sd^2).
double soft_sum_to_zero(std::span<const double> u, double sd = kSumToZeroSd);

/// ((r-1)/2) log tau - (tau/2) sum_{k~l} (u_k - u_l)^2 + soft_sum_to_zero(u).
double icar_log_prior(std::span<const double> u, const RegionGraph& g, double tau,
                      double sd = kSumToZeroSd);

/// Same value; adds d/du into grad_u and, if non-null, d/dtau into *grad_tau.
double icar_log_prior(std::span<const double> u, const RegionGraph& g, double tau, double sd,
                      std::span<double> grad_u, double* grad_tau);

/// Sum of N(u_k | 0, sigma^2) log densities.
double iid_log_prior(std::span<const double> u, double sigma);
double iid_log_prior(std::span<const double> u, double sigma, std::span<double> grad_u,
                     double* grad_sigma);

/// Geometric mean of the diagonal of pinv(D - A).
double icar_scaling_factor(const RegionGraph& g);

/// u = sigma (sqrt(1 - rho) v* + sqrt(rho) s*).
std::vector<double> bym2_combine(std::span<const double> v_star, std::span<const double> s_star,
                                 double sigma, double rho);

/// log N(v* | 0, I) + ICAR(s* | precision = scaling). sigma and rho enter
/// only through their own hyperpriors.
double bym2_log_prior(std::span<const double> v_star, std::span<const double> s_star,
                      const RegionGraph& g, double scaling, double sd = kSumToZeroSd);
double bym2_log_prior(std::span<const double> v_star, std::span<const double> s_star,
                      const RegionGraph& g, double scaling, double sd, std::span<double> grad_v,
                      std::span<double> grad_s);

}  // namespace rssgh
