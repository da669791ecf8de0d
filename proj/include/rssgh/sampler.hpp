#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rssgh {

class Posterior;

/// Differentiable log-density on an unconstrained space, plus an optional
/// map to the constrained scale that draws are reported on.
struct Target {
  std::size_t dim = 0;
  /// Writes the gradient into grad and returns log p(z) up to a constant.
  std::function<double(std::span<const double>, std::span<double>)> log_density_gradient;
  /// Defaults to the identity.
  std::function<std::vector<double>(std::span<const double>)> constrain;
  std::vector<std::string> names;
  /// Sampling coordinates to the coordinates recorded as unconstrained
  /// draws. Defaults to the identity.
  std::function<std::vector<double>(std::span<const double>)> position;
  /// Per-coordinate multiplier of the initial radius. Empty means all 1.
  std::vector<double> init_scale;

  std::vector<double> constrained(std::span<const double> z) const;
  std::vector<double> recorded(std::span<const double> z) const;
};

/// The posterior in sampling coordinates. Each ICAR-structured block (ICAR u,
/// BYM2 s*) is rotated onto the Laplacian eigenvectors orthogonal to 1 plus
/// the mean direction scaled by the sum-to-zero sd. The map is linear, so the
/// density is unchanged; recorded draws are on the layout's unconstrained scale.
/// BYM2 standardized effects (v*, s*) start within a tenth of the init radius.
Target make_target(const Posterior& posterior);

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t iterations = 4000;  ///< per chain, warmup included
  std::size_t warmup = 2000;
  double target_accept = 0.8;
  std::size_t max_steps = 32;     ///< leapfrog steps drawn uniform on [1, max_steps]
  std::uint64_t seed = 1;
  double init_radius = 1.0;       ///< initial z uniform on [-r, r]
  std::size_t threads = 0;        ///< 0: one per chain, capped at hardware concurrency
  double max_energy_error = 1000.0;

  void validate() const;
};

struct ChainDraws {
  Eigen::MatrixXd draws;          ///< kept iterations x constrained dim
  Eigen::MatrixXd unconstrained;  ///< kept iterations x dim
  std::vector<double> log_density;
  std::vector<double> accept_stat;
  std::vector<int> divergent;
  std::vector<double> step_sizes;  ///< one per iteration, warmup included
  std::size_t divergences = 0;     ///< post-warmup
  std::size_t warmup_divergences = 0;
  double step_size = 0.0;
  std::vector<double> inv_mass;

  std::size_t size() const noexcept { return static_cast<std::size_t>(draws.rows()); }
  double mean_accept() const;
};

struct Diagnostics {
  std::vector<std::string> names;
  std::vector<double> rhat;
  std::vector<double> ess;
  std::vector<std::size_t> divergences;

  double max_rhat() const;
  double min_ess() const;
};

struct SampleResult {
  std::vector<ChainDraws> chains;
  Diagnostics diagnostics;

  /// All kept draws stacked chain after chain.
  Eigen::MatrixXd pooled() const;
  Eigen::MatrixXd pooled_unconstrained() const;
};

/// Per-chain seed derived from the master seed and chain index.
std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain);

struct LeapfrogState {
  std::vector<double> z, p, grad;
  double log_density = 0.0;
};

/// `steps` leapfrog updates with diagonal inverse mass; returns false when a
/// non-finite value appears.
bool leapfrog(const Target& target, LeapfrogState& s, double eps, std::span<const double> inv_mass,
              std::size_t steps);

double hamiltonian(const LeapfrogState& s, std::span<const double> inv_mass);

ChainDraws run_chain(const Target& target, const SamplerConfig& config, std::uint64_t seed);
SampleResult run_chains(const Target& target, const SamplerConfig& config);

/// Split-R-hat over chains of equal length; +inf when within-chain variance is zero.
double split_rhat(const std::vector<std::vector<double>>& chains);
/// Multi-chain ESS with Geyer's initial positive sequence on split chains.
double ess(const std::vector<std::vector<double>>& chains);

Diagnostics diagnose(const std::vector<ChainDraws>& chains, const std::vector<std::string>& names);

}  // namespace rssgh
