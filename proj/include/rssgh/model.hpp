#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rssgh/baseline.hpp"
#include "rssgh/spatial.hpp"

namespace rssgh {

/// The nine members of the excess-hazard lattice.
enum class SubModel { SGH, SGH_I, SGH_II, SPH, SAFT, GH, PH, AFT, AH };

std::string_view submodel_code(SubModel m);  ///< "RS-SGH", "RS-SGH-I", ...
SubModel submodel_from_code(std::string_view code);

/// How the time-level coefficients relate to the hazard-level ones.
enum class TimeCoefficients { Free, Zero, TiedToHazard };

struct ModelSpec {
  Family family = Family::LogNormal;
  SubModel submodel = SubModel::SGH;
  EffectStructure time_effect = EffectStructure::None;    ///< structure of u~
  EffectStructure hazard_effect = EffectStructure::None;  ///< structure of u
  std::vector<std::size_t> time_columns;  ///< columns of x entering the time scale
  bool overall_survival = false;          ///< treat h_P as zero

  /// Fill both effect structures from the lattice: RS-SGH puts `structure`
  /// on both levels, RS-SGH-I and RS-SPH on the hazard level only, RS-SGH-II
  /// and RS-SAFT share one vector. The non-spatial members need None.
  static ModelSpec make(Family family, SubModel submodel, EffectStructure structure,
                        std::vector<std::size_t> time_columns);

  TimeCoefficients time_coefficients() const;
  bool hazard_coefficients() const { return submodel != SubModel::AH; }
  /// u~ and u are one vector.
  bool shared_effect() const { return submodel == SubModel::SGH_II || submodel == SubModel::SAFT; }

  /// Throws ConfigError when the spec violates the lattice; `p` is the number of x columns.
  void validate(std::size_t p) const;
};

/// Prior hyperparameters. Defaults are the recommended weakly informative values.
struct HyperConfig {
  double alpha_var = 100.0;   ///< alpha ~ N(0, alpha_var)
  double beta_var = 100.0;    ///< beta ~ N(0, beta_var)
  double mu_var = 100.0;      ///< LN/LL mu ~ N(0, mu_var)
  double tau_sigma = 2.5;     ///< LN/LL sigma ~ HalfCauchy(0, tau_sigma)
  double tau_eta = 2.5;       ///< eta ~ HalfCauchy(0, tau_eta)
  double tau_nu = 2.5;        ///< nu ~ HalfCauchy(0, tau_nu)
  double kappa_shape = 0.65;  ///< kappa ~ Gamma(shape, rate)
  double kappa_rate = 1.83;
  double tau_sigma_gamma = 2.5;  ///< spline variance ~ HalfCauchy(0, tau_sigma_gamma)
  double theta_tau = 0.01;       ///< ICAR precision (and IID 1/sd^2) ~ Gamma(theta, theta)
  double bym2_sigma_scale = 1.0;  ///< BYM2 sigma ~ HalfNormal(0, scale)
  double bym2_rho_a = 0.5;        ///< BYM2 rho ~ Beta(a, b)
  double bym2_rho_b = 0.5;
  double sum_to_zero_sd = kSumToZeroSd;
};

/// One random-effect vector with its hyperparameters on the natural scale.
/// For BYM2, `u` is derived from v*, s*, sigma and rho.
struct EffectState {
  EffectStructure kind = EffectStructure::None;
  std::vector<double> u;
  double tau = 0.0;    ///< ICAR precision
  double sigma = 0.0;  ///< IID sd or BYM2 sd
  double rho = 0.0;    ///< BYM2 mixing
  std::vector<double> v_star, s_star;
};

/// Full parameter point on the natural scale with every tie already expanded:
/// alpha is zero for the PH members and equals beta for the AFT members,
/// beta is zero for RS-AH, and time_effect mirrors hazard_effect when shared.
struct ParamState {
  BaselineParams theta = BaselineParams::log_normal(0.0, 1.0);
  std::vector<double> alpha;  ///< length = time columns
  std::vector<double> beta;   ///< length = p
  std::vector<double> gamma;  ///< length = q
  std::vector<double> spline_var;  ///< one variance per spline block
  EffectState time_effect;
  EffectState hazard_effect;
};

/// Map between the unconstrained sampling vector and ParamState.
class ParamLayout {
 public:
  ParamLayout(const ModelSpec& spec, std::size_t p, std::vector<std::size_t> spline_blocks,
              std::size_t regions);

  std::size_t dim() const noexcept { return names_.size(); }
  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t regions() const noexcept { return regions_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t q() const noexcept { return q_; }

  /// Names of the coordinates, labelled by their natural-scale meaning.
  const std::vector<std::string>& names() const noexcept { return names_; }

  ParamState unpack(std::span<const double> z) const;
  std::vector<double> pack(const ParamState& state) const;

  /// Natural-scale value of every coordinate followed by derived effect
  /// vectors (BYM2 u), as written to draw files.
  std::vector<double> constrained(std::span<const double> z) const;
  const std::vector<std::string>& constrained_names() const noexcept { return constrained_names_; }
  /// Inverse of `constrained` (derived columns are ignored).
  std::vector<double> from_constrained(std::span<const double> row) const;

  struct EffectSlots {
    EffectStructure kind = EffectStructure::None;
    std::size_t values = 0;  ///< u (IID/ICAR) or v* (BYM2)
    std::size_t s_star = 0;  ///< BYM2 only
    std::size_t hyper = 0;   ///< log tau, log sigma; BYM2: log sigma then logit rho
    bool present() const { return kind != EffectStructure::None; }
  };

  // offsets into the unconstrained vector
  std::size_t theta_offset() const noexcept { return 0; }
  std::size_t alpha_offset() const noexcept { return alpha_; }
  std::size_t beta_offset() const noexcept { return beta_; }
  std::size_t gamma_offset() const noexcept { return gamma_; }
  std::size_t spline_var_offset() const noexcept { return spline_var_; }
  bool alpha_free() const noexcept { return alpha_free_; }
  const EffectSlots& time_slots() const noexcept { return time_; }
  const EffectSlots& hazard_slots() const noexcept { return hazard_; }
  const std::vector<std::size_t>& spline_blocks() const noexcept { return blocks_; }
  std::size_t time_columns() const noexcept { return spec_.time_columns.size(); }

 private:
  void add_effect(EffectSlots& slots, EffectStructure kind, const std::string& prefix);

  ModelSpec spec_;
  std::size_t p_, q_, regions_;
  std::vector<std::size_t> blocks_;
  bool alpha_free_ = false;
  std::size_t alpha_ = 0, beta_ = 0, gamma_ = 0, spline_var_ = 0;
  EffectSlots time_, hazard_;
  std::vector<std::string> names_;
  std::vector<std::string> constrained_names_;
};

double logistic(double x);
double logit(double p);

}  // namespace rssgh
