#include "rssgh/model.hpp"

#include <cmath>
#include <string>

#include "rssgh/errors.hpp"
#include "rssgh/special.hpp"

namespace rssgh {

namespace {

constexpr SubModel kAllSubModels[] = {SubModel::SGH, SubModel::SGH_I, SubModel::SGH_II,
                                      SubModel::SPH, SubModel::SAFT,  SubModel::GH,
                                      SubModel::PH,  SubModel::AFT,   SubModel::AH};

bool spatial(SubModel m) {
  return m == SubModel::SGH || m == SubModel::SGH_I || m == SubModel::SGH_II || m == SubModel::SPH ||
         m == SubModel::SAFT;
}

std::string idx(std::size_t k) { return "[" + std::to_string(k + 1) + "]"; }

}  // namespace

double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

std::string_view submodel_code(SubModel m) {
  switch (m) {
    case SubModel::SGH: return "RS-SGH";
    case SubModel::SGH_I: return "RS-SGH-I";
    case SubModel::SGH_II: return "RS-SGH-II";
    case SubModel::SPH: return "RS-SPH";
    case SubModel::SAFT: return "RS-SAFT";
    case SubModel::GH: return "RS-GH";
    case SubModel::PH: return "RS-PH";
    case SubModel::AFT: return "RS-AFT";
    case SubModel::AH: return "RS-AH";
  }
  return "RS-SGH";
}

SubModel submodel_from_code(std::string_view code) {
  for (auto m : kAllSubModels) {
    if (code == submodel_code(m)) return m;
  }
  throw DomainError("unknown sub-model '" + std::string(code) + "'");
}

ModelSpec ModelSpec::make(Family family, SubModel submodel, EffectStructure structure,
                          std::vector<std::size_t> time_columns) {
  ModelSpec s;
  s.family = family;
  s.submodel = submodel;
  s.time_columns = std::move(time_columns);
  switch (submodel) {
    case SubModel::SGH:
      s.time_effect = s.hazard_effect = structure;
      break;
    case SubModel::SGH_I:
    case SubModel::SPH:
      s.hazard_effect = structure;
      break;
    case SubModel::SGH_II:
    case SubModel::SAFT:
      s.time_effect = s.hazard_effect = structure;
      break;
    default:
      if (structure != EffectStructure::None) {
        throw ConfigError(std::string(submodel_code(submodel)) + " has no random effects; got structure '" +
                          std::string(structure_code(structure)) + "'");
      }
  }
  return s;
}

TimeCoefficients ModelSpec::time_coefficients() const {
  switch (submodel) {
    case SubModel::SPH:
    case SubModel::PH: return TimeCoefficients::Zero;
    case SubModel::SAFT:
    case SubModel::AFT: return TimeCoefficients::TiedToHazard;
    default: return TimeCoefficients::Free;
  }
}

void ModelSpec::validate(std::size_t p) const {
  const std::string name(submodel_code(submodel));
  for (std::size_t c : time_columns) {
    if (c >= p) throw ConfigError(name + ": time-level column " + std::to_string(c + 1) + " is not a covariate");
  }
  if (time_coefficients() == TimeCoefficients::TiedToHazard) {
    bool identity = time_columns.size() == p;
    for (std::size_t j = 0; identity && j < p; ++j) identity = time_columns[j] == j;
    if (!identity) throw ConfigError(name + " ties alpha to beta, so every covariate must enter the time scale");
  }
  if (!spatial(submodel) && (time_effect != EffectStructure::None || hazard_effect != EffectStructure::None)) {
    throw ConfigError(name + " has no random effects");
  }
  if ((submodel == SubModel::SGH_I || submodel == SubModel::SPH) && time_effect != EffectStructure::None) {
    throw ConfigError(name + " has no time-level random effect");
  }
  if (shared_effect() && time_effect != hazard_effect) {
    throw ConfigError(name + " shares one random effect between levels; structures must match");
  }
}

ParamLayout::ParamLayout(const ModelSpec& spec, std::size_t p, std::vector<std::size_t> spline_blocks,
                         std::size_t regions)
    : spec_(spec), p_(p), q_(0), regions_(regions), blocks_(std::move(spline_blocks)) {
  spec_.validate(p);
  for (std::size_t b : blocks_) q_ += b;
  if (regions_ == 0 && (spec_.time_effect != EffectStructure::None || spec_.hazard_effect != EffectStructure::None)) {
    throw ConfigError("random effects need at least one region");
  }

  for (auto n : family_parameter_names(spec_.family)) names_.emplace_back(n);
  alpha_free_ = spec_.time_coefficients() == TimeCoefficients::Free;
  alpha_ = names_.size();
  if (alpha_free_) {
    for (std::size_t j = 0; j < spec_.time_columns.size(); ++j) names_.push_back("alpha" + idx(j));
  }
  beta_ = names_.size();
  if (spec_.hazard_coefficients()) {
    for (std::size_t j = 0; j < p_; ++j) names_.push_back("beta" + idx(j));
  }
  gamma_ = names_.size();
  for (std::size_t j = 0; j < q_; ++j) names_.push_back("gamma" + idx(j));
  spline_var_ = names_.size();
  for (std::size_t b = 0; b < blocks_.size(); ++b) names_.push_back("sigma2_gamma" + idx(b));

  if (!spec_.shared_effect()) add_effect(time_, spec_.time_effect, "ut");
  add_effect(hazard_, spec_.hazard_effect, "u");

  constrained_names_ = names_;
  for (const auto* slots : {&time_, &hazard_}) {
    if (slots->kind == EffectStructure::BYM2) {
      const std::string prefix = slots == &time_ ? "ut" : "u";
      for (std::size_t k = 0; k < regions_; ++k) constrained_names_.push_back(prefix + idx(k));
    }
  }
}

void ParamLayout::add_effect(EffectSlots& slots, EffectStructure kind, const std::string& prefix) {
  slots.kind = kind;
  if (kind == EffectStructure::None) return;
  slots.values = names_.size();
  const std::string vname = kind == EffectStructure::BYM2 ? "v_" + prefix : prefix;
  for (std::size_t k = 0; k < regions_; ++k) names_.push_back(vname + idx(k));
  if (kind == EffectStructure::BYM2) {
    slots.s_star = names_.size();
    for (std::size_t k = 0; k < regions_; ++k) names_.push_back("s_" + prefix + idx(k));
  }
  slots.hyper = names_.size();
  switch (kind) {
    case EffectStructure::IID: names_.push_back("sigma_" + prefix); break;
    case EffectStructure::ICAR: names_.push_back("tau_" + prefix); break;
    case EffectStructure::BYM2:
      names_.push_back("sigma_" + prefix);
      names_.push_back("rho_" + prefix);
      break;
    default: break;
  }
}

namespace {

EffectState unpack_effect(const ParamLayout::EffectSlots& slots, std::span<const double> z, std::size_t r) {
  EffectState e;
  e.kind = slots.kind;
  switch (slots.kind) {
    case EffectStructure::None:
      e.u.assign(r, 0.0);
      break;
    case EffectStructure::IID:
      e.u.assign(z.begin() + slots.values, z.begin() + slots.values + r);
      e.sigma = std::exp(z[slots.hyper]);
      break;
    case EffectStructure::ICAR:
      e.u.assign(z.begin() + slots.values, z.begin() + slots.values + r);
      e.tau = std::exp(z[slots.hyper]);
      break;
    case EffectStructure::BYM2:
      e.v_star.assign(z.begin() + slots.values, z.begin() + slots.values + r);
      e.s_star.assign(z.begin() + slots.s_star, z.begin() + slots.s_star + r);
      e.sigma = std::exp(z[slots.hyper]);
      e.rho = logistic(z[slots.hyper + 1]);
      e.u = bym2_combine(e.v_star, e.s_star, e.sigma, e.rho);
      break;
  }
  return e;
}

void pack_effect(const ParamLayout::EffectSlots& slots, const EffectState& e, std::vector<double>& z,
                 std::size_t r) {
  auto need = [&](const std::vector<double>& v, const char* what) {
    if (v.size() != r) throw DimensionError(std::string("effect vector ") + what + " has the wrong length");
  };
  switch (slots.kind) {
    case EffectStructure::None: return;
    case EffectStructure::IID:
      need(e.u, "u");
      std::copy(e.u.begin(), e.u.end(), z.begin() + slots.values);
      z[slots.hyper] = std::log(e.sigma);
      return;
    case EffectStructure::ICAR:
      need(e.u, "u");
      std::copy(e.u.begin(), e.u.end(), z.begin() + slots.values);
      z[slots.hyper] = std::log(e.tau);
      return;
    case EffectStructure::BYM2:
      need(e.v_star, "v*");
      need(e.s_star, "s*");
      std::copy(e.v_star.begin(), e.v_star.end(), z.begin() + slots.values);
      std::copy(e.s_star.begin(), e.s_star.end(), z.begin() + slots.s_star);
      z[slots.hyper] = std::log(e.sigma);
      z[slots.hyper + 1] = logit(e.rho);
      return;
  }
}

}  // namespace

ParamState ParamLayout::unpack(std::span<const double> z) const {
  if (z.size() != dim()) {
    throw DimensionError("parameter vector has length " + std::to_string(z.size()) + ", layout needs " +
                         std::to_string(dim()));
  }
  ParamState s;
  const std::size_t k = family_arity(spec_.family);
  s.theta = BaselineParams::from_unconstrained(spec_.family, z.subspan(0, k));
  if (spec_.hazard_coefficients()) {
    s.beta.assign(z.begin() + beta_, z.begin() + beta_ + p_);
  } else {
    s.beta.assign(p_, 0.0);
  }
  switch (spec_.time_coefficients()) {
    case TimeCoefficients::Free:
      s.alpha.assign(z.begin() + alpha_, z.begin() + alpha_ + spec_.time_columns.size());
      break;
    case TimeCoefficients::Zero:
      s.alpha.assign(spec_.time_columns.size(), 0.0);
      break;
    case TimeCoefficients::TiedToHazard:
      s.alpha = s.beta;
      break;
  }
  s.gamma.assign(z.begin() + gamma_, z.begin() + gamma_ + q_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) s.spline_var.push_back(std::exp(z[spline_var_ + b]));
  s.hazard_effect = unpack_effect(hazard_, z, regions_);
  s.time_effect = spec_.shared_effect() ? s.hazard_effect : unpack_effect(time_, z, regions_);
  return s;
}

std::vector<double> ParamLayout::pack(const ParamState& s) const {
  std::vector<double> z(dim(), 0.0);
  if (s.theta.family() != spec_.family) throw DimensionError("baseline family differs from the layout");
  s.theta.to_unconstrained(std::span<double>(z.data(), family_arity(spec_.family)));
  if (alpha_free_) {
    if (s.alpha.size() != spec_.time_columns.size()) throw DimensionError("alpha has the wrong length");
    std::copy(s.alpha.begin(), s.alpha.end(), z.begin() + alpha_);
  }
  if (spec_.hazard_coefficients()) {
    if (s.beta.size() != p_) throw DimensionError("beta has the wrong length");
    std::copy(s.beta.begin(), s.beta.end(), z.begin() + beta_);
  }
  if (s.gamma.size() != q_) throw DimensionError("gamma has the wrong length");
  std::copy(s.gamma.begin(), s.gamma.end(), z.begin() + gamma_);
  if (s.spline_var.size() != blocks_.size()) throw DimensionError("spline variance count is wrong");
  for (std::size_t b = 0; b < blocks_.size(); ++b) z[spline_var_ + b] = std::log(s.spline_var[b]);
  pack_effect(time_, s.time_effect, z, regions_);
  pack_effect(hazard_, s.hazard_effect, z, regions_);
  return z;
}

std::vector<double> ParamLayout::constrained(std::span<const double> z) const {
  const ParamState s = unpack(z);
  std::vector<double> out(z.begin(), z.end());
  const std::size_t k = family_arity(spec_.family);
  for (std::size_t j = 0; j < k; ++j) out[j] = s.theta[j];
  for (std::size_t b = 0; b < blocks_.size(); ++b) out[spline_var_ + b] = s.spline_var[b];
  auto hyper = [&](const EffectSlots& slots, const EffectState& e) {
    switch (slots.kind) {
      case EffectStructure::IID: out[slots.hyper] = e.sigma; break;
      case EffectStructure::ICAR: out[slots.hyper] = e.tau; break;
      case EffectStructure::BYM2:
        out[slots.hyper] = e.sigma;
        out[slots.hyper + 1] = e.rho;
        break;
      default: break;
    }
  };
  hyper(time_, s.time_effect);
  hyper(hazard_, s.hazard_effect);
  if (time_.kind == EffectStructure::BYM2) out.insert(out.end(), s.time_effect.u.begin(), s.time_effect.u.end());
  if (hazard_.kind == EffectStructure::BYM2) {
    out.insert(out.end(), s.hazard_effect.u.begin(), s.hazard_effect.u.end());
  }
  return out;
}

std::vector<double> ParamLayout::from_constrained(std::span<const double> row) const {
  if (row.size() < dim()) throw DimensionError("draw row is shorter than the parameter layout");
  std::vector<double> z(row.begin(), row.begin() + dim());
  const std::size_t k = family_arity(spec_.family);
  const BaselineParams theta(spec_.family, row.subspan(0, k));
  theta.to_unconstrained(std::span<double>(z.data(), k));
  for (std::size_t b = 0; b < blocks_.size(); ++b) z[spline_var_ + b] = std::log(row[spline_var_ + b]);
  for (const auto* slots : {&time_, &hazard_}) {
    if (slots->kind == EffectStructure::None) continue;
    z[slots->hyper] = std::log(row[slots->hyper]);
    if (slots->kind == EffectStructure::BYM2) z[slots->hyper + 1] = logit(row[slots->hyper + 1]);
  }
  return z;
}

}  // namespace rssgh
