#include "rssgh/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rssgh/errors.hpp"
#include "rssgh/excess.hpp"

namespace rssgh {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t record_seed(std::uint64_t seed, std::size_t i) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t pick(const std::vector<double>& weights, std::size_t n, std::mt19937_64& rng) {
  if (weights.empty()) return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
}

}  // namespace

std::vector<std::string> CovariateScheme::columns() { return {"age_std", "dep2", "dep3", "dep4", "dep5", "sex"}; }

void SimConfig::validate() const {
  if (n < 1) throw ConfigError("simulate: n must be at least 1");
  if (!(horizon > 0.0)) throw ConfigError("simulate: horizon must be positive");
  if (!(dropout_rate >= 0.0)) throw ConfigError("simulate: dropout rate must be non-negative");
  if (!spec.overall_survival && !table) throw ConfigError("simulate: a life table is required");
  const auto& cov = covariates;
  if (!(cov.age_sd > 0.0) || !(cov.age_min < cov.age_max)) throw ConfigError("simulate: invalid age distribution");
  if (!cov.region_weights.empty() && cov.region_weights.size() != regions)
    throw ConfigError("simulate: region weights must have one entry per region");
  if (!cov.deprivation_weights.empty() && cov.deprivation_weights.size() != 5)
    throw ConfigError("simulate: deprivation weights must have 5 entries");
  const std::size_t p = CovariateScheme::columns().size();
  spec.validate(p);
  if (truth.beta.size() != p) throw ConfigError("simulate: truth beta does not match the 6 generated covariates");
  if (truth.alpha.size() != spec.time_columns.size())
    throw ConfigError("simulate: truth alpha does not match the time-level columns");
  if (truth.theta.family() != spec.family) throw ConfigError("simulate: truth baseline family differs from the spec");
  auto check_effect = [&](const EffectState& e, EffectStructure kind, const char* what) {
    if (kind != EffectStructure::None && e.u.size() != regions)
      throw ConfigError(std::string("simulate: truth ") + what + " effect needs one value per region");
    if (kind == EffectStructure::None && !e.u.empty())
      throw ConfigError(std::string("simulate: truth carries a ") + what + " effect the spec does not have");
  };
  check_effect(truth.time_effect, spec.time_effect, "time-level");
  check_effect(truth.hazard_effect, spec.hazard_effect, "hazard-level");
}

double SimResult::censoring_fraction() const {
  if (data.records.empty()) return 0.0;
  return 1.0 - static_cast<double>(data.events()) / static_cast<double>(data.records.size());
}

double simulate_population_time(const LifeTable& table, const PatientRecord& rec, std::mt19937_64& rng) {
  double e = std::exponential_distribution<double>(1.0)(rng);
  double s = 0.0;
  for (int guard = 0; guard < 100000; ++guard) {
    const auto seg = table.segment(rec.stratum, rec.age, rec.year, s);
    const double mass = seg.rate * (seg.end - s);
    if (mass >= e) return s + e / seg.rate;
    if (!std::isfinite(seg.end)) return kInf;
    e -= mass;
    s = seg.end;
  }
  return kInf;
}

double excess_time_from_uniform(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double z) {
  if (!(z >= 0.0 && z < 1.0)) throw DomainError("excess time: z must lie in [0, 1)");
  if (z == 0.0) return 0.0;
  const auto lp = linear_predictors(state, spec, rec);
  // S_0(y) = (1 - z)^{exp(lp_t - lp_h)}, y = t exp(lp_t)
  const double log_s0 = std::log1p(-z) * std::exp(lp.time - lp.hazard);
  if (!(log_s0 < 0.0)) return 0.0;
  if (!std::isfinite(log_s0)) return kInf;
  const double y = survival_quantile(state.theta, log_s0);
  const double t = y / std::exp(lp.time);
  return std::isfinite(t) ? t : kInf;
}

double simulate_excess_time(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec,
                            std::mt19937_64& rng) {
  return excess_time_from_uniform(state, spec, rec, std::uniform_real_distribution<double>(0.0, 1.0)(rng));
}

std::vector<double> sample_icar(const RegionGraph& graph, double tau, std::mt19937_64& rng) {
  if (!(tau > 0.0)) throw DomainError("sample_icar: tau must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(graph.laplacian());
  const auto& lambda = eig.eigenvalues();
  const double tol = 1e-9 * lambda.maxCoeff();
  std::normal_distribution<double> norm;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) <= tol) continue;
    u += eig.eigenvectors().col(k) * (norm(rng) / std::sqrt(tau * lambda(k)));
  }
  return {u.data(), u.data() + u.size()};
}

SimResult simulate_dataset(const SimConfig& config) {
  config.validate();
  const auto& cov = config.covariates;
  SimResult out;
  out.truth = config.truth;
  out.data.covariates = CovariateScheme::columns();
  out.data.records.reserve(config.n);
  out.latent.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    std::mt19937_64 rng(record_seed(config.seed, i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> norm(cov.age_mean, cov.age_sd);
    PatientRecord r;
    const int sex = static_cast<int>(i % 2);
    const int dep = static_cast<int>(pick(cov.deprivation_weights, 5, rng)) + 1;
    r.region = pick(cov.region_weights, config.regions, rng);
    do {
      r.age = norm(rng);
    } while (r.age < cov.age_min || r.age > cov.age_max);
    r.year = cov.year_min + (cov.year_max - cov.year_min) * unif(rng);
    r.x = {(r.age - cov.age_mean) / cov.age_sd, dep == 2 ? 1.0 : 0.0, dep == 3 ? 1.0 : 0.0,
           dep == 4 ? 1.0 : 0.0, dep == 5 ? 1.0 : 0.0, static_cast<double>(sex)};
    r.stratum = {sex, dep, static_cast<int>(r.region) + 1};

    LatentRecord lat;
    lat.z = unif(rng);
    lat.excess_time = excess_time_from_uniform(config.truth, config.spec, r, lat.z);
    lat.population_time = config.table && !config.spec.overall_survival
                              ? simulate_population_time(*config.table, r, rng)
                              : kInf;
    lat.admin_censor = config.horizon;
    lat.dropout_censor = config.dropout_rate > 0.0
                             ? std::exponential_distribution<double>(config.dropout_rate)(rng)
                             : kInf;
    const double event = std::min(lat.population_time, lat.excess_time);
    const double censor = std::min(lat.admin_censor, lat.dropout_censor);
    r.status = event < censor ? 1 : 0;
    r.time = std::min(event, censor);
    if (!(r.time > 0.0)) {
      // a zero draw cannot be scored as a death; nudge to the smallest positive time
      r.time = std::numeric_limits<double>::min();
    }
    out.data.records.push_back(std::move(r));
    out.latent.push_back(lat);
  }
  return out;
}

LifeTable synthetic_life_table(std::size_t regions, int year_min, int year_max) {
  LifeTable t;
  for (int sex = 0; sex <= 1; ++sex)
    for (int dep = 1; dep <= 5; ++dep)
      for (int reg = 1; reg <= static_cast<int>(regions); ++reg) {
        const double mult = (sex == 1 ? 1.25 : 1.0) * (1.0 + 0.08 * (dep - 1)) *
                            (1.0 + 0.03 * (reg - (static_cast<int>(regions) + 1) / 2.0));
        for (int age = 0; age <= 110; ++age)
          for (int year = year_min; year <= year_max; ++year) {
            const double rate = std::exp(-10.2 + 0.093 * age) * std::pow(0.985, year - year_min) * mult;
            t.add({sex, dep, reg}, age, year, std::min(rate, 5.0));
          }
      }
  t.finalize();
  return t;
}

ParamState reference_truth(Family family, std::vector<double> time_effect, std::vector<double> hazard_effect) {
  ParamState s;
  switch (family) {
    case Family::LogNormal:
      s.theta = BaselineParams::log_normal(0.65, 1.15);
      break;
    case Family::PowerGeneralizedWeibull:
      s.theta = BaselineParams::power_generalized_weibull(0.5, 3.75, 8.0);
      break;
    default:
      throw ConfigError("reference truth is defined for LN and PGW only");
  }
  s.alpha = {1.0};
  s.beta = {1.0, -1.0, -1.0, -1.0, -1.0, 2.0};
  s.time_effect.u = std::move(time_effect);
  s.hazard_effect.u = std::move(hazard_effect);
  return s;
}

}  // namespace rssgh
