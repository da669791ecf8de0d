#include "rssgh/excess.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rssgh/errors.hpp"
#include "rssgh/special.hpp"

namespace rssgh {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double half_cauchy_lpdf(double x, double scale) {
  const double r = x / scale;
  return std::log(2.0 / special::kPi) - std::log(scale) - std::log1p(r * r);
}

// d/dz of the half-Cauchy log density of x = exp(z), Jacobian included
double half_cauchy_dlog(double x, double scale) {
  const double r2 = (x / scale) * (x / scale);
  return 1.0 - 2.0 * r2 / (1.0 + r2);
}

double normal_lpdf(double x, double var) { return -0.5 * std::log(2.0 * special::kPi * var) - 0.5 * x * x / var; }

}  // namespace

LinearPredictors linear_predictors(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec) {
  LinearPredictors lp;
  if (state.alpha.size() != spec.time_columns.size()) throw DimensionError("alpha length differs from the time columns");
  if (state.beta.size() != rec.x.size()) throw DimensionError("beta length differs from the covariates");
  if (state.gamma.size() != rec.s.size()) throw DimensionError("gamma length differs from the spline columns");
  for (std::size_t j = 0; j < spec.time_columns.size(); ++j) lp.time += rec.x.at(spec.time_columns[j]) * state.alpha[j];
  for (std::size_t j = 0; j < rec.x.size(); ++j) lp.hazard += rec.x[j] * state.beta[j];
  for (std::size_t j = 0; j < rec.s.size(); ++j) lp.hazard += rec.s[j] * state.gamma[j];
  if (!state.time_effect.u.empty()) lp.time += state.time_effect.u.at(rec.region);
  if (!state.hazard_effect.u.empty()) lp.hazard += state.hazard_effect.u.at(rec.region);
  return lp;
}

double log_excess_hazard(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t) {
  const auto lp = linear_predictors(state, spec, rec);
  return log_hazard(state.theta, t * std::exp(lp.time)) + lp.hazard;
}

double excess_hazard(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t) {
  return std::exp(log_excess_hazard(state, spec, rec, t));
}

double cum_excess_hazard(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t) {
  if (t < 0.0) throw DomainError("cumulative excess hazard needs t >= 0");
  if (t == 0.0) return 0.0;
  const auto lp = linear_predictors(state, spec, rec);
  return cum_hazard(state.theta, t * std::exp(lp.time)) * std::exp(lp.hazard - lp.time);
}

double net_survival(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec, double t) {
  return std::exp(-cum_excess_hazard(state, spec, rec, t));
}

double population_hazard(const LifeTable& table, const PatientRecord& rec, double t) {
  return table.hazard(rec.stratum, rec.age + t, rec.year + t);
}

double population_cum_hazard(const LifeTable& table, const PatientRecord& rec, double t) {
  return table.cum_hazard(rec.stratum, rec.age, rec.year, t);
}

double record_log_likelihood(const ParamState& state, const ModelSpec& spec, const PatientRecord& rec,
                             double pop_hazard) {
  const double h_cum = cum_excess_hazard(state, spec, rec, rec.time);
  if (rec.status == 0) return -h_cum;
  const double lhp = pop_hazard > 0.0 ? std::log(pop_hazard) : kNegInf;
  return log_add_exp(lhp, log_excess_hazard(state, spec, rec, rec.time)) - h_cum;
}

double log_likelihood(const ParamState& state, const ModelSpec& spec, const Dataset& data, const LifeTable* table) {
  if (!spec.overall_survival && !table) throw ConfigError("a life table is required outside overall-survival mode");
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data.records[i];
    const double hp = spec.overall_survival ? 0.0 : population_hazard(*table, rec, rec.time);
    const double ll = record_log_likelihood(state, spec, rec, hp);
    if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood", i);
    acc += ll;
  }
  return acc;
}

double spline_g_factor(std::size_t n, std::size_t n_obs, std::size_t q) {
  if (q == 0) throw DomainError("g-prior needs at least one spline column");
  if (n_obs > n) throw DomainError("more events than records");
  const double nd = static_cast<double>(n);
  return (nd - 0.5 * (nd - static_cast<double>(n_obs))) / static_cast<double>(q);
}

// ---------------------------------------------------------------------------

namespace {

std::size_t region_count(const Dataset& data, const RegionGraph* graph) {
  if (graph) return graph->size();
  std::size_t r = 0;
  for (const auto& rec : data.records) r = std::max(r, rec.region + 1);
  return std::max<std::size_t>(r, 1);
}

std::vector<std::size_t> block_sizes(const Dataset& data) {
  std::vector<std::size_t> b;
  for (const auto& blk : data.splines) b.push_back(blk.size());
  return b;
}

}  // namespace

struct Posterior::ExpandedGrad {
  std::array<double, 3> theta{};
  Eigen::VectorXd alpha, beta, gamma;
  std::vector<double> ut, u;
};

Posterior::Posterior(const ModelSpec& spec, const Dataset& data, const LifeTable* table, const RegionGraph* graph,
                     HyperConfig hyper)
    : layout_(spec, data.covariates.size(), block_sizes(data), region_count(data, graph)), hyper_(hyper) {
  const std::size_t n = data.size(), p = data.covariates.size(), q = data.spline_columns();
  const std::size_t pt = spec.time_columns.size();
  const std::size_t r = layout_.regions();
  data.validate(r);
  if (graph) graph_ = std::make_shared<RegionGraph>(*graph);
  const bool needs_graph = spec.time_effect == EffectStructure::ICAR || spec.time_effect == EffectStructure::BYM2 ||
                           spec.hazard_effect == EffectStructure::ICAR || spec.hazard_effect == EffectStructure::BYM2;
  if (needs_graph && !graph_) throw ConfigError("ICAR and BYM2 effects need a region graph");
  if (spec.time_effect == EffectStructure::BYM2 || spec.hazard_effect == EffectStructure::BYM2) {
    scaling_ = icar_scaling_factor(*graph_);
  }
  if (!spec.overall_survival && !table) throw ConfigError("a life table is required outside overall-survival mode");

  const auto N = static_cast<Eigen::Index>(n);
  x_.resize(N, static_cast<Eigen::Index>(p));
  xt_.resize(N, static_cast<Eigen::Index>(pt));
  s_.resize(N, static_cast<Eigen::Index>(q));
  time_.resize(N);
  log_hp_.resize(N);
  status_.resize(n);
  region_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = data.records[i];
    const auto I = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < p; ++j) x_(I, static_cast<Eigen::Index>(j)) = rec.x[j];
    for (std::size_t j = 0; j < pt; ++j) xt_(I, static_cast<Eigen::Index>(j)) = rec.x[spec.time_columns[j]];
    for (std::size_t j = 0; j < q; ++j) s_(I, static_cast<Eigen::Index>(j)) = rec.s[j];
    time_(I) = rec.time;
    status_[i] = rec.status;
    region_[i] = rec.region;
    double hp = 0.0;
    if (!spec.overall_survival && rec.status == 1) hp = population_hazard(*table, rec, rec.time);
    log_hp_(I) = hp > 0.0 ? std::log(hp) : kNegInf;
  }

  if (q > 0) {
    if (n == 0) throw ConfigError("spline terms need data");
    g_ = spline_g_factor(n, data.events(), q);
    for (const auto& blk : data.splines) {
      const auto cols = s_.middleCols(static_cast<Eigen::Index>(blk.offset), static_cast<Eigen::Index>(blk.size()));
      Eigen::MatrixXd gram = cols.transpose() * cols;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
      const auto& ev = eig.eigenvalues();
      if (!(ev.minCoeff() > 1e-10 * ev.maxCoeff())) {
        throw RankError("spline block '" + blk.name + "' has a singular Gram matrix");
      }
      gram_logdet_.push_back(ev.array().log().sum());
      gram_.push_back(std::move(gram));
    }
  }
}

double Posterior::likelihood_pass(const ParamState& s, ExpandedGrad* g, std::span<double> pointwise) const {
  const auto n = time_.size();
  const Eigen::Map<const Eigen::VectorXd> alpha(s.alpha.data(), static_cast<Eigen::Index>(s.alpha.size()));
  const Eigen::Map<const Eigen::VectorXd> beta(s.beta.data(), static_cast<Eigen::Index>(s.beta.size()));
  const Eigen::Map<const Eigen::VectorXd> gamma(s.gamma.data(), static_cast<Eigen::Index>(s.gamma.size()));
  Eigen::VectorXd lpt = xt_ * alpha;
  Eigen::VectorXd lph = x_ * beta + s_ * gamma;
  const auto& ut = s.time_effect.u;
  const auto& u = s.hazard_effect.u;
  Eigen::VectorXd gt, gh;
  if (g) {
    gt.resize(n);
    gh.resize(n);
    g->theta = {0.0, 0.0, 0.0};
    g->ut.assign(layout_.regions(), 0.0);
    g->u.assign(layout_.regions(), 0.0);
  }
  const std::size_t k = s.theta.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t reg = region_[static_cast<std::size_t>(i)];
    const double lt = lpt(i) + (ut.empty() ? 0.0 : ut[reg]);
    const double lh = lph(i) + (u.empty() ? 0.0 : u[reg]);
    const double t = time_(i);
    double ll = 0.0, dt = 0.0, dh = 0.0;
    if (t > 0.0) {
      const double y = t * std::exp(lt);
      if (!(y > 0.0) || !std::isfinite(y)) {
        throw NumericalError("time-scale argument out of range", static_cast<std::size_t>(i));
      }
      const HazardTerms ht = hazard_terms(s.theta, y);
      const double e = std::exp(lh - lt);
      const double h_cum = ht.cum_h * e;
      ll = -h_cum;
      double w = 0.0;
      if (status_[static_cast<std::size_t>(i)] == 1) {
        const double lhe = ht.log_h + lh;
        const double lsum = log_add_exp(log_hp_(i), lhe);
        ll += lsum;
        w = std::exp(lhe - lsum);
      }
      if (g) {
        dt = w * ht.dlog_h_dlog_t - e * (ht.dcum_h_dlog_t - ht.cum_h);
        dh = w - h_cum;
        for (std::size_t j = 0; j < k; ++j) g->theta[j] += w * ht.dlog_h_dtheta[j] - e * ht.dcum_h_dtheta[j];
      }
    }
    if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood", static_cast<std::size_t>(i));
    if (!pointwise.empty()) pointwise[static_cast<std::size_t>(i)] = ll;
    acc += ll;
    if (g) {
      gt(i) = dt;
      gh(i) = dh;
      g->ut[reg] += dt;
      g->u[reg] += dh;
    }
  }
  if (g) {
    g->alpha = xt_.transpose() * gt;
    g->beta = x_.transpose() * gh;
    g->gamma = s_.transpose() * gh;
  }
  return acc;
}

void Posterior::fold(const ParamState& s, const ExpandedGrad& g, std::span<double> grad) const {
  const auto& L = layout_;
  for (std::size_t j = 0; j < s.theta.size(); ++j) grad[j] += g.theta[j];
  switch (spec().time_coefficients()) {
    case TimeCoefficients::Free:
      for (Eigen::Index j = 0; j < g.alpha.size(); ++j) grad[L.alpha_offset() + static_cast<std::size_t>(j)] += g.alpha(j);
      break;
    case TimeCoefficients::TiedToHazard:
      for (Eigen::Index j = 0; j < g.alpha.size(); ++j) grad[L.beta_offset() + static_cast<std::size_t>(j)] += g.alpha(j);
      break;
    case TimeCoefficients::Zero: break;
  }
  if (spec().hazard_coefficients()) {
    for (Eigen::Index j = 0; j < g.beta.size(); ++j) grad[L.beta_offset() + static_cast<std::size_t>(j)] += g.beta(j);
  }
  for (Eigen::Index j = 0; j < g.gamma.size(); ++j) grad[L.gamma_offset() + static_cast<std::size_t>(j)] += g.gamma(j);

  auto effect = [&](const ParamLayout::EffectSlots& slots, const EffectState& e, const std::vector<double>& gu) {
    const std::size_t r = L.regions();
    switch (slots.kind) {
      case EffectStructure::None: return;
      case EffectStructure::IID:
      case EffectStructure::ICAR:
        for (std::size_t k = 0; k < r; ++k) grad[slots.values + k] += gu[k];
        return;
      case EffectStructure::BYM2: {
        const double a = e.sigma * std::sqrt(1.0 - e.rho), b = e.sigma * std::sqrt(e.rho);
        double dsig = 0.0, drho = 0.0;
        for (std::size_t k = 0; k < r; ++k) {
          grad[slots.values + k] += a * gu[k];
          grad[slots.s_star + k] += b * gu[k];
          dsig += gu[k] * e.u[k];
          drho += gu[k] * 0.5 * e.sigma *
                  (-e.v_star[k] * e.rho * std::sqrt(1.0 - e.rho) + e.s_star[k] * (1.0 - e.rho) * std::sqrt(e.rho));
        }
        grad[slots.hyper] += dsig;
        grad[slots.hyper + 1] += drho;
        return;
      }
    }
  };
  if (spec().shared_effect()) {
    std::vector<double> sum(g.u);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g.ut[k];
    effect(L.hazard_slots(), s.hazard_effect, sum);
  } else {
    effect(L.time_slots(), s.time_effect, g.ut);
    effect(L.hazard_slots(), s.hazard_effect, g.u);
  }
}

double Posterior::log_likelihood(const ParamState& state) const { return likelihood_pass(state, nullptr, {}); }

void Posterior::pointwise(const ParamState& state, std::span<double> out) const {
  if (out.size() != size()) throw DimensionError("pointwise output has the wrong length");
  likelihood_pass(state, nullptr, out);
}

double Posterior::log_prior(std::span<const double> z) const {
  std::vector<double> scratch(dim(), 0.0);
  return log_prior_gradient(z, scratch);
}

double Posterior::log_prior_gradient(std::span<const double> z, std::span<double> grad) const {
  const auto& L = layout_;
  const auto& H = hyper_;
  const ParamState s = L.unpack(z);
  double lp = 0.0;

  // baseline
  switch (spec().family) {
    case Family::LogNormal:
    case Family::LogLogistic: {
      const double mu = s.theta[0], sigma = s.theta[1];
      lp += normal_lpdf(mu, H.mu_var) + half_cauchy_lpdf(sigma, H.tau_sigma) + z[1];
      grad[0] += -mu / H.mu_var;
      grad[1] += half_cauchy_dlog(sigma, H.tau_sigma);
      break;
    }
    default: {
      const double eta = s.theta[0], nu = s.theta[1];
      lp += half_cauchy_lpdf(eta, H.tau_eta) + z[0] + half_cauchy_lpdf(nu, H.tau_nu) + z[1];
      grad[0] += half_cauchy_dlog(eta, H.tau_eta);
      grad[1] += half_cauchy_dlog(nu, H.tau_nu);
      if (s.theta.size() == 3) {
        const double kappa = s.theta[2], a = H.kappa_shape, b = H.kappa_rate;
        lp += a * std::log(b) - std::lgamma(a) + a * z[2] - b * kappa;
        grad[2] += a - b * kappa;
      }
    }
  }

  if (L.alpha_free()) {
    for (std::size_t j = 0; j < s.alpha.size(); ++j) {
      lp += normal_lpdf(s.alpha[j], H.alpha_var);
      grad[L.alpha_offset() + j] += -s.alpha[j] / H.alpha_var;
    }
  }
  if (spec().hazard_coefficients()) {
    for (std::size_t j = 0; j < s.beta.size(); ++j) {
      lp += normal_lpdf(s.beta[j], H.beta_var);
      grad[L.beta_offset() + j] += -s.beta[j] / H.beta_var;
    }
  }

  // spline g-priors
  std::size_t off = 0;
  for (std::size_t b = 0; b < gram_.size(); ++b) {
    const auto qb = static_cast<Eigen::Index>(L.spline_blocks()[b]);
    const Eigen::Map<const Eigen::VectorXd> gam(s.gamma.data() + off, qb);
    const double v = s.spline_var[b];
    const double scale = v * g_;
    const Eigen::VectorXd gg = gram_[b] * gam;
    const double quad = gam.dot(gg);
    const double qd = static_cast<double>(qb);
    lp += -0.5 * qd * std::log(2.0 * special::kPi * scale) + 0.5 * gram_logdet_[b] - 0.5 * quad / scale;
    for (Eigen::Index j = 0; j < qb; ++j) grad[L.gamma_offset() + off + static_cast<std::size_t>(j)] += -gg(j) / scale;
    lp += half_cauchy_lpdf(v, H.tau_sigma_gamma) + z[L.spline_var_offset() + b];
    grad[L.spline_var_offset() + b] += -0.5 * qd + 0.5 * quad / scale + half_cauchy_dlog(v, H.tau_sigma_gamma);
    off += static_cast<std::size_t>(qb);
  }

  // random effects
  const double th = H.theta_tau;
  const double gamma_const = th * std::log(th) - std::lgamma(th);
  auto effect = [&](const ParamLayout::EffectSlots& slots, const EffectState& e) {
    const std::size_t r = L.regions();
    std::span<double> gv(grad.data() + slots.values, r);
    switch (slots.kind) {
      case EffectStructure::None: return;
      case EffectStructure::IID: {
        double dsig = 0.0;
        lp += iid_log_prior(e.u, e.sigma, gv, &dsig);
        grad[slots.hyper] += dsig * e.sigma;
        // tau = sigma^-2 ~ Gamma(th, th), with log|dtau/dz| = log 2 + log tau
        const double tau = 1.0 / (e.sigma * e.sigma);
        lp += gamma_const + th * std::log(tau) - th * tau + std::log(2.0);
        grad[slots.hyper] += -2.0 * th * (1.0 - tau);
        return;
      }
      case EffectStructure::ICAR: {
        double dtau = 0.0;
        lp += icar_log_prior(e.u, *graph_, e.tau, H.sum_to_zero_sd, gv, &dtau);
        grad[slots.hyper] += dtau * e.tau;
        lp += gamma_const + th * z[slots.hyper] - th * e.tau;
        grad[slots.hyper] += th - th * e.tau;
        return;
      }
      case EffectStructure::BYM2: {
        std::span<double> gs(grad.data() + slots.s_star, r);
        lp += bym2_log_prior(e.v_star, e.s_star, *graph_, scaling_, H.sum_to_zero_sd, gv, gs);
        const double sc = H.bym2_sigma_scale;
        lp += std::log(2.0) + special::log_normal_pdf(e.sigma / sc) - std::log(sc) + z[slots.hyper];
        grad[slots.hyper] += 1.0 - e.sigma * e.sigma / (sc * sc);
        const double a = H.bym2_rho_a, b = H.bym2_rho_b;
        const double log_beta_fn = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
        lp += a * std::log(e.rho) + b * std::log1p(-e.rho) - log_beta_fn;
        grad[slots.hyper + 1] += a * (1.0 - e.rho) - b * e.rho;
        return;
      }
    }
  };
  effect(L.time_slots(), s.time_effect);
  effect(L.hazard_slots(), s.hazard_effect);
  return lp;
}

double Posterior::log_density(std::span<const double> z) const {
  const ParamState s = layout_.unpack(z);
  return likelihood_pass(s, nullptr, {}) + log_prior(z);
}

double Posterior::log_density_gradient(std::span<const double> z, std::span<double> grad) const {
  if (grad.size() != dim()) throw DimensionError("gradient buffer has the wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);
  const ParamState s = layout_.unpack(z);
  ExpandedGrad g;
  const double ll = likelihood_pass(s, &g, {});
  fold(s, g, grad);
  return ll + log_prior_gradient(z, grad);
}

}  // namespace rssgh
