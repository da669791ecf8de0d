#include "rssgh/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rssgh/errors.hpp"

namespace rssgh {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void check_inputs(const std::vector<ParamState>& states, const std::vector<double>& times) {
  if (states.empty()) throw DomainError("net survival needs at least one draw");
  if (times.empty()) throw DomainError("net survival needs a non-empty time grid");
  for (double t : times)
    if (!(t >= 0.0)) throw DomainError("net survival times must be non-negative");
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  if (it == x.begin()) return y.front();
  if (it == x.end()) return y.back();
  const auto i = static_cast<std::size_t>(it - x.begin());
  const double w = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + w * (y[i] - y[i - 1]);
}

// qgpd(p; k, sigma)
double pareto_quantile(double p, double k, double sigma) {
  if (k == 0.0) return -sigma * std::log1p(-p);
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

}  // namespace

double sample_quantile(std::vector<double> v, double prob) {
  if (v.empty()) throw DomainError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

NetSurvivalCurve summarize_curve(std::vector<double> times, Eigen::MatrixXd draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level must lie in (0, 1)");
  NetSurvivalCurve c;
  c.times = std::move(times);
  c.draws = std::move(draws);
  c.level = level;
  const double tail = 0.5 * (1.0 - level);
  for (Eigen::Index j = 0; j < c.draws.cols(); ++j) {
    const auto col = c.draws.col(j);
    std::vector<double> v(col.data(), col.data() + col.size());
    c.mean.push_back(col.mean());
    c.lower.push_back(sample_quantile(v, tail));
    c.upper.push_back(sample_quantile(v, 1.0 - tail));
  }
  return c;
}

std::vector<double> default_time_grid(const Dataset& data, std::size_t steps) {
  if (steps == 0) throw DomainError("time grid needs at least one step");
  double tmax = 0.0;
  for (const auto& r : data.records) tmax = std::max(tmax, r.time);
  std::vector<double> g(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) g[i] = tmax * static_cast<double>(i) / static_cast<double>(steps);
  return g;
}

std::vector<ParamState> states_from_draws(const ParamLayout& layout, const Eigen::MatrixXd& unconstrained) {
  if (static_cast<std::size_t>(unconstrained.cols()) != layout.dim())
    throw DimensionError("draw columns differ from the parameter dimension");
  std::vector<ParamState> out;
  out.reserve(static_cast<std::size_t>(unconstrained.rows()));
  std::vector<double> row(layout.dim());
  for (Eigen::Index i = 0; i < unconstrained.rows(); ++i) {
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = unconstrained(i, static_cast<Eigen::Index>(k));
    out.push_back(layout.unpack(row));
  }
  return out;
}

Eigen::MatrixXd average_net_survival(const std::vector<ParamState>& states, const ModelSpec& spec,
                                     std::span<const PatientRecord* const> records, const std::vector<double>& times) {
  check_inputs(states, times);
  if (records.empty()) throw DomainError("net survival needs at least one record");
  const auto nt = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states.size()), nt);
  const double inv_n = 1.0 / static_cast<double>(records.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto& st = states[s];
    for (const PatientRecord* r : records) {
      const auto lp = linear_predictors(st, spec, *r);
      const double scale = std::exp(lp.time), mult = std::exp(lp.hazard - lp.time);
      for (Eigen::Index j = 0; j < nt; ++j) {
        const double t = times[static_cast<std::size_t>(j)];
        const double h = t > 0.0 ? cum_hazard(st.theta, t * scale) * mult : 0.0;
        out(static_cast<Eigen::Index>(s), j) += std::exp(-h) * inv_n;
      }
    }
  }
  return out;
}

NetSurvivalCurve net_survival_individual(const std::vector<ParamState>& states, const ModelSpec& spec,
                                         const PatientRecord& rec, const std::vector<double>& times, double level) {
  const PatientRecord* one[] = {&rec};
  return summarize_curve(times, average_net_survival(states, spec, one, times), level);
}

NetSurvivalCurve net_survival_region(const std::vector<ParamState>& states, const ModelSpec& spec,
                                     const Dataset& data, std::size_t region, const std::vector<double>& times,
                                     double level) {
  std::vector<const PatientRecord*> recs;
  for (const auto& r : data.records)
    if (r.region == region) recs.push_back(&r);
  if (recs.empty()) throw DomainError("region " + std::to_string(region + 1) + " has no records");
  return summarize_curve(times, average_net_survival(states, spec, recs, times), level);
}

NetSurvivalCurve net_survival_marginal(const std::vector<ParamState>& states, const ModelSpec& spec,
                                       std::span<const PatientRecord> records, const std::vector<double>& times,
                                       double level) {
  std::vector<const PatientRecord*> recs;
  for (const auto& r : records) recs.push_back(&r);
  return summarize_curve(times, average_net_survival(states, spec, recs, times), level);
}

std::vector<double> exceedance_probability(const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
                                           const std::string& selector, double c) {
  if (static_cast<std::size_t>(draws.cols()) != names.size())
    throw DimensionError("draw columns differ from the parameter names");
  std::vector<double> out;
  for (std::size_t k = 1;; ++k) {
    const auto it = std::find(names.begin(), names.end(), selector + "[" + std::to_string(k) + "]");
    if (it == names.end()) break;
    const auto col = draws.col(it - names.begin());
    const auto above = (col.array() > c).count();
    out.push_back(draws.rows() ? static_cast<double>(above) / static_cast<double>(draws.rows()) : 0.0);
  }
  if (out.empty()) throw LookupError("no effect columns named " + selector + "[k]");
  return out;
}

double error_integral(const std::vector<double>& times, const std::vector<double>& f, const std::vector<double>& g,
                      double t1, double t2) {
  if (times.size() != f.size() || times.size() != g.size()) throw DimensionError("error integral: grid sizes differ");
  if (times.size() < 2) throw DomainError("error integral: need at least two grid points");
  if (!std::is_sorted(times.begin(), times.end())) throw DomainError("error integral: grid must be increasing");
  if (!(t1 < t2) || t1 < times.front() || t2 > times.back())
    throw DomainError("error integral: interval must lie inside the grid");
  std::vector<double> x = {t1}, d = {std::abs(interpolate(times, f, t1) - interpolate(times, g, t1))};
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] > t1 && times[i] < t2) {
      x.push_back(times[i]);
      d.push_back(std::abs(f[i] - g[i]));
    }
  }
  x.push_back(t2);
  d.push_back(std::abs(interpolate(times, f, t2) - interpolate(times, g, t2)));
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (d[i] + d[i - 1]);
  return s;
}

Eigen::MatrixXd pointwise_loglik(const Posterior& posterior, const std::vector<ParamState>& states) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(posterior.size()));
  std::vector<double> row(posterior.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    posterior.pointwise(states[s], row);
    for (std::size_t i = 0; i < row.size(); ++i) out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = row[i];
  }
  return out;
}

ParetoFit fit_generalized_pareto(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("generalized Pareto fit needs at least two exceedances");
  const double nd = static_cast<double>(n);
  constexpr double prior = 3.0;
  const std::size_t m = 30 + static_cast<std::size_t>(std::floor(std::sqrt(nd)));
  const double xstar = x[static_cast<std::size_t>(std::floor(nd / 4.0 + 0.5)) - 1];
  std::vector<double> theta(m), lik(m);
  for (std::size_t j = 0; j < m; ++j) {
    theta[j] = 1.0 / x[n - 1] +
               (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j + 1) - 0.5))) / prior / xstar;
    const double a = -theta[j];
    double k = 0.0;
    for (double v : x) k += std::log1p(a * v);
    k /= nd;
    lik[j] = nd * (std::log(a / k) - k - 1.0);
  }
  const double norm = log_sum_exp(lik);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(lik[j] - norm);
  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  k /= nd;
  ParetoFit fit;
  fit.sigma = -k / theta_hat;
  fit.k = (nd * k + 10.0 * 0.5) / (nd + 10.0);
  if (!std::isfinite(fit.k)) fit.k = kInf;
  return fit;
}

PsisResult psis(std::span<const double> log_ratios) {
  const std::size_t s = log_ratios.size();
  PsisResult out;
  out.log_weights.assign(log_ratios.begin(), log_ratios.end());
  double mx = -kInf;
  for (double v : log_ratios) mx = std::max(mx, v);
  for (auto& v : out.log_weights) v -= mx;
  out.khat = kInf;
  const double sd = static_cast<double>(s);
  const auto tail = static_cast<std::size_t>(std::ceil(std::min(0.2 * sd, 3.0 * std::sqrt(sd))));
  if (tail >= 5 && tail < s) {
    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.log_weights[a] < out.log_weights[b]; });
    const std::size_t first = s - tail;
    const double lo = out.log_weights[order[first]], hi = out.log_weights[order[s - 1]];
    if (std::abs(hi - lo) < std::numeric_limits<double>::epsilon() / 100.0) {
      out.khat = -kInf;
    } else {
      const double cutoff = out.log_weights[order[first - 1]];
      const double exp_cut = std::exp(cutoff);
      std::vector<double> exceed(tail);
      for (std::size_t j = 0; j < tail; ++j) exceed[j] = std::exp(out.log_weights[order[first + j]]) - exp_cut;
      const auto fit = fit_generalized_pareto(exceed);
      out.khat = fit.k;
      if (std::isfinite(fit.k)) {
        for (std::size_t j = 0; j < tail; ++j) {
          const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail);
          out.log_weights[order[first + j]] = std::log(pareto_quantile(p, fit.k, fit.sigma) + exp_cut);
        }
      }
    }
  }
  // cap at the largest raw ratio
  for (auto& v : out.log_weights) v = std::min(v, 0.0);
  const double norm = log_sum_exp(out.log_weights);
  for (auto& v : out.log_weights) v -= norm;
  return out;
}

std::size_t LooResult::count_khat_above(double threshold) const {
  return static_cast<std::size_t>(std::count_if(khat.begin(), khat.end(), [&](double k) { return k > threshold; }));
}

LooResult psis_loo(const Eigen::MatrixXd& loglik) {
  const auto s = loglik.rows(), n = loglik.cols();
  if (s < 100) throw DomainError("PSIS-LOO needs at least 100 draws");
  if (n < 1) throw DomainError("PSIS-LOO needs at least one observation");
  LooResult out;
  std::vector<double> ratios(static_cast<std::size_t>(s)), terms(static_cast<std::size_t>(s));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < s; ++d) ratios[static_cast<std::size_t>(d)] = -loglik(d, i);
    const auto w = psis(ratios);
    for (Eigen::Index d = 0; d < s; ++d)
      terms[static_cast<std::size_t>(d)] = w.log_weights[static_cast<std::size_t>(d)] + loglik(d, i);
    out.pointwise.push_back(log_sum_exp(terms));
    out.khat.push_back(w.khat);
  }
  const double nd = static_cast<double>(n);
  out.elpd = std::accumulate(out.pointwise.begin(), out.pointwise.end(), 0.0);
  const double mean = out.elpd / nd;
  double var = 0.0;
  for (double v : out.pointwise) var += (v - mean) * (v - mean);
  var = n > 1 ? var / (nd - 1.0) : 0.0;
  out.se = std::sqrt(nd * var);
  return out;
}

ComparisonReport compare_models(const std::vector<std::string>& names, const std::vector<LooResult>& results) {
  if (names.size() != results.size()) throw DimensionError("compare: one name per result");
  if (results.empty()) throw DomainError("compare: no models");
  for (const auto& r : results)
    if (r.pointwise.size() != results[0].pointwise.size())
      throw DimensionError("compare: models were fit to different numbers of observations");
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return results[a].elpd > results[b].elpd; });
  const auto& best = results[order[0]];
  const double nd = static_cast<double>(best.pointwise.size());
  ComparisonReport rep;
  for (std::size_t idx : order) {
    const auto& r = results[idx];
    ComparisonRow row{names[idx], r.elpd, r.se, r.elpd - best.elpd, 0.0};
    if (idx != order[0] && best.pointwise.size() > 1) {
      std::vector<double> d(best.pointwise.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = r.pointwise[i] - best.pointwise[i];
      const double m = std::accumulate(d.begin(), d.end(), 0.0) / nd;
      double var = 0.0;
      for (double v : d) var += (v - m) * (v - m);
      row.se_diff = std::sqrt(nd * var / (nd - 1.0));
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace rssgh
