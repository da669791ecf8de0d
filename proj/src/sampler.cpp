#include "rssgh/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include "rssgh/errors.hpp"
#include "rssgh/excess.hpp"

namespace rssgh {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Hoffman & Gelman dual averaging on log step size.
struct DualAveraging {
  double mu = 0.0, h_bar = 0.0, log_eps_bar = 0.0;
  double delta = 0.8;
  std::size_t m = 0;
  static constexpr double kGamma = 0.05, kT0 = 10.0, kKappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    h_bar = 0.0;
    log_eps_bar = 0.0;
    m = 0;
  }
  double update(double accept) {
    ++m;
    const double md = static_cast<double>(m);
    h_bar = (1.0 - 1.0 / (md + kT0)) * h_bar + (delta - accept) / (md + kT0);
    const double log_eps = mu - std::sqrt(md) / kGamma * h_bar;
    const double w = std::pow(md, -kKappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }
  double final_step() const { return std::exp(log_eps_bar); }
};

class Chain {
 public:
  Chain(const Target& target, const SamplerConfig& config, std::uint64_t seed)
      : target_(target), cfg_(config), rng_(seed), inv_mass_(target.dim, 1.0) {}

  ChainDraws run();

 private:
  bool evaluate(LeapfrogState& s) const;
  void initialize();
  double reasonable_step(double eps);
  bool transition(double eps, double& accept);

  const Target& target_;
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<double> inv_mass_;
  LeapfrogState cur_;
};

bool Chain::evaluate(LeapfrogState& s) const {
  s.grad.assign(target_.dim, 0.0);
  try {
    s.log_density = target_.log_density_gradient(s.z, s.grad);
  } catch (const NumericalError&) {
    return false;
  } catch (const DomainError&) {
    return false;
  }
  return std::isfinite(s.log_density) && all_finite(s.grad);
}

void Chain::initialize() {
  if (!target_.init_scale.empty() && target_.init_scale.size() != target_.dim)
    throw DimensionError("init scale has the wrong length");
  std::uniform_real_distribution<double> unif(-cfg_.init_radius, cfg_.init_radius);
  cur_.z.resize(target_.dim);
  cur_.p.assign(target_.dim, 0.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (std::size_t k = 0; k < target_.dim; ++k) {
      cur_.z[k] = unif(rng_);
      if (!target_.init_scale.empty()) cur_.z[k] *= target_.init_scale[k];
    }
    if (evaluate(cur_)) return;
  }
  throw NumericalError("no initial point with finite log-density and gradient after 100 attempts");
}

double Chain::reasonable_step(double eps) {
  std::normal_distribution<double> norm;
  auto log_accept = [&](double e) {
    LeapfrogState s = cur_;
    for (std::size_t k = 0; k < s.p.size(); ++k) s.p[k] = norm(rng_) / std::sqrt(inv_mass_[k]);
    const double h0 = hamiltonian(s, inv_mass_);
    bool ok = false;
    try {
      ok = leapfrog(target_, s, e, inv_mass_, 1);
    } catch (const NumericalError&) {
    } catch (const DomainError&) {
    }
    const double h1 = ok ? hamiltonian(s, inv_mass_) : kInf;
    return std::isfinite(h1) ? h0 - h1 : -kInf;
  };
  const double la = log_accept(eps);
  const double dir = la > std::log(0.5) ? 1.0 : -1.0;
  for (int it = 0; it < 60; ++it) {
    const double next = eps * std::pow(2.0, dir);
    const double ln = log_accept(next);
    if (dir > 0 ? !(ln > std::log(0.5)) : ln > std::log(0.5)) return dir > 0 ? eps : next;
    eps = next;
  }
  return eps;
}

bool Chain::transition(double eps, double& accept) {
  std::normal_distribution<double> norm;
  std::uniform_int_distribution<std::size_t> steps(1, cfg_.max_steps);
  std::uniform_real_distribution<double> unif;
  LeapfrogState prop = cur_;
  for (std::size_t k = 0; k < prop.p.size(); ++k) prop.p[k] = norm(rng_) / std::sqrt(inv_mass_[k]);
  const double h0 = hamiltonian(prop, inv_mass_);
  const std::size_t n = steps(rng_);
  bool ok = false;
  try {
    ok = leapfrog(target_, prop, eps, inv_mass_, n);
  } catch (const NumericalError&) {
  } catch (const DomainError&) {
  }
  const double dh = ok ? hamiltonian(prop, inv_mass_) - h0 : kInf;
  const bool divergent = !std::isfinite(dh) || dh > cfg_.max_energy_error;
  accept = divergent ? 0.0 : std::min(1.0, std::exp(-dh));
  const double u = unif(rng_);
  if (!divergent && u < accept) cur_ = std::move(prop);
  return divergent;
}

ChainDraws Chain::run() {
  ChainDraws out;
  const std::size_t total = cfg_.iterations, warm = cfg_.warmup;
  const std::size_t kept = total - warm;
  const std::size_t cdim = target_.names.empty() ? target_.dim : target_.names.size();
  out.draws.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(cdim));
  out.unconstrained.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(target_.dim));
  if (total == 0) {
    out.inv_mass = inv_mass_;
    return out;
  }
  initialize();

  // Windows: [0, w1) step size; [w1, w2) step size + variance; [w2, warm) step size.
  const bool mass = warm >= 20;
  const std::size_t w1 = mass ? warm * 15 / 100 : warm;
  const std::size_t w2 = mass ? warm - warm / 10 : warm;
  std::vector<double> mean(target_.dim, 0.0), m2(target_.dim, 0.0);
  std::size_t count = 0;

  DualAveraging da;
  da.delta = cfg_.target_accept;
  double eps = warm > 0 ? reasonable_step(1.0) : 1.0;
  da.restart(eps);

  for (std::size_t it = 0; it < total; ++it) {
    double accept = 0.0;
    const bool divergent = transition(eps, accept);
    out.step_sizes.push_back(eps);
    if (it < warm) {
      out.warmup_divergences += divergent;
      eps = da.update(accept);
      if (it >= w1 && it < w2) {
        ++count;
        for (std::size_t k = 0; k < target_.dim; ++k) {
          const double d = cur_.z[k] - mean[k];
          mean[k] += d / static_cast<double>(count);
          m2[k] += d * (cur_.z[k] - mean[k]);
        }
      }
      if (mass && it + 1 == w2 && count > 2) {
        const double n = static_cast<double>(count);
        for (std::size_t k = 0; k < target_.dim; ++k) {
          const double var = m2[k] / (n - 1.0);
          inv_mass_[k] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
        }
        eps = reasonable_step(eps);
        da.restart(eps);
      }
      if (it + 1 == warm) {
        if (2 * out.warmup_divergences > warm) {
          std::ostringstream msg;
          msg << "persistent divergence: " << out.warmup_divergences << " of " << warm
              << " warmup transitions diverged; final step size " << eps;
          throw ConvergenceError(msg.str());
        }
        eps = da.final_step();
      }
      continue;
    }
    const auto row = static_cast<Eigen::Index>(it - warm);
    out.divergences += divergent;
    out.divergent.push_back(divergent);
    out.accept_stat.push_back(accept);
    out.log_density.push_back(cur_.log_density);
    const auto c = target_.constrained(cur_.z);
    if (!all_finite(c)) throw NumericalError("non-finite value in a kept draw");
    for (std::size_t k = 0; k < cdim; ++k) out.draws(row, static_cast<Eigen::Index>(k)) = c[k];
    const auto z = target_.recorded(cur_.z);
    for (std::size_t k = 0; k < target_.dim; ++k) out.unconstrained(row, static_cast<Eigen::Index>(k)) = z[k];
  }
  out.step_size = eps;
  out.inv_mass = inv_mass_;
  return out;
}

std::vector<std::vector<double>> split(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

std::vector<double> Target::constrained(std::span<const double> z) const {
  if (constrain) return constrain(z);
  return {z.begin(), z.end()};
}

std::vector<double> Target::recorded(std::span<const double> z) const {
  if (position) return position(z);
  return {z.begin(), z.end()};
}

namespace {

struct BlockMap {
  std::size_t offset;
  Eigen::MatrixXd basis;  ///< model block = basis * sampling block
};

struct Reparam {
  std::vector<BlockMap> blocks;

  std::vector<double> to_model(std::span<const double> w) const {
    std::vector<double> z(w.begin(), w.end());
    for (const auto& b : blocks) {
      const auto r = b.basis.rows();
      Eigen::Map<const Eigen::VectorXd> src(w.data() + b.offset, r);
      Eigen::Map<Eigen::VectorXd>(z.data() + b.offset, r) = b.basis * src;
    }
    return z;
  }
  void to_sampling_gradient(std::span<double> g) const {
    for (const auto& b : blocks) {
      Eigen::Map<Eigen::VectorXd> dst(g.data() + b.offset, b.basis.rows());
      const Eigen::VectorXd gz = dst;
      dst = b.basis.transpose() * gz;
    }
  }
};

}  // namespace

Target make_target(const Posterior& posterior) {
  auto map = std::make_shared<Reparam>();
  if (const auto* graph = posterior.graph()) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(graph->laplacian());
    const auto r = static_cast<Eigen::Index>(graph->size());
    Eigen::MatrixXd basis(r, r);
    basis.leftCols(r - 1) = eig.eigenvectors().rightCols(r - 1);
    basis.col(r - 1).setConstant(posterior.hyper().sum_to_zero_sd);
    const auto& layout = posterior.layout();
    for (const auto* slots : {&layout.time_slots(), &layout.hazard_slots()}) {
      if (slots->kind == EffectStructure::ICAR) map->blocks.push_back({slots->values, basis});
      if (slots->kind == EffectStructure::BYM2) map->blocks.push_back({slots->s_star, basis});
    }
  }
  Target t;
  t.dim = posterior.dim();
  t.names = posterior.layout().constrained_names();
  const auto& layout = posterior.layout();
  for (const auto* slots : {&layout.time_slots(), &layout.hazard_slots()}) {
    if (slots->kind != EffectStructure::BYM2) continue;
    if (t.init_scale.empty()) t.init_scale.assign(t.dim, 1.0);
    for (std::size_t k = 0; k < layout.regions(); ++k) {
      t.init_scale[slots->values + k] = 0.1;
      t.init_scale[slots->s_star + k] = 0.1;
    }
  }
  if (map->blocks.empty()) {
    t.log_density_gradient = [&posterior](std::span<const double> z, std::span<double> g) {
      return posterior.log_density_gradient(z, g);
    };
    t.constrain = [&posterior](std::span<const double> z) { return posterior.layout().constrained(z); };
    return t;
  }
  t.log_density_gradient = [&posterior, map](std::span<const double> w, std::span<double> g) {
    const auto z = map->to_model(w);
    const double lp = posterior.log_density_gradient(z, g);
    map->to_sampling_gradient(g);
    return lp;
  };
  t.constrain = [&posterior, map](std::span<const double> w) {
    return posterior.layout().constrained(map->to_model(w));
  };
  t.position = [map](std::span<const double> w) { return map->to_model(w); };
  return t;
}

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("sampler: chains must be at least 1");
  if (iterations > 0 && warmup >= iterations) throw ConfigError("sampler: warmup must be less than iterations");
  if (iterations == 0 && warmup != 0) throw ConfigError("sampler: warmup must be 0 when iterations is 0");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("sampler: target acceptance must lie in (0, 1)");
  if (max_steps < 1) throw ConfigError("sampler: max leapfrog steps must be at least 1");
  if (!(init_radius > 0.0)) throw ConfigError("sampler: init radius must be positive");
}

double ChainDraws::mean_accept() const {
  return accept_stat.empty() ? 0.0 : mean_of(accept_stat);
}

double Diagnostics::max_rhat() const {
  double m = 1.0;
  for (double r : rhat) m = std::max(m, r);
  return m;
}

double Diagnostics::min_ess() const {
  double m = kInf;
  for (double e : ess)
    if (!std::isnan(e)) m = std::min(m, e);
  return m;
}

Eigen::MatrixXd SampleResult::pooled() const {
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.draws.rows();
  Eigen::MatrixXd out(rows, chains.empty() ? 0 : chains[0].draws.cols());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.draws.rows()) = c.draws;
    r += c.draws.rows();
  }
  return out;
}

Eigen::MatrixXd SampleResult::pooled_unconstrained() const {
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.unconstrained.rows();
  Eigen::MatrixXd out(rows, chains.empty() ? 0 : chains[0].unconstrained.cols());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.unconstrained.rows()) = c.unconstrained;
    r += c.unconstrained.rows();
  }
  return out;
}

std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
  return splitmix64(splitmix64(seed) ^ (0x632be59bd9b4e019ULL * (chain + 1)));
}

double hamiltonian(const LeapfrogState& s, std::span<const double> inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < s.p.size(); ++i) k += s.p[i] * s.p[i] * inv_mass[i];
  return -s.log_density + 0.5 * k;
}

bool leapfrog(const Target& target, LeapfrogState& s, double eps, std::span<const double> inv_mass,
              std::size_t steps) {
  const std::size_t d = s.z.size();
  for (std::size_t l = 0; l < steps; ++l) {
    for (std::size_t k = 0; k < d; ++k) s.p[k] += 0.5 * eps * s.grad[k];
    for (std::size_t k = 0; k < d; ++k) s.z[k] += eps * inv_mass[k] * s.p[k];
    std::fill(s.grad.begin(), s.grad.end(), 0.0);
    s.log_density = target.log_density_gradient(s.z, s.grad);
    if (!std::isfinite(s.log_density) || !all_finite(s.grad)) return false;
    for (std::size_t k = 0; k < d; ++k) s.p[k] += 0.5 * eps * s.grad[k];
  }
  return true;
}

ChainDraws run_chain(const Target& target, const SamplerConfig& config, std::uint64_t seed) {
  config.validate();
  return Chain(target, config, seed).run();
}

SampleResult run_chains(const Target& target, const SamplerConfig& config) {
  config.validate();
  const std::size_t n = config.chains;
  std::size_t threads = config.threads;
  if (threads == 0) threads = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);

  SampleResult result;
  result.chains.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < n; c = next++) {
      try {
        result.chains[c] = Chain(target, config, chain_seed(config.seed, c)).run();
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (!errors[c]) continue;
    const std::string prefix = "chain " + std::to_string(c) + ": ";
    try {
      std::rethrow_exception(errors[c]);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(prefix + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(prefix + e.what(), e.record());
    } catch (const ConfigError& e) {
      throw ConfigError(prefix + e.what());
    }
  }
  const auto names = target.names.empty() ? std::vector<std::string>(target.dim) : target.names;
  result.diagnostics = diagnose(result.chains, names);
  return result;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  const auto halves = split(chains);
  if (halves.empty() || halves[0].size() < 2) return kInf;
  const double n = static_cast<double>(halves[0].size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    w += variance_of(h, means.back());
  }
  w /= static_cast<double>(halves.size());
  if (!(w > 0.0)) return kInf;
  const double b_over_n = halves.size() > 1 ? variance_of(means, mean_of(means)) : 0.0;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::max(1.0, std::sqrt(var_plus / w));
}

double ess(const std::vector<std::vector<double>>& chains) {
  const auto halves = split(chains);
  if (halves.empty() || halves[0].size() < 4) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t m = halves.size(), n = halves[0].size();
  const double nd = static_cast<double>(n);
  std::vector<double> means(m);
  for (std::size_t c = 0; c < m; ++c) means[c] = mean_of(halves[c]);
  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double a = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) a += (halves[c][i] - means[c]) * (halves[c][i + lag] - means[c]);
      s += a / nd;
    }
    return s / static_cast<double>(m);
  };
  const double acov0 = mean_acov(0);
  const double mean_var = acov0 * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += variance_of(means, mean_of(means));
  if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  auto rho = [&](std::size_t lag) { return lag == 0 ? 1.0 : 1.0 - (mean_var - mean_acov(lag)) / var_plus; };

  // Geyer initial positive, monotone sequence of paired sums.
  double tau = -1.0, prev = kInf;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pk = rho(2 * k) + rho(2 * k + 1);
    if (!(pk > 0.0)) break;
    pk = std::min(pk, prev);
    tau += 2.0 * pk;
    prev = pk;
  }
  const double total = static_cast<double>(m) * nd;
  tau = std::max(tau, 1.0 / std::log10(total));
  return std::min(total / tau, total * std::log10(total));
}

Diagnostics diagnose(const std::vector<ChainDraws>& chains, const std::vector<std::string>& names) {
  Diagnostics d;
  d.names = names;
  for (const auto& c : chains) d.divergences.push_back(c.divergences);
  if (chains.empty()) return d;
  const auto cols = static_cast<std::size_t>(chains[0].draws.cols());
  for (std::size_t k = 0; k < cols; ++k) {
    std::vector<std::vector<double>> per;
    for (const auto& c : chains) {
      const auto col = c.draws.col(static_cast<Eigen::Index>(k));
      per.emplace_back(col.data(), col.data() + col.size());
    }
    d.rhat.push_back(split_rhat(per));
    d.ess.push_back(ess(per));
  }
  return d;
}

}  // namespace rssgh
