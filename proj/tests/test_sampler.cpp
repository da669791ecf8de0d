#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "rssgh/errors.hpp"
#include "rssgh/excess.hpp"
#include "rssgh/sampler.hpp"

using namespace rssgh;

namespace {

Target normal_target(std::size_t d, std::vector<double> sd = {}) {
  if (sd.empty()) sd.assign(d, 1.0);
  Target t;
  t.dim = d;
  t.log_density_gradient = [sd](std::span<const double> z, std::span<double> g) {
    double lp = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double v = sd[k] * sd[k];
      lp -= 0.5 * z[k] * z[k] / v;
      g[k] = -z[k] / v;
    }
    return lp;
  };
  return t;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index k) {
  return {m.col(k).data(), m.col(k).data() + m.rows()};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

SamplerConfig small_config(std::size_t chains, std::size_t iters, std::size_t warm, std::uint64_t seed = 42) {
  SamplerConfig c;
  c.chains = chains;
  c.iterations = iters;
  c.warmup = warm;
  c.seed = seed;
  c.threads = 1;
  return c;
}

std::vector<std::vector<double>> ar1_chains(std::size_t m, std::size_t n, double phi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm;
  std::vector<std::vector<double>> out(m);
  for (auto& c : out) {
    double x = norm(rng) / std::sqrt(1 - phi * phi);
    for (std::size_t i = 0; i < n; ++i) {
      x = phi * x + norm(rng);
      c.push_back(x);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("standard normal in 5 dimensions") {
  const auto t = normal_target(5);
  const auto draws = run_chain(t, small_config(1, 5000, 1000), 7);
  REQUIRE(draws.size() == 4000);
  for (Eigen::Index k = 0; k < 5; ++k) {
    const auto x = column(draws.draws, k);
    const double e = ess({x});
    CAPTURE(k);
    CAPTURE(e);
    CHECK(std::abs(mean(x)) < 4.0 / std::sqrt(e));
    CHECK(std::abs(variance(x) - 1.0) < 0.1);
  }
  CHECK(draws.mean_accept() > 0.6);
}

TEST_CASE("gamma marginals through a log transform") {
  // z = log x with x ~ Gamma(a, b): log p(z) = a z - b e^z
  const std::vector<double> a = {0.7, 3.0}, b = {2.0, 0.5};
  Target t;
  t.dim = 2;
  t.log_density_gradient = [&](std::span<const double> z, std::span<double> g) {
    double lp = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      lp += a[k] * z[k] - b[k] * std::exp(z[k]);
      g[k] = a[k] - b[k] * std::exp(z[k]);
    }
    return lp;
  };
  t.constrain = [](std::span<const double> z) { return std::vector<double>{std::exp(z[0]), std::exp(z[1])}; };
  t.names = {"x0", "x1"};
  const auto res = run_chains(t, small_config(2, 3000, 1000, 3));
  const auto pooled = res.pooled();
  for (Eigen::Index k = 0; k < 2; ++k) {
    std::vector<std::vector<double>> per;
    for (const auto& c : res.chains) per.push_back(column(c.draws, k));
    const auto x = column(pooled, k);
    const double want = a[static_cast<std::size_t>(k)] / b[static_cast<std::size_t>(k)];
    const double sd = std::sqrt(a[static_cast<std::size_t>(k)]) / b[static_cast<std::size_t>(k)];
    CAPTURE(k);
    CHECK(std::abs(mean(x) - want) < 4.0 * sd / std::sqrt(ess(per)));
  }
}

TEST_CASE("zero iterations returns empty draws") {
  const auto d = run_chain(normal_target(3), small_config(1, 0, 0), 1);
  CHECK(d.size() == 0);
  CHECK(d.draws.cols() == 3);
  const auto r = run_chains(normal_target(3), small_config(2, 0, 0));
  CHECK(r.chains.size() == 2);
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(small_config(0, 10, 5).validate(), ConfigError);
  CHECK_THROWS_AS(small_config(1, 10, 10).validate(), ConfigError);
  auto c = small_config(1, 10, 5);
  c.target_accept = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("determinism and seed dependence") {
  const auto t = normal_target(3, {1.0, 2.0, 0.5});
  auto cfg = small_config(3, 400, 200, 11);
  const auto a = run_chains(t, cfg);
  const auto b = run_chains(t, cfg);
  cfg.threads = 3;
  const auto c = run_chains(t, cfg);
  cfg.seed = 12;
  const auto d = run_chains(t, cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.chains[k].draws == b.chains[k].draws);
    CHECK(a.chains[k].draws == c.chains[k].draws);
    CHECK(a.chains[k].draws != d.chains[k].draws);
  }
  CHECK(a.chains[0].draws != a.chains[1].draws);
  CHECK(chain_seed(1, 0) != chain_seed(1, 1));
  CHECK(chain_seed(1, 0) != chain_seed(2, 0));
}

TEST_CASE("four chains on the 5-dimensional normal mix") {
  const auto res = run_chains(normal_target(5), small_config(4, 2000, 1000, 5));
  REQUIRE(res.diagnostics.rhat.size() == 5);
  for (double r : res.diagnostics.rhat) CHECK(r < 1.01);
  CHECK(res.pooled().rows() == 4000);
}

TEST_CASE("kept draws pass a Kolmogorov-Smirnov test on a 1-d normal") {
  const auto d = run_chain(normal_target(1, {2.0}), small_config(1, 5000, 1000), 99);
  auto x = column(d.draws, 0);
  std::sort(x.begin(), x.end());
  const boost::math::normal_distribution<double> dist(0.0, 2.0);
  const double n = static_cast<double>(x.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = boost::math::cdf(dist, x[i]);
    stat = std::max({stat, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  // asymptotic Kolmogorov critical value at alpha = 0.01
  CHECK(stat < 1.6276 / std::sqrt(n));
}

TEST_CASE("leapfrog is time reversible") {
  Target t;
  t.dim = 2;
  t.log_density_gradient = [](std::span<const double> z, std::span<double> g) {
    const double b = z[1] - z[0] * z[0];
    g[0] = -z[0] + 2.0 * z[0] * b;
    g[1] = -b;
    return -0.5 * z[0] * z[0] - 0.5 * b * b;
  };
  LeapfrogState s;
  s.z = {0.3, -0.4};
  s.p = {0.7, 1.1};
  s.grad.assign(2, 0.0);
  s.log_density = t.log_density_gradient(s.z, s.grad);
  const auto start = s;
  const std::vector<double> inv_mass = {1.0, 0.5};
  REQUIRE(leapfrog(t, s, 0.05, inv_mass, 25));
  for (auto& p : s.p) p = -p;
  REQUIRE(leapfrog(t, s, 0.05, inv_mass, 25));
  CHECK(std::abs(s.z[0] - start.z[0]) < 1e-10);
  CHECK(std::abs(s.z[1] - start.z[1]) < 1e-10);
  CHECK(std::abs(s.p[0] + start.p[0]) < 1e-10);
  CHECK(std::abs(s.p[1] + start.p[1]) < 1e-10);
}

TEST_CASE("energy error shrinks at second order in the step size") {
  const auto t = normal_target(2, {1.0, 0.6});
  const std::vector<double> inv_mass = {1.0, 1.0};
  auto energy_error = [&](double eps) {
    LeapfrogState s;
    s.z = {0.8, -0.5};
    s.p = {-0.3, 1.2};
    s.grad.assign(2, 0.0);
    s.log_density = t.log_density_gradient(s.z, s.grad);
    const double h0 = hamiltonian(s, inv_mass);
    leapfrog(t, s, eps, inv_mass, static_cast<std::size_t>(std::lround(1.3 / eps)));
    return std::abs(hamiltonian(s, inv_mass) - h0);
  };
  const double e1 = energy_error(0.1), e2 = energy_error(0.05), e3 = energy_error(0.025);
  CHECK(e2 < e1);
  CHECK(e3 < e2);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.15));
  CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("step size is frozen after warmup") {
  const auto d = run_chain(normal_target(4, {1, 3, 0.3, 1}), small_config(1, 600, 300), 8);
  REQUIRE(d.step_sizes.size() == 600);
  for (std::size_t i = 300; i < 600; ++i) CHECK(d.step_sizes[i] == d.step_size);
  // mass matrix picked up the scales
  CHECK(d.inv_mass[1] > 4.0 * d.inv_mass[0]);
  CHECK(d.inv_mass[2] < 0.25 * d.inv_mass[0]);
}

TEST_CASE("persistent divergence aborts with the chain index") {
  Target t;
  t.dim = 1;
  auto calls = std::make_shared<int>(0);
  t.log_density_gradient = [calls](std::span<const double> z, std::span<double> g) {
    g[0] = -z[0];
    return (*calls)++ == 0 ? -0.5 * z[0] * z[0] : std::nan("");
  };
  CHECK_THROWS_AS(run_chain(t, small_config(1, 100, 50), 1), ConvergenceError);
  *calls = 0;
  try {
    run_chains(t, small_config(1, 100, 50));
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(std::string(e.what()).find("chain 0") == 0);
  }
}

TEST_CASE("split R-hat and ESS") {
  CHECK(std::isinf(split_rhat({std::vector<double>(100, 2.0), std::vector<double>(100, 2.0)})));
  const auto iid = ar1_chains(4, 1000, 0.0, 1);
  const double r = split_rhat(iid);
  CHECK(r >= 1.0);
  CHECK(r < 1.01);
  CHECK(ess(iid) == doctest::Approx(4000.0).epsilon(0.15));
  // AR(1): ESS = n (1 - phi) / (1 + phi)
  const auto ar = ar1_chains(4, 5000, 0.9, 2);
  CHECK(ess(ar) == doctest::Approx(20000.0 * 0.1 / 1.9).epsilon(0.25));
  // repeated runs of one value
  std::vector<double> runs;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> norm;
  for (int b = 0; b < 40; ++b) runs.insert(runs.end(), 50, norm(rng));
  CHECK(ess({runs}) < 200.0);
  // shifted chains are flagged
  auto shifted = iid;
  for (auto& x : shifted[0]) x += 1.0;
  CHECK(split_rhat(shifted) > 1.05);
}

TEST_CASE("sampling a model posterior") {
  std::mt19937_64 rng(2);
  const auto graph = testing::england_graph();
  const auto data = testing::random_dataset(150, 2, 9, rng);
  const auto table = LifeTable::constant(0.01);
  const Posterior post(ModelSpec::make(Family::LogNormal, SubModel::SGH, EffectStructure::ICAR, {0}), data, &table,
                       &graph);
  const auto res = run_chains(make_target(post), small_config(2, 300, 150));
  CHECK(res.chains[0].draws.cols() == static_cast<Eigen::Index>(post.layout().constrained_names().size()));
  CHECK(res.chains[0].unconstrained.cols() == static_cast<Eigen::Index>(post.dim()));
  CHECK(res.diagnostics.names == post.layout().constrained_names());
  CHECK(res.chains[0].draws.allFinite());
}

TEST_CASE("sampling coordinates of spatial posteriors") {
  std::mt19937_64 rng(4);
  const auto graph = testing::england_graph();
  const auto data = testing::random_dataset(80, 2, 9, rng);
  const auto table = LifeTable::constant(0.01);
  for (auto structure : {EffectStructure::ICAR, EffectStructure::BYM2}) {
    CAPTURE(static_cast<int>(structure));
    const Posterior post(ModelSpec::make(Family::LogNormal, SubModel::SGH, structure, {0}), data, &table, &graph);
    const auto target = make_target(post);
    REQUIRE(target.position);
    std::vector<double> w(post.dim()), g(post.dim()), gz(post.dim());
    for (int rep = 0; rep < 5; ++rep) {
      for (auto& v : w) v = testing::uniform(rng, -0.5, 0.5);
      const auto z = target.recorded(w);
      const double lw = target.log_density_gradient(w, g);
      // linear map with constant Jacobian: densities agree exactly
      CHECK(lw == doctest::Approx(post.log_density_gradient(z, gz)).epsilon(1e-12));
      for (std::size_t k = 0; k < w.size(); ++k) {
        auto a = w, b = w;
        const double h = 1e-5;
        a[k] += h;
        b[k] -= h;
        std::vector<double> scratch(w.size());
        const double fd = (target.log_density_gradient(a, scratch) - target.log_density_gradient(b, scratch)) / (2 * h);
        CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
      }
    }
    // mean of each ICAR-structured block is the sum-to-zero sd times its last coordinate
    const auto& slots = post.layout().hazard_slots();
    const std::size_t off = structure == EffectStructure::ICAR ? slots.values : slots.s_star;
    std::fill(w.begin(), w.end(), 0.0);
    w[off + 8] = 1.0;
    const auto z = target.recorded(w);
    for (std::size_t k = 0; k < 9; ++k) CHECK(z[off + k] == doctest::Approx(post.hyper().sum_to_zero_sd).epsilon(1e-12));
  }
}

TEST_CASE("initial radius of standardized effects") {
  std::mt19937_64 rng(6);
  const auto graph = testing::england_graph();
  const auto data = testing::random_dataset(40, 2, 9, rng);
  const auto table = LifeTable::constant(0.01);
  const Posterior icar(ModelSpec::make(Family::LogNormal, SubModel::SGH, EffectStructure::ICAR, {0}), data, &table, &graph);
  CHECK(make_target(icar).init_scale.empty());

  const Posterior bym2(ModelSpec::make(Family::LogNormal, SubModel::SGH, EffectStructure::BYM2, {0}), data, &table, &graph);
  const auto target = make_target(bym2);
  REQUIRE(target.init_scale.size() == bym2.dim());
  std::vector<int> small(bym2.dim(), 0);
  for (const auto* slots : {&bym2.layout().time_slots(), &bym2.layout().hazard_slots()})
    for (std::size_t k = 0; k < 9; ++k) small[slots->values + k] = small[slots->s_star + k] = 1;
  for (std::size_t k = 0; k < bym2.dim(); ++k) CHECK(target.init_scale[k] == (small[k] ? 0.1 : 1.0));

  // the first evaluated point lies in the scaled box
  SamplerConfig cfg;
  cfg.iterations = 1;
  cfg.warmup = 0;
  auto frozen = target;
  frozen.log_density_gradient = [](std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    return 0.0;
  };
  Target probe = frozen;
  std::vector<double> first;
  probe.log_density_gradient = [&](std::span<const double> w, std::span<double> g) {
    if (first.empty()) first.assign(w.begin(), w.end());
    return frozen.log_density_gradient(w, g);
  };
  run_chain(probe, cfg, 3);
  REQUIRE(first.size() == bym2.dim());
  for (std::size_t k = 0; k < first.size(); ++k) CHECK(std::abs(first[k]) <= cfg.init_radius * target.init_scale[k]);

  auto bad = target;
  bad.init_scale.pop_back();
  CHECK_THROWS_AS(run_chain(bad, cfg, 3), DimensionError);
}
