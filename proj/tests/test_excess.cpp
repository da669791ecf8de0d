#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/cauchy.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "rssgh/errors.hpp"
#include "rssgh/excess.hpp"
#include "rssgh/special.hpp"

using namespace rssgh;
using testing::uniform;

namespace {

PatientRecord plain_record(std::size_t p, double t = 1.0, int status = 1) {
  PatientRecord r;
  r.time = t;
  r.status = status;
  r.age = 60;
  r.year = 2005;
  r.x.assign(p, 0.0);
  return r;
}

ParamState zero_state(const BaselineParams& theta, std::size_t p, std::size_t pt) {
  ParamState s;
  s.theta = theta;
  s.alpha.assign(pt, 0.0);
  s.beta.assign(p, 0.0);
  return s;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1.0}));
  }
  return m;
}

std::vector<double> fd_gradient(const Posterior& post, std::vector<double> z, double h = 1e-5) {
  std::vector<double> g(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double z0 = z[k];
    z[k] = z0 + h;
    const double up = post.log_density(z);
    z[k] = z0 - h;
    const double dn = post.log_density(z);
    z[k] = z0;
    g[k] = (up - dn) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("excess hazard examples") {
  const ModelSpec spec = ModelSpec::make(Family::Gamma, SubModel::GH, EffectStructure::None, {0});
  auto rec = plain_record(1);
  auto s = zero_state(BaselineParams::gamma(1, 1), 1, 1);
  for (double t : {0.2, 1.0, 5.0}) CHECK(excess_hazard(s, spec, rec, t) == doctest::Approx(1.0).epsilon(1e-14));
  rec.x = {1.0};
  s.beta = {std::log(2.0)};
  for (double t : {0.2, 1.0, 5.0}) CHECK(excess_hazard(s, spec, rec, t) == doctest::Approx(2.0).epsilon(1e-14));

  // all effects off: baseline hazard
  const auto theta = BaselineParams::power_generalized_weibull(0.5, 3.75, 8);
  const ModelSpec pgw = ModelSpec::make(Family::PowerGeneralizedWeibull, SubModel::GH, EffectStructure::None, {0});
  auto s2 = zero_state(theta, 1, 1);
  CHECK(excess_hazard(s2, pgw, rec, 0.7) == doctest::Approx(hazard(theta, 0.7)).epsilon(1e-14));
}

TEST_CASE("LN excess hazard at a reference record matches a scalar recomputation") {
  // covariates: age (standardized), dep2..dep5, sex; alpha on age only
  const ModelSpec spec = ModelSpec::make(Family::LogNormal, SubModel::SGH, EffectStructure::ICAR, {0});
  ParamState s;
  s.theta = BaselineParams::log_normal(0.65, 1.15);
  s.alpha = {1.0};
  s.beta = {1, -1, -1, -1, -1, 2};
  s.time_effect.u = {2.0, 1.5, 1.0, 0.5, 0.0, -0.5, -1.0, -1.5, -2.0};
  s.hazard_effect.u = s.time_effect.u;
  PatientRecord r;
  r.x = {0.4, 0, 1, 0, 0, 1};
  r.region = 2;
  const double t = 1.3;
  const double lpt = 0.4 + 1.0, lph = 0.4 - 1 + 2 + 1.0;
  const double y = t * std::exp(lpt);
  const double z = (std::log(y) - 0.65) / 1.15;
  const double f = std::exp(-0.5 * z * z) / (y * 1.15 * std::sqrt(2 * M_PI));
  const double surv = 0.5 * std::erfc(z / std::sqrt(2.0));
  CHECK(excess_hazard(s, spec, r, t) == doctest::Approx(f / surv * std::exp(lph)).epsilon(1e-12));
  CHECK(cum_excess_hazard(s, spec, r, t) == doctest::Approx(-std::log(surv) * std::exp(lph - lpt)).epsilon(1e-12));
  CHECK(cum_excess_hazard(s, spec, r, 0.0) == 0.0);
}

TEST_CASE("cumulative excess hazard equals quadrature of the excess hazard") {
  std::mt19937_64 rng(17);
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (int rep = 0; rep < 100; ++rep) {
    const Family fam = testing::kAllFamilies[rep % 5];
    const ModelSpec spec = ModelSpec::make(fam, SubModel::SGH, EffectStructure::IID, {0, 1});
    ParamState s = zero_state(testing::random_params(fam, rng), 3, 2);
    for (auto& a : s.alpha) a = uniform(rng, -0.5, 0.5);
    for (auto& b : s.beta) b = uniform(rng, -0.5, 0.5);
    s.time_effect.u = {uniform(rng, -0.5, 0.5)};
    s.hazard_effect.u = {uniform(rng, -0.5, 0.5)};
    PatientRecord r = plain_record(3);
    for (auto& x : r.x) x = uniform(rng, -1, 1);
    const double t = rep == 0 ? 2.7 : std::exp(uniform(rng, -2, 1.5));
    const double want = integrator.integrate([&](double v) { return v > 0 ? excess_hazard(s, spec, r, v) : 0.0; },
                                             0.0, t);
    const double got = cum_excess_hazard(s, spec, r, t);
    CAPTURE(family_code(fam));
    CHECK(std::abs(got - want) <= 1e-6 * std::abs(want));
  }
}

TEST_CASE("likelihood examples") {
  const ModelSpec spec = ModelSpec::make(Family::Gamma, SubModel::GH, EffectStructure::None, {});
  Dataset d;
  d.covariates = {};
  d.records = {plain_record(0, 2.0, 0)};
  const auto s = zero_state(BaselineParams::gamma(4.0, 1.0), 0, 0);
  const auto table = LifeTable::constant(0.02);
  CHECK(log_likelihood(s, spec, d, &table) == doctest::Approx(-0.5).epsilon(1e-14));
  // constant excess hazard 1/4, death at t = 2, no population hazard
  ModelSpec os = spec;
  os.overall_survival = true;
  d.records[0].status = 1;
  CHECK(log_likelihood(s, os, d, nullptr) == doctest::Approx(std::log(0.25) - 0.5).epsilon(1e-14));
  CHECK(Posterior(os, d, nullptr, nullptr).log_likelihood(s) == doctest::Approx(std::log(0.25) - 0.5).epsilon(1e-14));
  // with h_P = 0.02
  CHECK(log_likelihood(s, spec, d, &table) == doctest::Approx(std::log(0.27) - 0.5).epsilon(1e-14));
  CHECK_THROWS_AS(log_likelihood(s, spec, d, nullptr), ConfigError);
}

TEST_CASE("compiled likelihood matches a literal per-record loop") {
  std::mt19937_64 rng(23);
  const auto graph = testing::england_graph();
  LifeTable table;
  for (int a = 30; a <= 100; ++a)
    for (int y = 2000; y <= 2020; ++y) table.add({}, a, y, std::exp(-9.5 + 0.085 * a) * (1 - 0.01 * (y - 2000)));
  table.finalize();
  for (Family fam : testing::kAllFamilies) {
    auto d = testing::random_dataset(20, 3, 9, rng, 1);
    const ModelSpec spec = ModelSpec::make(fam, SubModel::SGH, EffectStructure::BYM2, {0, 2});
    const Posterior post(spec, d, &table, &graph);
    const auto z = testing::random_point(post.layout(), rng);
    const ParamState s = post.layout().unpack(z);
    double want = 0.0;
    std::vector<double> pw(20);
    post.pointwise(s, pw);
    for (std::size_t i = 0; i < 20; ++i) {
      const auto& r = d.records[i];
      double lpt = s.alpha[0] * r.x[0] + s.alpha[1] * r.x[2] + s.time_effect.u[r.region];
      double lph = s.hazard_effect.u[r.region];
      for (std::size_t j = 0; j < 3; ++j) lph += s.beta[j] * r.x[j];
      for (std::size_t j = 0; j < r.s.size(); ++j) lph += s.gamma[j] * r.s[j];
      const double y = r.time * std::exp(lpt);
      const double he = hazard(s.theta, y) * std::exp(lph);
      const double he_cum = cum_hazard(s.theta, y) * std::exp(lph - lpt);
      const double hp = table.hazard({}, r.age + r.time, r.year + r.time);
      const double li = (r.status ? std::log(hp + he) : 0.0) - he_cum;
      CHECK(pw[i] == doctest::Approx(li).epsilon(1e-11));
      want += li;
    }
    CHECK(post.log_likelihood(s) == doctest::Approx(want).epsilon(1e-11));
    CHECK(log_likelihood(s, spec, d, &table) == doctest::Approx(want).epsilon(1e-11));
  }
}

TEST_CASE("overall-survival mode equals a zero life table") {
  std::mt19937_64 rng(5);
  auto d = testing::random_dataset(30, 2, 3, rng);
  ModelSpec spec = ModelSpec::make(Family::LogLogistic, SubModel::SGH_I, EffectStructure::IID, {1});
  const auto zero = LifeTable::constant(0.0);
  const Posterior with_table(spec, d, &zero, nullptr);
  spec.overall_survival = true;
  const Posterior os(spec, d, nullptr, nullptr);
  const auto z = testing::random_point(os.layout(), rng);
  CHECK(os.log_density(z) == doctest::Approx(with_table.log_density(z)).epsilon(1e-14));
}

TEST_CASE("proportional-hazards members factorize in time") {
  const ModelSpec spec = ModelSpec::make(Family::LogNormal, SubModel::SPH, EffectStructure::ICAR, {0});
  ParamState s = zero_state(BaselineParams::log_normal(0.2, 0.8), 2, 1);
  s.beta = {0.7, -0.3};
  s.time_effect.u.assign(3, 0.0);
  s.hazard_effect.u = {0.4, -0.1, -0.3};
  PatientRecord r = plain_record(2);
  r.x = {1.2, 1.0};
  r.region = 1;
  const double ratio = excess_hazard(s, spec, r, 0.3) / hazard(s.theta, 0.3);
  for (double t : {0.01, 0.9, 4.0, 11.0}) {
    CHECK(excess_hazard(s, spec, r, t) / hazard(s.theta, t) == doctest::Approx(ratio).epsilon(1e-12));
  }
}

TEST_CASE("g factor") {
  CHECK(spline_g_factor(100, 100, 10) == 10.0);
  CHECK(spline_g_factor(100, 50, 5) == 15.0);
  CHECK_THROWS_AS(spline_g_factor(10, 5, 0), DomainError);
}

TEST_CASE("sub-model lattice") {
  const ModelSpec sph = ModelSpec::make(Family::LogNormal, SubModel::SPH, EffectStructure::ICAR, {0, 1});
  const ParamLayout lsph(sph, 2, {}, 4);
  std::mt19937_64 rng(1);
  auto st = lsph.unpack(testing::random_point(lsph, rng));
  CHECK(st.alpha == std::vector<double>{0.0, 0.0});
  CHECK(st.time_effect.u == std::vector<double>(4, 0.0));
  CHECK(lsph.names().size() == 2 + 2 + 4 + 1);

  const ModelSpec two = ModelSpec::make(Family::LogNormal, SubModel::SGH_II, EffectStructure::IID, {0});
  const ParamLayout l2(two, 2, {}, 4);
  st = l2.unpack(testing::random_point(l2, rng));
  CHECK(st.time_effect.u == st.hazard_effect.u);
  CHECK(l2.dim() == 2 + 1 + 2 + 4 + 1);

  const ModelSpec saft = ModelSpec::make(Family::LogNormal, SubModel::SAFT, EffectStructure::BYM2, {0, 1});
  const ParamLayout ls(saft, 2, {}, 4);
  st = ls.unpack(testing::random_point(ls, rng));
  CHECK(st.alpha == st.beta);
  CHECK(st.time_effect.u == st.hazard_effect.u);

  const ModelSpec ah = ModelSpec::make(Family::Gamma, SubModel::AH, EffectStructure::None, {0});
  const ParamLayout lah(ah, 2, {}, 1);
  st = lah.unpack(testing::random_point(lah, rng));
  CHECK(st.beta == std::vector<double>{0.0, 0.0});

  CHECK_THROWS_AS(ModelSpec::make(Family::LogNormal, SubModel::AH, EffectStructure::ICAR, {0}), ConfigError);
  CHECK_THROWS_AS(ParamLayout(ModelSpec::make(Family::LogNormal, SubModel::SAFT, EffectStructure::IID, {0}), 2, {}, 3),
                  ConfigError);
  ModelSpec bad = ModelSpec::make(Family::LogNormal, SubModel::SGH_II, EffectStructure::IID, {0});
  bad.time_effect = EffectStructure::ICAR;
  CHECK_THROWS_AS(bad.validate(1), ConfigError);
  CHECK(submodel_from_code("RS-SGH-II") == SubModel::SGH_II);
}

TEST_CASE("layout round trips") {
  std::mt19937_64 rng(9);
  for (auto st : {EffectStructure::IID, EffectStructure::ICAR, EffectStructure::BYM2}) {
    const ModelSpec spec = ModelSpec::make(Family::GeneralizedGamma, SubModel::SGH, st, {1});
    const ParamLayout L(spec, 3, {4, 2}, 5);
    const auto z = testing::random_point(L, rng, 1.0);
    const auto back = L.pack(L.unpack(z));
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(back[k] == doctest::Approx(z[k]).epsilon(1e-13));
    const auto row = L.constrained(z);
    CHECK(row.size() == L.constrained_names().size());
    const auto z2 = L.from_constrained(row);
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(z2[k] == doctest::Approx(z[k]).epsilon(1e-12));
  }
}

TEST_CASE("prior is the sum of independently evaluated components") {
  std::mt19937_64 rng(77);
  const auto graph = testing::england_graph();
  auto d = testing::random_dataset(60, 2, 9, rng, 2);
  const ModelSpec spec = ModelSpec::make(Family::PowerGeneralizedWeibull, SubModel::SGH_I, EffectStructure::ICAR, {0});
  const auto table = LifeTable::constant(0.01);
  const Posterior post(spec, d, &table, &graph);
  const auto z = testing::random_point(post.layout(), rng);
  const ParamState s = post.layout().unpack(z);
  namespace bm = boost::math;
  double want = 0.0;
  const bm::cauchy_distribution<double> hc(0.0, 2.5);
  // half-Cauchy = 2 x Cauchy on the positive axis; log-Jacobian of exp is z
  want += std::log(2 * bm::pdf(hc, s.theta[0])) + z[0];
  want += std::log(2 * bm::pdf(hc, s.theta[1])) + z[1];
  want += std::log(bm::pdf(bm::gamma_distribution<double>(0.65, 1.0 / 1.83), s.theta[2])) + z[2];
  const bm::normal_distribution<double> n10(0.0, 10.0);
  for (double a : s.alpha) want += std::log(bm::pdf(n10, a));
  for (double b : s.beta) want += std::log(bm::pdf(n10, b));
  // g-prior via dense covariance
  const double g = (60.0 - 0.5 * (60.0 - static_cast<double>(d.events()))) / 5.0;
  CHECK(post.g_factor() == doctest::Approx(g));
  Eigen::MatrixXd S(60, 5);
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 5; ++j) S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.records[i].s[j];
  const Eigen::MatrixXd cov = s.spline_var[0] * g * (S.transpose() * S).inverse();
  const Eigen::Map<const Eigen::VectorXd> gam(s.gamma.data(), 5);
  want += -2.5 * std::log(2 * M_PI) - 0.5 * std::log(cov.determinant()) - 0.5 * gam.dot(cov.inverse() * gam);
  want += std::log(2 * bm::pdf(hc, s.spline_var[0])) + z[post.layout().spline_var_offset()];
  // spatial
  const double tau = s.hazard_effect.tau;
  want += icar_log_prior(s.hazard_effect.u, graph, tau);
  want += std::log(bm::pdf(bm::gamma_distribution<double>(0.01, 100.0), tau)) + std::log(tau);
  CHECK(post.log_prior(z) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 rng(101);
  const auto graph = testing::england_graph();
  const auto table = LifeTable::constant(0.02);
  for (Family fam : testing::kAllFamilies) {
    for (auto sub : {SubModel::SGH, SubModel::SGH_II, SubModel::SAFT, SubModel::SPH}) {
      for (auto st : {EffectStructure::IID, EffectStructure::ICAR, EffectStructure::BYM2}) {
        auto d = testing::random_dataset(40, 2, 9, rng, 1);
        const std::vector<std::size_t> tc = sub == SubModel::SAFT ? std::vector<std::size_t>{0, 1}
                                                                  : std::vector<std::size_t>{1};
        const Posterior post(ModelSpec::make(fam, sub, st, tc), d, &table, &graph);
        const auto z = testing::random_point(post.layout(), rng);
        std::vector<double> g(post.dim());
        const double v = post.log_density_gradient(z, g);
        CHECK(v == doctest::Approx(post.log_density(z)).epsilon(1e-13));
        CAPTURE(family_code(fam));
        CAPTURE(submodel_code(sub));
        CAPTURE(structure_code(st));
        CHECK(max_rel_err(g, fd_gradient(post, z)) < 1e-5);
      }
    }
  }
}

TEST_CASE("no data: posterior equals prior") {
  Dataset d;
  d.covariates = {"a"};
  const ModelSpec spec = ModelSpec::make(Family::LogNormal, SubModel::SGH, EffectStructure::IID, {0});
  const auto table = LifeTable::constant(0.01);
  const Posterior post(spec, d, &table, nullptr);
  std::mt19937_64 rng(3);
  const auto z = testing::random_point(post.layout(), rng);
  std::vector<double> g(post.dim()), gp(post.dim(), 0.0);
  CHECK(post.log_density_gradient(z, g) == doctest::Approx(post.log_prior_gradient(z, gp)).epsilon(1e-15));
  CHECK(g == gp);
}

TEST_CASE("numerical failures carry the record index") {
  std::mt19937_64 rng(4);
  auto d = testing::random_dataset(10, 1, 1, rng);
  d.records[6].x[0] = 1e3;
  const ModelSpec spec = ModelSpec::make(Family::LogNormal, SubModel::GH, EffectStructure::None, {0});
  const auto table = LifeTable::constant(0.01);
  const Posterior post(spec, d, &table, nullptr);
  auto z = std::vector<double>(post.dim(), 0.0);
  z[post.layout().alpha_offset()] = 1.0;
  try {
    post.log_density(z);
    FAIL("overflow not reported");
  } catch (const NumericalError& e) {
    CHECK(e.record() == 6);
  }
}
