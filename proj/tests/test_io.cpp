#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "rssgh/config.hpp"
#include "rssgh/errors.hpp"
#include "rssgh/io.hpp"
#include "rssgh/pipeline.hpp"
#include "rssgh/simulator.hpp"

using namespace rssgh;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("rssgh-io-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& s) const { return path / s; }
};

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_records(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size() || a.covariates != b.covariates) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a.records[i], &y = b.records[i];
    if (x.time != y.time || x.status != y.status || x.age != y.age || x.year != y.year || x.region != y.region ||
        x.x != y.x || x.s != y.s || x.stratum != y.stratum)
      return false;
  }
  return true;
}

const char* kGolden =
    "time,status,age,year,region,sex,deprivation,age_std\n"
    "1.25,1,64.5,2011.5,2,1,3,-0.55\n"
    "4,0,80,2010.25,1,0,1,1\n"
    "0.5,1,71.125,2014,3,1,5,0.1125\n";

RunConfig sim_config(const fs::path& dir, std::size_t n) {
  std::ostringstream y;
  y << "seed: 11\n"
       "model:\n  family: LN\n  submodel: RS-SGH\n  structure: icar\n"
       "  covariates: [age_std, dep2, dep3, dep4, dep5, sex]\n  time_covariates: [age_std]\n"
       "data:\n  adjacency: "
    << RSSGH_DATA_DIR << "/england_gor.adj\n"
    << "simulate:\n  n: " << n << "\n";
  return parse_config(y.str(), dir);
}

}  // namespace

TEST_CASE("golden patient file") {
  TempDir tmp;
  write(tmp / "p.csv", kGolden);
  const PatientSchema schema{{"age_std"}, {}, {"sex", "deprivation", "region"}};
  const auto d = load_patients(tmp / "p.csv", schema);
  REQUIRE(d.size() == 3);
  CHECK(d.records[0].time == 1.25);
  CHECK(d.records[0].status == 1);
  CHECK(d.records[0].region == 1);
  CHECK(d.records[0].stratum == StratumKey{1, 3, 2});
  CHECK(d.records[1].x == std::vector<double>{1.0});
  CHECK(d.records[2].age == 71.125);
  save_patients(tmp / "q.csv", d);
  CHECK(slurp(tmp / "q.csv") == kGolden);
  CHECK(same_records(load_patients(tmp / "q.csv", schema), d));
}

TEST_CASE("patient file errors") {
  TempDir tmp;
  const PatientSchema schema{{"age_std"}, {}, {"sex", "deprivation", "region"}};
  auto message = [&](const std::string& body) {
    write(tmp / "bad.csv", body);
    try {
      load_patients(tmp / "bad.csv", schema);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  std::string text = kGolden;
  text.replace(text.find("4,0,80"), 6, "4,2,80");
  const auto m = message(text);
  CHECK(m.find("bad.csv:3:") != std::string::npos);
  CHECK(m.find("status") != std::string::npos);
  CHECK(message("time,status,age,year,region,sex,deprivation,age_std\n-1,0,60,2010,1,0,1,0\n").find(":2:") !=
        std::string::npos);
  CHECK(message("time,status,age,year,region,sex,deprivation\n1,0,60,2010,1,0,1\n").find("age_std") !=
        std::string::npos);
  CHECK(message("time,status,age,year,region,sex,deprivation,age_std\n1,0,60,2010,x,0,1,0\n").find(":2:") !=
        std::string::npos);
}

TEST_CASE("simulated data round trip and likelihood at the truth") {
  TempDir tmp;
  auto config = sim_config(tmp.path, 2000);
  const auto sim = run_simulation(config);
  write_simulation(sim, config, tmp / "sim");
  const auto reloaded = load_config(tmp / "sim" / "config.yaml");
  CHECK(reloaded.data.patients == tmp / "sim" / "patients.csv");
  const auto in = load_inputs(reloaded);
  CHECK(same_records(in.data, sim.result.data));
  CHECK(in.regions == 9);
  const double a = log_likelihood(sim.result.truth, sim.sim.spec, sim.result.data, sim.table.get());
  const double b = log_likelihood(sim.result.truth, reloaded.spec, in.data, in.table.get());
  CHECK(std::isfinite(a));
  CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
}

TEST_CASE("identical seeds give identical output trees") {
  TempDir tmp;
  const auto config = sim_config(tmp.path, 300);
  write_simulation(run_simulation(config), config, tmp / "a");
  write_simulation(run_simulation(config), config, tmp / "b");
  for (const char* f : {"patients.csv", "lifetable.csv", "adjacency.adj", "truth.json", "config.yaml"})
    CHECK_MESSAGE(slurp(tmp / "a" / f) == slurp(tmp / "b" / f), f);
  CHECK_THROWS_AS(write_simulation(run_simulation(config), config, tmp / "a"), ConfigError);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path)) ++entries;
  CHECK(entries == 2);
}

TEST_CASE("life table round trip") {
  TempDir tmp;
  const auto table = synthetic_life_table(3, 2000, 2005);
  save_lifetable(tmp / "lt.csv", table);
  const auto back = load_lifetable(tmp / "lt.csv");
  CHECK(back.strata() == table.strata());
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const StratumKey k{int(rng() % 2), 1 + int(rng() % 5), 1 + int(rng() % 3)};
    const double age = testing::uniform(rng, 0, 110), year = testing::uniform(rng, 2000, 2006);
    CHECK(back.hazard(k, age, year) == table.hazard(k, age, year));
  }
  write(tmp / "dup.csv", "age,year,rate\n0,2000,0.1\n0,2000,0.2\n");
  CHECK_THROWS_AS(load_lifetable(tmp / "dup.csv"), ConfigError);
}

TEST_CASE("adjacency files") {
  TempDir tmp;
  write(tmp / "two.adj", "1 2\n");
  const auto two = load_adjacency(tmp / "two.adj");
  CHECK(two.size() == 2);
  CHECK(two.degrees() == std::vector<std::size_t>{1, 1});
  write(tmp / "loop.adj", "1 2\n2 2\n");
  CHECK_THROWS_AS(load_adjacency(tmp / "loop.adj"), GraphError);
  write(tmp / "split.adj", "1 2\n3 4\n");
  CHECK_THROWS_AS(load_adjacency(tmp / "split.adj"), GraphError);
  write(tmp / "dup.adj", "# comment\n1 2\n2 1\n2 3\n");
  CHECK(load_adjacency(tmp / "dup.adj").edge_count() == 2);

  const auto england = load_adjacency(fs::path(RSSGH_DATA_DIR) / "england_gor.adj");
  CHECK(england.size() == 9);
  CHECK(england.edge_count() == 15);
  CHECK(england.degrees() == std::vector<std::size_t>{2, 4, 3, 5, 4, 3, 2, 5, 2});
  save_adjacency(tmp / "e.adj", england);
  CHECK(load_adjacency(tmp / "e.adj").edges() == england.edges());
}

TEST_CASE("draw files reload exactly") {
  TempDir tmp;
  std::mt19937_64 rng(8);
  ChainDraws c;
  c.draws.resize(50, 3);
  for (Eigen::Index i = 0; i < c.draws.size(); ++i) c.draws.data()[i] = testing::uniform(rng, -1e3, 1e3) / 7.0;
  c.draws(0, 0) = 1e-300;
  c.draws(1, 1) = -0.0;
  for (int i = 0; i < 50; ++i) {
    c.log_density.push_back(-testing::uniform(rng, 0, 100));
    c.accept_stat.push_back(testing::uniform(rng, 0, 1));
    c.divergent.push_back(i % 17 == 0);
  }
  const std::vector<std::string> names = {"mu", "beta[1]", "u[1]"};
  save_draws(tmp / "d.csv", c, names);
  const auto [n2, back] = load_draws(tmp / "d.csv");
  CHECK(n2 == names);
  CHECK(back.draws == c.draws);
  CHECK(back.log_density == c.log_density);
  CHECK(back.accept_stat == c.accept_stat);
  CHECK(back.divergent == c.divergent);
}

TEST_CASE("configuration parsing") {
  TempDir tmp;
  const auto base = sim_config(tmp.path, 100);
  CHECK(base.spec.time_effect == EffectStructure::ICAR);
  CHECK(base.spec.time_columns == std::vector<std::size_t>{0});
  CHECK(base.hyper.theta_tau == 0.01);
  CHECK(base.sampler.chains == 4);

  const auto again = parse_config(dump_config(base), tmp.path);
  CHECK(dump_config(again) == dump_config(base));

  CHECK_THROWS_AS(parse_config("seed: 1\nmodel: {family: LN}\ncolour: red\n", tmp.path), ConfigError);
  CHECK_THROWS_AS(parse_config("model: {family: LN, submodel: RS-SGH, shape: 2}\n", tmp.path), ConfigError);
  CHECK_THROWS_AS(parse_config("model: {family: LN}\nhyper: {tau_sigma: -1}\n", tmp.path), ConfigError);
  CHECK_THROWS_AS(parse_config("model: {family: LN}\nsampler: {warmup: 10, iterations: 5}\n", tmp.path),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("model: {family: XX}\n", tmp.path), std::exception);
  CHECK_THROWS_AS(parse_config("model: {family: LN, submodel: RS-PH, structure: icar}\n", tmp.path), ConfigError);

  const auto rel = parse_config("model: {family: LN}\ndata: {patients: sub/p.csv}\n", tmp.path);
  CHECK(rel.data.patients == tmp / "sub" / "p.csv");
  CHECK_THROWS_AS(rel.require_fit_inputs(), ConfigError);

  const auto aft = parse_config("model: {family: LN, submodel: RS-SAFT, structure: icar, covariates: [a, b]}\n",
                                tmp.path);
  CHECK(aft.spec.time_columns == std::vector<std::size_t>{0, 1});
}
