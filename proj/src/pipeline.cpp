#include "rssgh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rssgh/errors.hpp"

namespace rssgh {
namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::vector<double> read_numbers(const json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return v;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t chain_file_index(const fs::path& p) {
  const auto stem = p.stem().string();
  constexpr std::string_view prefix = "draws_chain";
  if (stem.rfind(prefix, 0) != 0) return 0;
  try {
    return static_cast<std::size_t>(std::stoul(stem.substr(prefix.size())));
  } catch (const std::exception&) {
    return 0;
  }
}

Eigen::MatrixXd stack(const std::vector<ChainDraws>& chains, bool unconstrained) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& c : chains) {
    const auto& m = unconstrained ? c.unconstrained : c.draws;
    rows += m.rows();
    cols = m.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    const auto& m = unconstrained ? c.unconstrained : c.draws;
    out.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  return out;
}

std::vector<double> effect_vector(const SimulateBlock& b, const std::vector<double>& given, std::size_t regions,
                                  const char* key) {
  if (b.effects == "none") return std::vector<double>(regions, 0.0);
  if (given.size() != regions)
    throw ConfigError(std::string("simulate.") + key + ": expected " + std::to_string(regions) + " values");
  return given;
}

}  // namespace

Inputs load_inputs(const RunConfig& config) {
  config.require_fit_inputs();
  Inputs in;
  if (!config.data.adjacency.empty())
    in.graph = std::make_shared<RegionGraph>(load_adjacency(config.data.adjacency, config.data.regions));
  in.data = load_patients(config.data.patients, config.schema());
  if (in.graph) {
    in.regions = in.graph->size();
  } else if (config.data.regions > 0) {
    in.regions = config.data.regions;
  } else {
    in.regions = 1;
    for (const auto& r : in.data.records) in.regions = std::max(in.regions, r.region + 1);
  }
  in.data.validate(in.regions);
  if (!config.spec.overall_survival)
    in.table = std::make_shared<LifeTable>(load_lifetable(config.data.lifetable));
  return in;
}

SimConfig simulation_config(const RunConfig& config, std::shared_ptr<const LifeTable> table,
                            const RegionGraph& graph) {
  if (!config.simulate) throw ConfigError("config has no 'simulate' section");
  if (!config.splines.empty()) throw ConfigError("simulate: spline covariates are not simulated");
  const auto& b = *config.simulate;
  const auto& spec = config.spec;
  const std::size_t regions = graph.size();

  SimConfig s;
  s.n = b.n;
  s.spec = spec;
  s.table = spec.overall_survival ? nullptr : std::move(table);
  s.regions = regions;
  s.horizon = b.horizon;
  s.dropout_rate = b.dropout_rate;
  s.seed = config.seed;
  s.covariates = b.covariates;

  ParamState truth;
  if (!b.theta.empty()) {
    truth.theta = BaselineParams(spec.family, b.theta);
  } else if (spec.family == Family::LogNormal || spec.family == Family::PowerGeneralizedWeibull) {
    truth.theta = reference_truth(spec.family, {}, {}).theta;
  } else {
    throw ConfigError("simulate.theta is required for family " + std::string(family_code(spec.family)));
  }
  const auto ref = reference_truth(Family::LogNormal, {}, {});
  truth.beta = b.beta.empty() ? ref.beta : b.beta;
  if (!spec.hazard_coefficients()) truth.beta.assign(truth.beta.size(), 0.0);
  const auto tcols = spec.time_columns.size();
  switch (spec.time_coefficients()) {
    case TimeCoefficients::Free:
      if (!b.alpha.empty()) {
        truth.alpha = b.alpha;
      } else if (spec.time_columns == std::vector<std::size_t>{0}) {
        truth.alpha = ref.alpha;
      } else {
        throw ConfigError("simulate.alpha is required unless model.time_covariates is [age_std]");
      }
      break;
    case TimeCoefficients::Zero:
      truth.alpha.assign(tcols, 0.0);
      break;
    case TimeCoefficients::TiedToHazard:
      truth.alpha.clear();
      for (auto j : spec.time_columns) truth.alpha.push_back(truth.beta.at(j));
      break;
  }

  std::mt19937_64 rng(chain_seed(config.seed, std::numeric_limits<std::size_t>::max()));
  auto draw = [&](const std::vector<double>& given, const char* key) {
    if (b.effects == "icar") return sample_icar(graph, b.tau, rng);
    return effect_vector(b, given, regions, key);
  };
  if (spec.hazard_effect != EffectStructure::None) {
    truth.hazard_effect.kind = spec.hazard_effect;
    truth.hazard_effect.u = draw(b.hazard_effect, "hazard_effect");
    truth.hazard_effect.tau = b.tau;
  }
  if (spec.time_effect != EffectStructure::None) {
    truth.time_effect.kind = spec.time_effect;
    truth.time_effect.u = spec.shared_effect() ? truth.hazard_effect.u : draw(b.time_effect, "time_effect");
    truth.time_effect.tau = b.tau;
  }
  s.truth = std::move(truth);
  s.validate();
  return s;
}

Simulation run_simulation(const RunConfig& config) {
  if (!config.simulate) throw ConfigError("config has no 'simulate' section");
  if (config.data.adjacency.empty()) throw ConfigError("simulate: data.adjacency is required");
  Simulation out;
  out.graph = std::make_shared<RegionGraph>(load_adjacency(config.data.adjacency, config.data.regions));
  if (!config.spec.overall_survival) {
    if (!config.data.lifetable.empty() && fs::exists(config.data.lifetable)) {
      out.table = std::make_shared<LifeTable>(load_lifetable(config.data.lifetable));
    } else {
      const auto& b = *config.simulate;
      out.table = std::make_shared<LifeTable>(
          synthetic_life_table(out.graph->size(), b.life_table_year_min, b.life_table_year_max));
    }
  }
  out.sim = simulation_config(config, out.table, *out.graph);
  out.result = simulate_dataset(out.sim);
  return out;
}

void write_simulation(const Simulation& sim, const RunConfig& config, const fs::path& out) {
  StagedDirectory dir(fs::absolute(out));
  save_patients(dir / "patients.csv", sim.result.data);
  save_adjacency(dir / "adjacency.adj", *sim.graph);
  if (sim.table) save_lifetable(dir / "lifetable.csv", *sim.table);
  write_file_atomic(dir / "truth.json", truth_json(sim.result, sim.sim.spec));
  RunConfig fit = config;
  fit.output.clear();
  fit.data.patients = "patients.csv";
  fit.data.adjacency = "adjacency.adj";
  fit.data.lifetable = sim.table ? fs::path("lifetable.csv") : fs::path{};
  fit.data.regions = sim.graph->size();
  write_file_atomic(dir / "config.yaml", dump_config(fit));
  dir.commit();
}

std::shared_ptr<const Posterior> build_posterior(const RunConfig& config, const Inputs& inputs) {
  return std::make_shared<Posterior>(config.spec, inputs.data, inputs.table.get(), inputs.graph.get(),
                                     config.hyper);
}

FitResult fit_model(const RunConfig& config, const Inputs& inputs) {
  FitResult fit;
  fit.posterior = build_posterior(config, inputs);
  fit.samples = run_chains(make_target(*fit.posterior), config.sampler);
  const auto pooled = fit.samples.pooled_unconstrained();
  if (pooled.rows() >= 100) {
    const auto states = states_from_draws(fit.posterior->layout(), pooled);
    fit.loo = psis_loo(pointwise_loglik(*fit.posterior, states));
  }
  return fit;
}

std::string diagnostics_json(const SampleResult& samples) {
  const auto& d = samples.diagnostics;
  json j;
  j["max_rhat"] = number(d.max_rhat());
  j["min_ess"] = number(d.min_ess());
  json params = json::array();
  for (std::size_t k = 0; k < d.names.size(); ++k)
    params.push_back({{"name", d.names[k]}, {"rhat", number(d.rhat[k])}, {"ess", number(d.ess[k])}});
  j["parameters"] = params;
  json chains = json::array();
  for (const auto& c : samples.chains)
    chains.push_back({{"draws", c.size()},
                      {"divergences", c.divergences},
                      {"warmup_divergences", c.warmup_divergences},
                      {"step_size", number(c.step_size)},
                      {"mean_accept", number(c.mean_accept())},
                      {"inv_mass", numbers(c.inv_mass)}});
  j["chains"] = chains;
  return j.dump(2) + "\n";
}

std::string loo_json(const LooResult& loo) {
  json j;
  j["elpd"] = number(loo.elpd);
  j["se"] = number(loo.se);
  j["khat_above_0.7"] = loo.count_khat_above(0.7);
  j["pointwise"] = numbers(loo.pointwise);
  j["khat"] = numbers(loo.khat);
  return j.dump(2) + "\n";
}

std::string truth_json(const SimResult& sim, const ModelSpec& spec) {
  const auto& t = sim.truth;
  json j;
  j["family"] = std::string(family_code(spec.family));
  j["submodel"] = std::string(submodel_code(spec.submodel));
  json theta;
  const auto names = family_parameter_names(spec.family);
  for (std::size_t i = 0; i < t.theta.size(); ++i) theta[std::string(names[i])] = t.theta[i];
  j["theta"] = theta;
  j["alpha"] = numbers(t.alpha);
  j["beta"] = numbers(t.beta);
  j["time_effect"] = numbers(t.time_effect.u);
  j["hazard_effect"] = numbers(t.hazard_effect.u);
  j["n"] = sim.data.size();
  j["events"] = sim.data.events();
  j["censoring_fraction"] = sim.censoring_fraction();
  std::vector<double> z, pop, exc, admin, drop;
  for (const auto& l : sim.latent) {
    z.push_back(l.z);
    pop.push_back(l.population_time);
    exc.push_back(l.excess_time);
    admin.push_back(l.admin_censor);
    drop.push_back(l.dropout_censor);
  }
  j["latent"] = {{"z", numbers(z)},
                 {"population_time", numbers(pop)},
                 {"excess_time", numbers(exc)},
                 {"admin_censor", numbers(admin)},
                 {"dropout_censor", numbers(drop)}};
  return j.dump(2) + "\n";
}

void write_fit(const FitResult& fit, const RunConfig& config, const fs::path& out) {
  StagedDirectory dir(fs::absolute(out));
  const auto& names = fit.posterior->layout().constrained_names();
  for (std::size_t c = 0; c < fit.samples.chains.size(); ++c)
    save_draws(dir / ("draws_chain" + std::to_string(c + 1) + ".csv"), fit.samples.chains[c], names);

  const auto pooled = fit.samples.pooled();
  const auto& d = fit.samples.diagnostics;
  std::ostringstream summary;
  summary << "name,mean,sd,q2.5,q50,q97.5,rhat,ess\n";
  for (Eigen::Index k = 0; k < pooled.cols(); ++k) {
    const auto col = pooled.col(k);
    std::vector<double> v(col.data(), col.data() + col.size());
    const double mean = col.mean();
    const double sd = v.size() > 1 ? std::sqrt((col.array() - mean).square().sum() / double(v.size() - 1)) : 0.0;
    const auto ks = static_cast<std::size_t>(k);
    summary << names[ks] << ',' << format_double(mean) << ',' << format_double(sd) << ','
            << format_double(sample_quantile(v, 0.025)) << ',' << format_double(sample_quantile(v, 0.5)) << ','
            << format_double(sample_quantile(v, 0.975)) << ',' << format_double(d.rhat[ks]) << ','
            << format_double(d.ess[ks]) << '\n';
  }
  write_file_atomic(dir / "summary.csv", summary.str());
  write_file_atomic(dir / "diagnostics.json", diagnostics_json(fit.samples));
  if (fit.loo) write_file_atomic(dir / "loo.json", loo_json(*fit.loo));
  write_file_atomic(dir / "config.yaml", dump_config(config));
  dir.commit();
}

Eigen::MatrixXd LoadedRun::pooled() const { return stack(chains, false); }
Eigen::MatrixXd LoadedRun::pooled_unconstrained() const { return stack(chains, true); }

std::vector<ParamState> LoadedRun::states(std::size_t thin) const {
  if (thin == 0) throw DomainError("thin must be positive");
  const auto all = pooled_unconstrained();
  std::vector<ParamState> out;
  for (Eigen::Index r = 0; r < all.rows(); r += static_cast<Eigen::Index>(thin)) {
    const Eigen::VectorXd row = all.row(r).transpose();
    out.push_back(posterior->layout().unpack({row.data(), static_cast<std::size_t>(row.size())}));
  }
  return out;
}

LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("run directory not found: " + dir.string());
  LoadedRun run;
  run.config = load_config(dir / "config.yaml");
  run.inputs = load_inputs(run.config);
  run.posterior = build_posterior(run.config, run.inputs);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (chain_file_index(e.path()) > 0 && e.path().extension() == ".csv") files.push_back(e.path());
  if (files.empty()) throw ConfigError("no draw files in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return chain_file_index(a) < chain_file_index(b); });
  const auto& layout = run.posterior->layout();
  for (const auto& f : files) {
    auto [names, chain] = load_draws(f);
    if (names != layout.constrained_names())
      throw DimensionError(f.string() + ": columns do not match the model in config.yaml");
    chain.unconstrained.resize(chain.draws.rows(), static_cast<Eigen::Index>(layout.dim()));
    for (Eigen::Index r = 0; r < chain.draws.rows(); ++r) {
      const Eigen::VectorXd row = chain.draws.row(r).transpose();
      const auto z = layout.from_constrained({row.data(), static_cast<std::size_t>(row.size())});
      chain.unconstrained.row(r) = Eigen::Map<const Eigen::RowVectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    }
    run.names = std::move(names);
    run.chains.push_back(std::move(chain));
  }
  return run;
}

LooResult load_loo(const fs::path& dir) {
  json j;
  try {
    j = json::parse(read_text(dir / "loo.json"));
  } catch (const json::exception& e) {
    throw ConfigError((dir / "loo.json").string() + ": " + e.what());
  }
  LooResult loo;
  loo.elpd = j.at("elpd").get<double>();
  loo.se = j.at("se").get<double>();
  loo.pointwise = read_numbers(j.at("pointwise"));
  loo.khat = read_numbers(j.at("khat"));
  return loo;
}

}  // namespace rssgh
