#include "rssgh/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "rssgh/errors.hpp"

namespace rssgh {
namespace {

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": invalid value");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : fs::weakly_canonical(base / path);
}

std::size_t column_index(const std::vector<std::string>& cols, const std::string& name) {
  for (std::size_t j = 0; j < cols.size(); ++j)
    if (cols[j] == name) return j;
  throw ConfigError("model.time_covariates: '" + name + "' is not in model.covariates");
}

}  // namespace

void RunConfig::require_fit_inputs() const {
  if (data.patients.empty()) throw ConfigError("data.patients is required");
  auto need = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  need(data.patients, "data.patients");
  if (!spec.overall_survival) {
    if (data.lifetable.empty()) throw ConfigError("data.lifetable is required unless model.overall_survival is set");
    need(data.lifetable, "data.lifetable");
  }
  const bool spatial = spec.time_effect == EffectStructure::ICAR || spec.hazard_effect == EffectStructure::ICAR ||
                       spec.time_effect == EffectStructure::BYM2 || spec.hazard_effect == EffectStructure::BYM2;
  if (spatial && data.adjacency.empty()) throw ConfigError("data.adjacency is required for ICAR and BYM2 effects");
  if (!data.adjacency.empty()) need(data.adjacency, "data.adjacency");
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

RunConfig parse_config(const std::string& yaml, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config: expected a mapping at the top level");
  check_keys(root, "config", {"seed", "output", "model", "hyper", "sampler", "data", "simulate"});
  RunConfig c;
  read(root, "seed", c.seed, "config");
  std::string output;
  read(root, "output", output, "config");
  c.output = resolve(base_dir, output);

  const auto model = root["model"];
  if (!model) throw ConfigError("config: missing 'model' section");
  check_keys(model, "model",
             {"family", "submodel", "structure", "covariates", "time_covariates", "splines", "overall_survival"});
  std::string family = "LN", submodel = "RS-SGH", structure = "none";
  bool overall = false;
  read(model, "family", family, "model");
  read(model, "submodel", submodel, "model");
  read(model, "structure", structure, "model");
  read(model, "covariates", c.covariates, "model");
  read(model, "overall_survival", overall, "model");
  const auto sub = submodel_from_code(submodel);
  const bool tied = sub == SubModel::SAFT || sub == SubModel::AFT;
  if (model["time_covariates"]) {
    read(model, "time_covariates", c.time_covariates, "model");
  } else if (tied) {
    c.time_covariates = c.covariates;
  }
  if (const auto spl = model["splines"]) {
    if (!spl.IsSequence()) throw ConfigError("model.splines: expected a list");
    for (const auto& s : spl) {
      check_keys(s, "model.splines[]", {"column", "knots"});
      SplineSpec sp;
      read(s, "column", sp.column, "model.splines[]");
      read(s, "knots", sp.knots, "model.splines[]");
      if (sp.column.empty()) throw ConfigError("model.splines[]: column is required");
      c.splines.push_back(sp);
    }
  }
  std::vector<std::size_t> tcols;
  for (const auto& name : c.time_covariates) tcols.push_back(column_index(c.covariates, name));
  try {
    c.spec = ModelSpec::make(family_from_code(family), sub, structure_from_code(structure), tcols);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  c.spec.overall_survival = overall;
  c.spec.validate(c.covariates.size());

  const auto hyper = root["hyper"];
  check_keys(hyper, "hyper",
             {"alpha_var", "beta_var", "mu_var", "tau_sigma", "tau_eta", "tau_nu", "kappa_shape", "kappa_rate",
              "tau_sigma_gamma", "theta_tau", "bym2_sigma_scale", "bym2_rho_a", "bym2_rho_b", "sum_to_zero_sd"});
  auto& h = c.hyper;
  read(hyper, "alpha_var", h.alpha_var, "hyper");
  read(hyper, "beta_var", h.beta_var, "hyper");
  read(hyper, "mu_var", h.mu_var, "hyper");
  read(hyper, "tau_sigma", h.tau_sigma, "hyper");
  read(hyper, "tau_eta", h.tau_eta, "hyper");
  read(hyper, "tau_nu", h.tau_nu, "hyper");
  read(hyper, "kappa_shape", h.kappa_shape, "hyper");
  read(hyper, "kappa_rate", h.kappa_rate, "hyper");
  read(hyper, "tau_sigma_gamma", h.tau_sigma_gamma, "hyper");
  read(hyper, "theta_tau", h.theta_tau, "hyper");
  read(hyper, "bym2_sigma_scale", h.bym2_sigma_scale, "hyper");
  read(hyper, "bym2_rho_a", h.bym2_rho_a, "hyper");
  read(hyper, "bym2_rho_b", h.bym2_rho_b, "hyper");
  read(hyper, "sum_to_zero_sd", h.sum_to_zero_sd, "hyper");
  for (double v : {h.alpha_var, h.beta_var, h.mu_var, h.tau_sigma, h.tau_eta, h.tau_nu, h.kappa_shape, h.kappa_rate,
                   h.tau_sigma_gamma, h.theta_tau, h.bym2_sigma_scale, h.bym2_rho_a, h.bym2_rho_b, h.sum_to_zero_sd})
    if (!(v > 0.0)) throw ConfigError("hyper: every hyperparameter must be positive");

  const auto sampler = root["sampler"];
  check_keys(sampler, "sampler",
             {"chains", "iterations", "warmup", "target_accept", "max_steps", "threads", "init_radius"});
  auto& s = c.sampler;
  read(sampler, "chains", s.chains, "sampler");
  read(sampler, "iterations", s.iterations, "sampler");
  read(sampler, "warmup", s.warmup, "sampler");
  read(sampler, "target_accept", s.target_accept, "sampler");
  read(sampler, "max_steps", s.max_steps, "sampler");
  read(sampler, "threads", s.threads, "sampler");
  read(sampler, "init_radius", s.init_radius, "sampler");
  s.seed = c.seed;
  s.validate();

  const auto data = root["data"];
  check_keys(data, "data", {"patients", "lifetable", "adjacency", "regions", "stratum_keys"});
  std::string patients, lifetable, adjacency;
  read(data, "patients", patients, "data");
  read(data, "lifetable", lifetable, "data");
  read(data, "adjacency", adjacency, "data");
  read(data, "regions", c.data.regions, "data");
  read(data, "stratum_keys", c.data.stratum_keys, "data");
  c.data.patients = resolve(base_dir, patients);
  c.data.lifetable = resolve(base_dir, lifetable);
  c.data.adjacency = resolve(base_dir, adjacency);

  if (const auto sim = root["simulate"]) {
    check_keys(sim, "simulate",
               {"n", "horizon", "dropout_rate", "effects", "tau", "time_effect", "hazard_effect", "theta", "alpha",
                "beta", "covariates", "life_table"});
    SimulateBlock b;
    read(sim, "n", b.n, "simulate");
    read(sim, "horizon", b.horizon, "simulate");
    read(sim, "dropout_rate", b.dropout_rate, "simulate");
    read(sim, "effects", b.effects, "simulate");
    read(sim, "tau", b.tau, "simulate");
    read(sim, "time_effect", b.time_effect, "simulate");
    read(sim, "hazard_effect", b.hazard_effect, "simulate");
    read(sim, "theta", b.theta, "simulate");
    read(sim, "alpha", b.alpha, "simulate");
    read(sim, "beta", b.beta, "simulate");
    if (b.effects != "none" && b.effects != "icar" && b.effects != "fixed")
      throw ConfigError("simulate.effects must be none, icar or fixed");
    const auto cov = sim["covariates"];
    check_keys(cov, "simulate.covariates",
               {"age_mean", "age_sd", "age_min", "age_max", "region_weights", "deprivation_weights", "year_min",
                "year_max"});
    auto& cs = b.covariates;
    read(cov, "age_mean", cs.age_mean, "simulate.covariates");
    read(cov, "age_sd", cs.age_sd, "simulate.covariates");
    read(cov, "age_min", cs.age_min, "simulate.covariates");
    read(cov, "age_max", cs.age_max, "simulate.covariates");
    read(cov, "region_weights", cs.region_weights, "simulate.covariates");
    read(cov, "deprivation_weights", cs.deprivation_weights, "simulate.covariates");
    read(cov, "year_min", cs.year_min, "simulate.covariates");
    read(cov, "year_max", cs.year_max, "simulate.covariates");
    const auto lt = sim["life_table"];
    check_keys(lt, "simulate.life_table", {"year_min", "year_max"});
    read(lt, "year_min", b.life_table_year_min, "simulate.life_table");
    read(lt, "year_max", b.life_table_year_max, "simulate.life_table");
    if (c.covariates != CovariateScheme::columns())
      throw ConfigError("simulate: model.covariates must be the generated columns age_std, dep2, dep3, dep4, dep5, sex");
    c.simulate = b;
  }
  return c;
}

std::string dump_config(const RunConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  if (!c.output.empty()) out << YAML::Key << "output" << YAML::Value << c.output.string();
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << std::string(family_code(c.spec.family));
  out << YAML::Key << "submodel" << YAML::Value << std::string(submodel_code(c.spec.submodel));
  const auto structure = c.spec.hazard_effect != EffectStructure::None ? c.spec.hazard_effect : c.spec.time_effect;
  out << YAML::Key << "structure" << YAML::Value << std::string(structure_code(structure));
  out << YAML::Key << "covariates" << YAML::Value << YAML::Flow << c.covariates;
  out << YAML::Key << "time_covariates" << YAML::Value << YAML::Flow << c.time_covariates;
  out << YAML::Key << "splines" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : c.splines)
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "column" << YAML::Value << s.column << YAML::Key << "knots"
        << YAML::Value << s.knots << YAML::EndMap;
  out << YAML::EndSeq;
  out << YAML::Key << "overall_survival" << YAML::Value << c.spec.overall_survival;
  out << YAML::EndMap;

  const auto& h = c.hyper;
  out << YAML::Key << "hyper" << YAML::Value << YAML::BeginMap;
  const std::pair<const char*, double> hv[] = {
      {"alpha_var", h.alpha_var}, {"beta_var", h.beta_var}, {"mu_var", h.mu_var}, {"tau_sigma", h.tau_sigma},
      {"tau_eta", h.tau_eta}, {"tau_nu", h.tau_nu}, {"kappa_shape", h.kappa_shape}, {"kappa_rate", h.kappa_rate},
      {"tau_sigma_gamma", h.tau_sigma_gamma}, {"theta_tau", h.theta_tau}, {"bym2_sigma_scale", h.bym2_sigma_scale},
      {"bym2_rho_a", h.bym2_rho_a}, {"bym2_rho_b", h.bym2_rho_b}, {"sum_to_zero_sd", h.sum_to_zero_sd}};
  for (const auto& [k, v] : hv) out << YAML::Key << k << YAML::Value << format_double(v);
  out << YAML::EndMap;

  const auto& s = c.sampler;
  out << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "chains" << YAML::Value << s.chains;
  out << YAML::Key << "iterations" << YAML::Value << s.iterations;
  out << YAML::Key << "warmup" << YAML::Value << s.warmup;
  out << YAML::Key << "target_accept" << YAML::Value << format_double(s.target_accept);
  out << YAML::Key << "max_steps" << YAML::Value << s.max_steps;
  out << YAML::Key << "threads" << YAML::Value << s.threads;
  out << YAML::Key << "init_radius" << YAML::Value << format_double(s.init_radius);
  out << YAML::EndMap;

  out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "patients" << YAML::Value << c.data.patients.string();
  out << YAML::Key << "lifetable" << YAML::Value << c.data.lifetable.string();
  out << YAML::Key << "adjacency" << YAML::Value << c.data.adjacency.string();
  out << YAML::Key << "regions" << YAML::Value << c.data.regions;
  out << YAML::Key << "stratum_keys" << YAML::Value << YAML::Flow << c.data.stratum_keys;
  out << YAML::EndMap;

  if (c.simulate) {
    const auto& b = *c.simulate;
    out << YAML::Key << "simulate" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n" << YAML::Value << b.n;
    out << YAML::Key << "horizon" << YAML::Value << format_double(b.horizon);
    out << YAML::Key << "dropout_rate" << YAML::Value << format_double(b.dropout_rate);
    out << YAML::Key << "effects" << YAML::Value << b.effects;
    out << YAML::Key << "tau" << YAML::Value << format_double(b.tau);
    out << YAML::Key << "time_effect" << YAML::Value << YAML::Flow << b.time_effect;
    out << YAML::Key << "hazard_effect" << YAML::Value << YAML::Flow << b.hazard_effect;
    out << YAML::Key << "theta" << YAML::Value << YAML::Flow << b.theta;
    out << YAML::Key << "alpha" << YAML::Value << YAML::Flow << b.alpha;
    out << YAML::Key << "beta" << YAML::Value << YAML::Flow << b.beta;
    const auto& cs = b.covariates;
    out << YAML::Key << "covariates" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "age_mean" << YAML::Value << format_double(cs.age_mean);
    out << YAML::Key << "age_sd" << YAML::Value << format_double(cs.age_sd);
    out << YAML::Key << "age_min" << YAML::Value << format_double(cs.age_min);
    out << YAML::Key << "age_max" << YAML::Value << format_double(cs.age_max);
    out << YAML::Key << "region_weights" << YAML::Value << YAML::Flow << cs.region_weights;
    out << YAML::Key << "deprivation_weights" << YAML::Value << YAML::Flow << cs.deprivation_weights;
    out << YAML::Key << "year_min" << YAML::Value << format_double(cs.year_min);
    out << YAML::Key << "year_max" << YAML::Value << format_double(cs.year_max);
    out << YAML::EndMap;
    out << YAML::Key << "life_table" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "year_min" << YAML::Value << b.life_table_year_min;
    out << YAML::Key << "year_max" << YAML::Value << b.life_table_year_max;
    out << YAML::EndMap;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace rssgh
