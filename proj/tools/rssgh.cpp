#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rssgh/config.hpp"
#include "rssgh/errors.hpp"
#include "rssgh/io.hpp"
#include "rssgh/pipeline.hpp"
#include "rssgh/postprocess.hpp"

using namespace rssgh;

namespace {

fs::path output_dir(const std::string& flag, const RunConfig& config) {
  if (!flag.empty()) return flag;
  if (!config.output.empty()) return config.output;
  throw ConfigError("no output directory: pass --out or set 'output' in the config");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

void curve_rows(std::ostringstream& out, const std::string& prefix, const NetSurvivalCurve& c) {
  for (std::size_t k = 0; k < c.times.size(); ++k)
    out << format_double(c.times[k]) << ',' << prefix << format_double(c.mean[k]) << ','
        << format_double(c.lower[k]) << ',' << format_double(c.upper[k]) << '\n';
}

int cmd_simulate(const std::string& config_path, const std::string& out) {
  const auto config = load_config(config_path);
  const auto sim = run_simulation(config);
  const auto dir = output_dir(out, config);
  write_simulation(sim, config, dir);
  std::cout << "simulated " << sim.result.data.size() << " records, " << sim.result.data.events()
            << " deaths, censoring " << format_double(sim.result.censoring_fraction()) << " -> " << dir.string()
            << "\n";
  return 0;
}

struct FitOverrides {
  long long chains = -1, iterations = -1, warmup = -1, threads = -1;
  long long seed = -1;
};

int cmd_fit(const std::string& config_path, const std::string& out, const FitOverrides& o) {
  auto config = load_config(config_path);
  if (o.chains >= 0) config.sampler.chains = static_cast<std::size_t>(o.chains);
  if (o.iterations >= 0) config.sampler.iterations = static_cast<std::size_t>(o.iterations);
  if (o.warmup >= 0) config.sampler.warmup = static_cast<std::size_t>(o.warmup);
  if (o.threads >= 0) config.sampler.threads = static_cast<std::size_t>(o.threads);
  if (o.seed >= 0) config.seed = config.sampler.seed = static_cast<std::uint64_t>(o.seed);
  config.sampler.validate();
  const auto dir = output_dir(out, config);
  const auto inputs = load_inputs(config);
  const auto fit = fit_model(config, inputs);
  write_fit(fit, config, dir);
  const auto& d = fit.samples.diagnostics;
  std::size_t div = 0;
  for (auto v : d.divergences) div += v;
  std::cout << "max R-hat " << format_double(d.max_rhat()) << ", min ESS " << format_double(d.min_ess())
            << ", divergences " << div;
  if (fit.loo) std::cout << ", elpd_loo " << format_double(fit.loo->elpd) << " (se " << format_double(fit.loo->se) << ")";
  std::cout << " -> " << dir.string() << "\n";
  return 0;
}

int cmd_netsurv(const std::string& run_dir, const std::string& level, const std::string& by,
                const std::vector<double>& t, std::size_t steps, std::size_t thin, double ci, const std::string& out) {
  const auto run = load_run(run_dir);
  const auto states = run.states(thin);
  const auto& spec = run.config.spec;
  const auto& data = run.inputs.data;
  const auto times = t.empty() ? default_time_grid(data, steps) : t;
  std::ostringstream csv;
  if (level == "marginal") {
    csv << "time,mean,lower,upper\n";
    curve_rows(csv, "", net_survival_marginal(states, spec, data.records, times, ci));
  } else if (level == "region") {
    csv << "time,region,mean,lower,upper\n";
    for (std::size_t r = 0; r < run.inputs.regions; ++r) {
      bool any = false;
      for (const auto& rec : data.records) any = any || rec.region == r;
      if (!any) continue;
      curve_rows(csv, std::to_string(r + 1) + ",", net_survival_region(states, spec, data, r, times, ci));
    }
  } else if (level == "covariate") {
    if (by.empty()) throw ConfigError("--level covariate needs --by <column>");
    const auto j = data.column(by);
    std::map<double, std::vector<const PatientRecord*>> groups;
    for (const auto& rec : data.records) groups[rec.x[j]].push_back(&rec);
    csv << "time," << by << ",mean,lower,upper\n";
    for (const auto& [value, members] : groups) {
      const auto curve = summarize_curve(times, average_net_survival(states, spec, members, times), ci);
      curve_rows(csv, format_double(value) + ",", curve);
    }
  } else {
    throw ConfigError("--level must be region, marginal or covariate");
  }
  emit(out, csv.str());
  return 0;
}

int cmd_exceed(const std::string& run_dir, double threshold, const std::string& selector, const std::string& out) {
  const auto run = load_run(run_dir);
  const auto p = exceedance_probability(run.pooled(), run.names, selector, threshold);
  std::ostringstream csv;
  csv << "region,probability\n";
  for (std::size_t k = 0; k < p.size(); ++k) csv << k + 1 << ',' << format_double(p[k]) << '\n';
  emit(out, csv.str());
  return 0;
}

int cmd_compare(const std::vector<std::string>& runs, const std::vector<std::string>& labels, const std::string& out) {
  if (!labels.empty() && labels.size() != runs.size()) throw ConfigError("--names must match the number of runs");
  std::vector<std::string> names;
  std::vector<LooResult> results;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    names.push_back(labels.empty() ? fs::path(runs[i]).lexically_normal().filename().string() : labels[i]);
    if (names.back().empty()) names.back() = fs::path(runs[i]).lexically_normal().parent_path().filename().string();
    results.push_back(load_loo(runs[i]));
  }
  const auto report = compare_models(names, results);
  nlohmann::json rows = nlohmann::json::array();
  std::printf("%-24s %12s %10s %12s %10s %8s\n", "model", "elpd_loo", "se", "elpd_diff", "se_diff", "k>0.7");
  for (const auto& r : report.rows) {
    std::size_t idx = 0;
    while (names[idx] != r.name) ++idx;
    const auto bad = results[idx].count_khat_above(0.7);
    rows.push_back({{"name", r.name},
                    {"elpd", r.elpd},
                    {"se", r.se},
                    {"elpd_diff", r.elpd_diff},
                    {"se_diff", r.se_diff},
                    {"khat_above_0.7", bad}});
    std::printf("%-24s %12.2f %10.2f %12.2f %10.2f %8zu\n", r.name.c_str(), r.elpd, r.se, r.elpd_diff, r.se_diff, bad);
  }
  if (!out.empty()) write_file_atomic(out, nlohmann::json{{"models", rows}}.dump(2) + "\n");
  return 0;
}

int cmd_diagnose(const std::string& run_dir, double limit) {
  const auto run = load_run(run_dir);
  const auto d = diagnose(run.chains, run.names);
  std::printf("%-24s %10s %10s\n", "parameter", "rhat", "ess");
  bool bad = false;
  for (std::size_t k = 0; k < d.names.size(); ++k) {
    std::printf("%-24s %10.4f %10.1f\n", d.names[k].c_str(), d.rhat[k], d.ess[k]);
    bad = bad || !(d.rhat[k] <= limit);
  }
  std::size_t div = 0;
  for (const auto& c : run.chains)
    for (int v : c.divergent) div += static_cast<std::size_t>(v);
  std::printf("chains %zu, draws per chain %zu, divergences %zu, max rhat %.4f\n", run.chains.size(),
              run.chains.empty() ? std::size_t{0} : run.chains[0].size(), div, d.max_rhat());
  if (bad) {
    std::fprintf(stderr, "rssgh: R-hat above %g\n", limit);
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative survival spatial general hazard models"};
  app.require_subcommand(1);

  std::string config_path, out, run_dir, level = "region", by, selector = "u";
  std::vector<double> times;
  std::vector<std::string> runs, labels;
  std::size_t steps = 200, thin = 1;
  double ci = 0.95, threshold = 0.0, limit = 1.05;
  FitOverrides over;

  auto* sim = app.add_subcommand("simulate", "Simulate a data set from a config");
  sim->add_option("--config", config_path, "run configuration (YAML)")->required();
  sim->add_option("--out", out, "output directory");

  auto* fit = app.add_subcommand("fit", "Sample the posterior");
  fit->add_option("--config", config_path, "run configuration (YAML)")->required();
  fit->add_option("--out", out, "output directory");
  fit->add_option("--chains", over.chains);
  fit->add_option("--iterations", over.iterations, "per chain, warmup included");
  fit->add_option("--warmup", over.warmup);
  fit->add_option("--threads", over.threads);
  fit->add_option("--seed", over.seed);

  auto* ns = app.add_subcommand("netsurv", "Net survival curves from a fitted run");
  ns->add_option("--run", run_dir)->required();
  ns->add_option("--level", level, "region, marginal or covariate");
  ns->add_option("--by", by, "covariate column for --level covariate");
  ns->add_option("--t", times, "time points (default: equal grid)")->delimiter(',');
  ns->add_option("--steps", steps, "grid steps when --t is absent");
  ns->add_option("--thin", thin, "use every n-th draw");
  ns->add_option("--ci", ci, "interval level");
  ns->add_option("--out", out, "CSV file (default stdout)");

  auto* ex = app.add_subcommand("exceed", "Posterior probability that a regional effect exceeds a threshold");
  ex->add_option("--run", run_dir)->required();
  ex->add_option("--threshold", threshold);
  ex->add_option("--selector", selector, "u (hazard level) or ut (time level)");
  ex->add_option("--out", out, "CSV file (default stdout)");

  auto* cmp = app.add_subcommand("compare", "PSIS-LOO comparison of fitted runs");
  cmp->add_option("runs", runs)->required();
  cmp->add_option("--names", labels)->delimiter(',');
  cmp->add_option("--out", out, "JSON report");

  auto* dg = app.add_subcommand("diagnose", "Convergence diagnostics of a fitted run");
  dg->add_option("--run", run_dir)->required();
  dg->add_option("--rhat", limit, "largest acceptable R-hat");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(config_path, out);
    if (*fit) return cmd_fit(config_path, out, over);
    if (*ns) return cmd_netsurv(run_dir, level, by, times, steps, thin, ci, out);
    if (*ex) return cmd_exceed(run_dir, threshold, selector, out);
    if (*cmp) return cmd_compare(runs, labels, out);
    if (*dg) return cmd_diagnose(run_dir, limit);
  } catch (const ConvergenceError& e) {
    std::cerr << "rssgh: convergence failure: " << e.what() << "\n";
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "rssgh: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const RankError& e) {
    std::cerr << "rssgh: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "rssgh: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
