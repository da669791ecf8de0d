#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rssgh/baseline.hpp"
#include "rssgh/config.hpp"
#include "rssgh/errors.hpp"
#include "rssgh/pipeline.hpp"
#include "rssgh/postprocess.hpp"

namespace py = pybind11;
using namespace rssgh;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

BaselineParams params(const std::string& family, const std::vector<double>& theta) {
  return BaselineParams(family_from_code(family), theta);
}

template <class F>
Array vectorize(const Array& x, F f) {
  Array out(x.request().shape);
  const auto n = x.size();
  const double* in = x.data();
  double* res = out.mutable_data();
  for (py::ssize_t i = 0; i < n; ++i) res[i] = f(in[i]);
  return out;
}

template <double (*Fn)(const BaselineParams&, double)>
void def_baseline(py::module_& m, const char* name, const char* doc) {
  m.def(
      name,
      [](const std::string& family, const std::vector<double>& theta, const Array& x) {
        const auto p = params(family, theta);
        return vectorize(x, [&](double v) { return Fn(p, v); });
      },
      py::arg("family"), py::arg("theta"), py::arg("x"), doc);
}

py::dict curve_dict(const NetSurvivalCurve& c) {
  py::dict d;
  d["times"] = c.times;
  d["mean"] = c.mean;
  d["lower"] = c.lower;
  d["upper"] = c.upper;
  d["draws"] = c.draws;
  return d;
}

py::dict loo_dict(const LooResult& loo) {
  py::dict d;
  d["elpd"] = loo.elpd;
  d["se"] = loo.se;
  d["pointwise"] = loo.pointwise;
  d["khat"] = loo.khat;
  return d;
}

class Run {
 public:
  explicit Run(const fs::path& dir) : dir_(dir), run_(load_run(dir)) {}

  std::vector<std::string> names() const { return run_.names; }
  Eigen::MatrixXd draws() const { return run_.pooled(); }
  std::size_t regions() const { return run_.inputs.regions; }

  py::dict net_survival(const std::string& level, std::optional<std::vector<double>> times,
                        std::optional<std::size_t> region, std::size_t steps, std::size_t thin, double ci) const {
    const auto states = run_.states(thin);
    const auto& data = run_.inputs.data;
    const auto grid = times ? *times : default_time_grid(data, steps);
    if (level == "marginal") return curve_dict(net_survival_marginal(states, run_.config.spec, data.records, grid, ci));
    if (level == "region") {
      if (!region || *region < 1 || *region > run_.inputs.regions)
        throw ConfigError("region must be given as a number between 1 and the region count");
      return curve_dict(net_survival_region(states, run_.config.spec, data, *region - 1, grid, ci));
    }
    throw ConfigError("level must be 'marginal' or 'region'");
  }

  std::vector<double> exceedance(double threshold, const std::string& selector) const {
    return exceedance_probability(run_.pooled(), run_.names, selector, threshold);
  }

  py::dict loo() const { return loo_dict(load_loo(dir_)); }

 private:
  fs::path dir_;
  LoadedRun run_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Relative survival spatial general hazard models";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  def_baseline<&log_survival>(m, "log_survival", "log S(t)");
  def_baseline<&cum_hazard>(m, "cum_hazard", "H(t)");
  def_baseline<&hazard>(m, "hazard", "h(t)");
  def_baseline<&density>(m, "density", "f(t)");
  def_baseline<&quantile>(m, "quantile", "F^{-1}(p)");
  def_baseline<&survival_quantile>(m, "survival_quantile", "t with log S(t) = x");

  m.def(
      "simulate",
      [](const fs::path& config_path, const fs::path& out) {
        const auto config = load_config(config_path);
        const auto sim = run_simulation(config);
        write_simulation(sim, config, out);
        py::dict d;
        d["records"] = sim.result.data.size();
        d["events"] = sim.result.data.events();
        d["censoring"] = sim.result.censoring_fraction();
        return d;
      },
      py::arg("config"), py::arg("out"), "Simulate the data set described by a config into `out`.");

  m.def(
      "fit",
      [](const fs::path& config_path, const fs::path& out, std::optional<std::size_t> chains,
         std::optional<std::size_t> iterations, std::optional<std::size_t> warmup, std::optional<std::uint64_t> seed) {
        auto config = load_config(config_path);
        if (chains) config.sampler.chains = *chains;
        if (iterations) config.sampler.iterations = *iterations;
        if (warmup) config.sampler.warmup = *warmup;
        if (seed) config.seed = config.sampler.seed = *seed;
        config.sampler.validate();
        FitResult fit;
        {
          py::gil_scoped_release release;
          const auto inputs = load_inputs(config);
          fit = fit_model(config, inputs);
          write_fit(fit, config, out);
        }
        const auto& diag = fit.samples.diagnostics;
        std::size_t div = 0;
        for (auto v : diag.divergences) div += v;
        py::dict d;
        d["max_rhat"] = diag.max_rhat();
        d["min_ess"] = diag.min_ess();
        d["divergences"] = div;
        if (fit.loo) d["loo"] = loo_dict(*fit.loo);
        return d;
      },
      py::arg("config"), py::arg("out"), py::kw_only(), py::arg("chains") = py::none(),
      py::arg("iterations") = py::none(), py::arg("warmup") = py::none(), py::arg("seed") = py::none(),
      "Sample the posterior of a config and write the run directory `out`.");

  m.def(
      "psis_loo", [](const Eigen::MatrixXd& loglik) { return loo_dict(psis_loo(loglik)); }, py::arg("loglik"),
      "PSIS-LOO from a draws x observations log-likelihood matrix.");

  py::class_<Run>(m, "Run")
      .def(py::init<const fs::path&>(), py::arg("path"))
      .def_property_readonly("names", &Run::names)
      .def_property_readonly("draws", &Run::draws)
      .def_property_readonly("regions", &Run::regions)
      .def("net_survival", &Run::net_survival, py::arg("level") = "marginal", py::arg("times") = py::none(),
           py::arg("region") = py::none(), py::arg("steps") = 200, py::arg("thin") = 1, py::arg("ci") = 0.95)
      .def("exceedance", &Run::exceedance, py::arg("threshold") = 0.0, py::arg("selector") = "u")
      .def("loo", &Run::loo);
}
