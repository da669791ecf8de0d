#pragma once

// Synthetic datasets and parameter points for model-level tests.

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rssgh/data.hpp"
#include "rssgh/excess.hpp"
#include "rssgh/graph.hpp"
#include "rssgh/model.hpp"
#include "support.hpp"

namespace rssgh::testing {

inline RegionGraph england_graph() {
  std::ifstream in(std::string(RSSGH_DATA_DIR) + "/england_gor.adj");
  std::vector<std::pair<std::size_t, std::size_t>> e;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::size_t a, b;
    ss >> a >> b;
    e.push_back({a - 1, b - 1});
  }
  return RegionGraph(9, e);
}

/// n records, p covariates, optional spline block on a continuous column.
inline Dataset random_dataset(std::size_t n, std::size_t p, std::size_t regions, std::mt19937_64& rng,
                              std::size_t spline_knots = static_cast<std::size_t>(-1)) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> reg(0, regions - 1);
  std::exponential_distribution<double> ex(0.5);
  Dataset d;
  for (std::size_t j = 0; j < p; ++j) d.covariates.push_back("x" + std::to_string(j + 1));
  std::vector<double> raw;
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord r;
    r.time = 0.05 + ex(rng);
    r.status = uniform(rng, 0, 1) < 0.7 ? 1 : 0;
    r.age = uniform(rng, 40, 85);
    r.year = 2005.0 + uniform(rng, 0, 5);
    r.region = reg(rng);
    for (std::size_t j = 0; j < p; ++j) r.x.push_back(j % 2 ? (uniform(rng, 0, 1) < 0.5 ? 1.0 : 0.0) : 0.5 * z(rng));
    raw.push_back(z(rng));
    d.records.push_back(r);
  }
  if (spline_knots != static_cast<std::size_t>(-1)) d.add_spline("w", raw, spline_knots);
  return d;
}

/// Unconstrained point with moderate magnitudes.
inline std::vector<double> random_point(const ParamLayout& layout, std::mt19937_64& rng, double spread = 0.5) {
  std::vector<double> z(layout.dim());
  for (auto& v : z) v = uniform(rng, -spread, spread);
  return z;
}

}  // namespace rssgh::testing
