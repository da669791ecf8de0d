#include "rssgh/lifetable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rssgh/errors.hpp"

namespace rssgh {

std::string to_string(const StratumKey& key) {
  return "(sex=" + std::to_string(key.sex) + ", deprivation=" + std::to_string(key.deprivation) +
         ", region=" + std::to_string(key.region) + ")";
}

LifeTable::LifeTable(const LifeTable& other)
    : grids_(other.grids_), frozen_(other.frozen_), clamps_(other.clamp_count()) {}

LifeTable& LifeTable::operator=(const LifeTable& other) {
  grids_ = other.grids_;
  frozen_ = other.frozen_;
  clamps_.store(other.clamp_count());
  return *this;
}

LifeTable LifeTable::constant(double rate, StratumKey key) {
  LifeTable t;
  t.add(key, 0, 0, rate);
  t.finalize();
  return t;
}

void LifeTable::add(const StratumKey& key, int age, int year, double rate) {
  if (frozen_) throw ConfigError("life table is already finalized");
  if (!(rate >= 0.0) || !std::isfinite(rate)) {
    throw ConfigError("life table rate must be finite and non-negative for stratum " + to_string(key));
  }
  auto& g = grids_[key];
  if (!g.cells.emplace(std::make_pair(age, year), rate).second) {
    throw ConfigError("duplicate life table row: age " + std::to_string(age) + ", year " +
                      std::to_string(year) + ", stratum " + to_string(key));
  }
}

void LifeTable::finalize() {
  for (auto& [key, g] : grids_) {
    g.age_min = g.year_min = std::numeric_limits<int>::max();
    g.age_max = g.year_max = std::numeric_limits<int>::min();
    for (const auto& [cell, rate] : g.cells) {
      g.age_min = std::min(g.age_min, cell.first);
      g.age_max = std::max(g.age_max, cell.first);
      g.year_min = std::min(g.year_min, cell.second);
      g.year_max = std::max(g.year_max, cell.second);
    }
    const auto na = static_cast<std::size_t>(g.age_max - g.age_min + 1);
    const auto ny = static_cast<std::size_t>(g.year_max - g.year_min + 1);
    if (g.cells.size() != na * ny) {
      throw ConfigError("life table grid for stratum " + to_string(key) + " is incomplete: " +
                        std::to_string(g.cells.size()) + " of " + std::to_string(na * ny) + " cells");
    }
    g.rates.resize(na * ny);
    for (const auto& [cell, rate] : g.cells) {
      g.rates[static_cast<std::size_t>(cell.first - g.age_min) * ny +
              static_cast<std::size_t>(cell.second - g.year_min)] = rate;
    }
    g.cells.clear();
  }
  frozen_ = true;
}

void LifeTable::visit(const std::function<void(const StratumKey&, int, int, double)>& f) const {
  if (!frozen_) throw ConfigError("life table is not finalized");
  for (const auto& [key, g] : grids_)
    for (int a = g.age_min; a <= g.age_max; ++a)
      for (int y = g.year_min; y <= g.year_max; ++y) f(key, a, y, g.at(a, y));
}

std::vector<StratumKey> LifeTable::strata() const {
  std::vector<StratumKey> out;
  for (const auto& kv : grids_) out.push_back(kv.first);
  return out;
}

const LifeTable::Grid& LifeTable::grid(const StratumKey& key) const {
  if (!frozen_) throw ConfigError("life table used before finalize()");
  auto it = grids_.find(key);
  if (it == grids_.end()) throw LookupError("no life table stratum " + to_string(key));
  return it->second;
}

int LifeTable::clamp_index(double v, int lo, int hi) const {
  const double f = std::floor(v);
  if (f < lo) {
    clamps_.fetch_add(1, std::memory_order_relaxed);
    return lo;
  }
  if (f > hi) {
    clamps_.fetch_add(1, std::memory_order_relaxed);
    return hi;
  }
  return static_cast<int>(f);
}

double LifeTable::hazard(const StratumKey& key, double age, double year) const {
  const Grid& g = grid(key);
  return g.at(clamp_index(age, g.age_min, g.age_max), clamp_index(year, g.year_min, g.year_max));
}

namespace {

// Follow-up time of the next integer crossing of `origin + s` after s, or
// infinity once the axis has left the grid at the top.
double next_crossing(double origin, double s, int lo, int hi) {
  const double v = origin + s;
  if (std::floor(v) >= hi) return std::numeric_limits<double>::infinity();
  const double target = std::max(std::floor(v) + 1.0, static_cast<double>(lo));
  double b = target - origin;
  if (b <= s) b = target + 1.0 - origin;
  return b;
}

}  // namespace

LifeTable::Segment LifeTable::segment(const StratumKey& key, double age, double year, double s) const {
  const Grid& g = grid(key);
  const double end = std::min(next_crossing(age, s, g.age_min, g.age_max),
                              next_crossing(year, s, g.year_min, g.year_max));
  // look up at the segment midpoint so round-off at cell edges cannot pick a neighbour
  const double mid = std::isfinite(end) ? 0.5 * (s + end) : s + 0.5;
  const int a = clamp_index(age + mid, g.age_min, g.age_max);
  const int y = clamp_index(year + mid, g.year_min, g.year_max);
  return {g.at(a, y), end};
}

double LifeTable::cum_hazard(const StratumKey& key, double age, double year, double t) const {
  if (t < 0.0) throw DomainError("population cumulative hazard needs t >= 0");
  double s = 0.0, acc = 0.0;
  while (s < t) {
    const auto seg = segment(key, age, year, s);
    const double stop = std::min(seg.end, t);
    acc += seg.rate * (stop - s);
    s = stop;
  }
  return acc;
}

}  // namespace rssgh
