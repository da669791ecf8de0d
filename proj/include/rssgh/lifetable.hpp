#pragma once

#include <atomic>
#include <compare>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace rssgh {

/// Demographic stratum of a life table (sex, deprivation quintile, region).
struct StratumKey {
  int sex = 0;
  int deprivation = 0;
  int region = 0;
  auto operator<=>(const StratumKey&) const = default;
};

std::string to_string(const StratumKey& key);

/// Piecewise-constant population mortality on integer (age, calendar year)
/// cells, one rectangular grid per stratum. Attained age and calendar year
/// outside a stratum's grid are clamped to the nearest band; each clamped
/// lookup bumps `clamp_count()`.
class LifeTable {
 public:
  LifeTable() = default;
  LifeTable(const LifeTable& other);
  LifeTable& operator=(const LifeTable& other);

  /// Table with the same rate everywhere for one stratum.
  static LifeTable constant(double rate, StratumKey key = {});

  /// Builder: register the rate of one cell. Duplicate cells throw ConfigError.
  void add(const StratumKey& key, int age, int year, double rate);

  /// Check every stratum grid is complete and freeze the table.
  void finalize();

  bool has(const StratumKey& key) const { return grids_.count(key) > 0; }
  std::vector<StratumKey> strata() const;

  /// Rate at attained age `age` during calendar year `year` (right-continuous).
  double hazard(const StratumKey& key, double age, double year) const;

  /// Integral of the rate along the Lexis diagonal from (age, year) over [0, t].
  double cum_hazard(const StratumKey& key, double age, double year, double t) const;

  /// Rate in force from follow-up time `s` and the time at which it next may
  /// change (infinity when no further boundary exists).
  struct Segment {
    double rate;
    double end;
  };
  Segment segment(const StratumKey& key, double age, double year, double s) const;

  /// Calls f(key, age, year, rate) for every cell of a finalized table.
  void visit(const std::function<void(const StratumKey&, int, int, double)>& f) const;

  std::size_t clamp_count() const noexcept { return clamps_.load(std::memory_order_relaxed); }

 private:
  struct Grid {
    int age_min = 0, age_max = -1, year_min = 0, year_max = -1;  // inclusive band starts
    std::map<std::pair<int, int>, double> cells;                 // builder storage
    std::vector<double> rates;                                   // row-major [age][year]
    double at(int a, int y) const {
      return rates[static_cast<std::size_t>(a - age_min) * static_cast<std::size_t>(year_max - year_min + 1) +
                   static_cast<std::size_t>(y - year_min)];
    }
  };
  const Grid& grid(const StratumKey& key) const;
  int clamp_index(double v, int lo, int hi) const;

  std::map<StratumKey, Grid> grids_;
  bool frozen_ = false;
  mutable std::atomic<std::size_t> clamps_{0};
};

}  // namespace rssgh
