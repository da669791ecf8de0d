#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rssgh/lifetable.hpp"
#include "rssgh/spline.hpp"

namespace rssgh {

/// One patient. `region` is 0-based. `x` holds the hazard-level covariates;
/// time-level covariates are a subset of these columns declared in the
/// model spec. `s` is the concatenated spline expansion.
struct PatientRecord {
  double time = 0.0;
  int status = 0;
  double age = 0.0;
  double year = 0.0;
  std::size_t region = 0;
  std::vector<double> x;
  std::vector<double> s;
  StratumKey stratum;
};

/// Expansion of one raw covariate into a contiguous block of `s`.
struct SplineBlock {
  std::string name;
  std::size_t offset = 0;
  SplineBasis basis;
  std::size_t size() const noexcept { return basis.columns(); }
};

struct Dataset {
  std::vector<std::string> covariates;  ///< names of the columns of x
  std::vector<SplineBlock> splines;
  std::vector<PatientRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  std::size_t spline_columns() const noexcept;
  std::size_t events() const noexcept;
  std::size_t column(const std::string& name) const;  ///< index into x; LookupError if absent

  /// Validate shapes and value ranges; throws DimensionError / DomainError naming the record.
  void validate(std::size_t regions) const;

  /// Expand raw values of a covariate into a new spline block appended to every record's `s`.
  void add_spline(const std::string& name, const std::vector<double>& values, std::size_t interior_knots);
};

}  // namespace rssgh
