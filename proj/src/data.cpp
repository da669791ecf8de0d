#include "rssgh/data.hpp"

#include <cmath>

#include "rssgh/errors.hpp"

namespace rssgh {

std::size_t Dataset::spline_columns() const noexcept {
  std::size_t q = 0;
  for (const auto& b : splines) q += b.size();
  return q;
}

std::size_t Dataset::events() const noexcept {
  std::size_t e = 0;
  for (const auto& r : records) e += r.status == 1;
  return e;
}

std::size_t Dataset::column(const std::string& name) const {
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    if (covariates[j] == name) return j;
  }
  throw LookupError("unknown covariate '" + name + "'");
}

void Dataset::validate(std::size_t regions) const {
  const std::size_t q = spline_columns();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = "record " + std::to_string(i + 1);
    if (!(r.time >= 0.0) || !std::isfinite(r.time)) throw DomainError(where + ": time must be finite and >= 0");
    if (r.status != 0 && r.status != 1) throw DomainError(where + ": status must be 0 or 1");
    if (r.status == 1 && r.time == 0.0) throw DomainError(where + ": death at time 0");
    if (r.region >= regions) {
      throw DomainError(where + ": region " + std::to_string(r.region + 1) + " outside 1.." +
                        std::to_string(regions));
    }
    if (r.x.size() != covariates.size()) throw DimensionError(where + ": wrong number of covariates");
    if (r.s.size() != q) throw DimensionError(where + ": wrong number of spline columns");
  }
}

void Dataset::add_spline(const std::string& name, const std::vector<double>& values, std::size_t interior_knots) {
  if (values.size() != records.size()) throw DimensionError("spline covariate length differs from record count");
  SplineBlock block{name, spline_columns(), SplineBasis(values, interior_knots)};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = block.basis.row(values[i]);
    records[i].s.insert(records[i].s.end(), row.begin(), row.end());
  }
  splines.push_back(std::move(block));
}

}  // namespace rssgh
