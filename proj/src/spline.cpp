#include "rssgh/spline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rssgh/errors.hpp"

namespace rssgh {

SplineBasis::SplineBasis(std::span<const double> column, std::size_t interior_knots) {
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  const std::set<double> distinct(sorted.begin(), sorted.end());
  if (distinct.size() < interior_knots + 4) {
    throw DomainError("spline covariate has " + std::to_string(distinct.size()) +
                      " distinct values; need at least " + std::to_string(interior_knots + 4));
  }
  lower_ = sorted.front();
  upper_ = sorted.back();
  // type-7 sample quantiles at k / (K + 1)
  for (std::size_t k = 1; k <= interior_knots; ++k) {
    const double h = static_cast<double>(sorted.size() - 1) * static_cast<double>(k) /
                     static_cast<double>(interior_knots + 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    const double q = lo + 1 < sorted.size() ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]) : sorted[lo];
    interior_.push_back(q);
  }
  centers_.assign(columns(), 0.0);
  const Eigen::MatrixXd raw_design = design(column);
  for (std::size_t j = 0; j < columns(); ++j) centers_[j] = raw_design.col(static_cast<Eigen::Index>(j)).mean();
}

SplineBasis::SplineBasis(double lower, double upper, std::vector<double> interior, std::vector<double> centers)
    : lower_(lower), upper_(upper), interior_(std::move(interior)), centers_(std::move(centers)) {
  if (!(upper_ > lower_)) throw DomainError("spline boundary knots must satisfy lower < upper");
  if (centers_.size() != columns()) throw DimensionError("spline centering vector has the wrong length");
}

std::vector<double> SplineBasis::raw(double x) const {
  constexpr int kOrder = 4;
  std::vector<double> t;
  for (int i = 0; i < kOrder; ++i) t.push_back(lower_);
  t.insert(t.end(), interior_.begin(), interior_.end());
  for (int i = 0; i < kOrder; ++i) t.push_back(upper_);
  const std::size_t nb = t.size() - kOrder;

  // clamp so the right boundary belongs to the last non-degenerate interval
  x = std::clamp(x, lower_, upper_);
  std::size_t span = kOrder - 1;
  while (span + 1 < nb && x >= t[span + 1]) ++span;

  // Cox-de Boor on the active span
  std::vector<double> n(kOrder, 0.0), left(kOrder), right(kOrder);
  n[0] = 1.0;
  for (int j = 1; j < kOrder; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom > 0.0 ? n[r] / denom : 0.0;
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }
  std::vector<double> out(nb, 0.0);
  for (int j = 0; j < kOrder; ++j) out[span - kOrder + 1 + j] = n[j];
  return out;
}

std::vector<double> SplineBasis::row(double x) const {
  const auto b = raw(x);
  std::vector<double> out(columns());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = b[j + 1] - centers_[j];
  return out;
}

Eigen::MatrixXd SplineBasis::design(std::span<const double> xs) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(columns()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto r = row(xs[i]);
    for (std::size_t j = 0; j < r.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
  }
  return m;
}

}  // namespace rssgh
