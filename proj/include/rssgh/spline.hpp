#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rssgh {

/// Cubic B-spline expansion of one continuous covariate. Interior knots sit
/// at empirical quantiles, boundary knots at the sample range. The first
/// basis function is dropped and the remaining columns are centered on the
/// fitting sample, giving knots + 3 columns.
class SplineBasis {
 public:
  SplineBasis() = default;

  /// Throws DomainError when the column has fewer than knots + 4 distinct values.
  SplineBasis(std::span<const double> column, std::size_t interior_knots);

  /// Rebuild from stored knots and centering (e.g. from a saved model).
  SplineBasis(double lower, double upper, std::vector<double> interior, std::vector<double> centers);

  std::size_t columns() const noexcept { return interior_.size() + 3; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  const std::vector<double>& interior_knots() const noexcept { return interior_; }
  const std::vector<double>& centers() const noexcept { return centers_; }

  /// All knots + 4 B-spline values at x (sum to one inside [lower, upper]).
  std::vector<double> raw(double x) const;

  /// Dropped-and-centered row at x.
  std::vector<double> row(double x) const;

  Eigen::MatrixXd design(std::span<const double> xs) const;

 private:
  double lower_ = 0.0, upper_ = 1.0;
  std::vector<double> interior_;
  std::vector<double> centers_;
};

}  // namespace rssgh
