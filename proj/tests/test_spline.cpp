#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "rssgh/errors.hpp"
#include "rssgh/spline.hpp"

using namespace rssgh;

TEST_CASE("basis dimension") {
  std::vector<double> x(50);
  std::iota(x.begin(), x.end(), 0.0);
  CHECK(SplineBasis(x, 0).columns() == 3);
  CHECK(SplineBasis(x, 4).columns() == 7);
  CHECK(SplineBasis(x, 4).raw(10.0).size() == 8);
}

TEST_CASE("constant or short columns are rejected") {
  CHECK_THROWS_AS(SplineBasis(std::vector<double>(20, 1.0), 0), DomainError);
  CHECK_THROWS_AS(SplineBasis(std::vector<double>{1, 2, 3, 4, 5}, 2), DomainError);
}

TEST_CASE("partition of unity on a uniform grid with two knots") {
  std::vector<double> x;
  for (int i = 0; i <= 100; ++i) x.push_back(i / 100.0);
  const SplineBasis b(x, 2);
  CHECK(b.interior_knots()[0] == doctest::Approx(1.0 / 3.0));
  CHECK(b.interior_knots()[1] == doctest::Approx(2.0 / 3.0));
  for (double v : x) {
    const auto r = b.raw(v);
    CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    for (double e : r) CHECK(e >= 0.0);
  }
}

TEST_CASE("centered columns and an independent Cox-de Boor recursion") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(70, 10);
  std::vector<double> x(300);
  for (auto& v : x) v = z(rng);
  const SplineBasis b(x, 3);
  const auto d = b.design(x);
  for (Eigen::Index j = 0; j < d.cols(); ++j) CHECK(std::abs(d.col(j).mean()) < 1e-12);

  // textbook recursion on the full knot vector
  std::vector<double> t(4, b.lower());
  for (double k : b.interior_knots()) t.push_back(k);
  for (int i = 0; i < 4; ++i) t.push_back(b.upper());
  auto basis = [&](auto&& self, std::size_t i, int order, double v) -> double {
    if (order == 1) {
      const bool last = t[i + 1] == b.upper() && v == b.upper() && t[i] < t[i + 1];
      return (t[i] <= v && v < t[i + 1]) || last ? 1.0 : 0.0;
    }
    double out = 0.0;
    if (t[i + order - 1] > t[i]) out += (v - t[i]) / (t[i + order - 1] - t[i]) * self(self, i, order - 1, v);
    if (t[i + order] > t[i + 1]) out += (t[i + order] - v) / (t[i + order] - t[i + 1]) * self(self, i + 1, order - 1, v);
    return out;
  };
  for (double v : {b.lower(), 55.0, 68.3, 70.0, 81.7, b.upper()}) {
    const auto r = b.raw(v);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == doctest::Approx(basis(basis, i, 4, v)).epsilon(1e-12));
  }
}
