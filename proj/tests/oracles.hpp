#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rssgh/graph.hpp"

namespace rssgh::testing {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

/// Every connected simple graph on r labelled vertices (r <= 5 keeps this small).
inline std::vector<EdgeList> all_connected_graphs(std::size_t r) {
  EdgeList slots;
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = a + 1; b < r; ++b) slots.push_back({a, b});
  std::vector<EdgeList> out;
  for (unsigned mask = 0; mask < (1u << slots.size()); ++mask) {
    EdgeList e;
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (mask & (1u << i)) e.push_back(slots[i]);
    if (connected_components(r, e).size() == 1) out.push_back(e);
  }
  return out;
}

/// Log density of the singular Gaussian with covariance pinv(tau * Q), evaluated
/// on the centered vector. Both pseudo-inverses go through a complete
/// orthogonal decomposition, the pseudo-determinant through eigenvalues of the
/// covariance.
inline double dense_icar_logdensity(const Eigen::MatrixXd& laplacian, double tau,
                                    const Eigen::VectorXd& u) {
  const Eigen::MatrixXd prec = tau * laplacian;
  const Eigen::MatrixXd cov = prec.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd prec_back = cov.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  double log_pdet = 0.0;
  int rank = 0;
  for (double lam : eig.eigenvalues()) {
    if (lam > 1e-10 * eig.eigenvalues().maxCoeff()) {
      log_pdet += std::log(lam);
      ++rank;
    }
  }
  const Eigen::VectorXd c = u.array() - u.mean();
  return -0.5 * rank * std::log(2 * M_PI) - 0.5 * log_pdet - 0.5 * c.dot(prec_back * c);
}

}  // namespace rssgh::testing
