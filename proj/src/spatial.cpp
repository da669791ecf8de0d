#include <cctype>
#include "rssgh/spatial.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "rssgh/errors.hpp"
#include "rssgh/special.hpp"

namespace rssgh {
namespace {

void check_size(std::span<const double> u, const RegionGraph& g, const char* what) {
  if (u.size() != g.size()) {
    throw DimensionError(std::string(what) + ": effect vector has length " + std::to_string(u.size()) +
                         " but the graph has " + std::to_string(g.size()) + " regions");
  }
}

}  // namespace

std::string_view structure_code(EffectStructure s) {
  switch (s) {
    case EffectStructure::None: return "none";
    case EffectStructure::IID: return "iid";
    case EffectStructure::ICAR: return "icar";
    case EffectStructure::BYM2: return "bym2";
  }
  return "none";
}

EffectStructure structure_from_code(std::string_view code) {
  std::string lower(code);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto s : {EffectStructure::None, EffectStructure::IID, EffectStructure::ICAR,
                 EffectStructure::BYM2}) {
    if (lower == structure_code(s)) return s;
  }
  throw DomainError("unknown random-effect structure '" + std::string(code) + "'");
}

double icar_pairwise(std::span<const double> u, const RegionGraph& g) {
  check_size(u, g, "icar_pairwise");
  double acc = 0.0;
  for (auto [k, l] : g.edges()) {
    const double d = u[k] - u[l];
    acc += d * d;
  }
  return acc;
}

double soft_sum_to_zero(std::span<const double> u, double sd) {
  if (!(sd > 0.0)) throw DomainError("sum-to-zero sd must be positive");
  const double scale = sd * static_cast<double>(u.size());
  const double s = std::accumulate(u.begin(), u.end(), 0.0);
  return special::log_normal_pdf(s / scale) - std::log(scale);
}

double icar_log_prior(std::span<const double> u, const RegionGraph& g, double tau, double sd) {
  return icar_log_prior(u, g, tau, sd, {}, nullptr);
}

double icar_log_prior(std::span<const double> u, const RegionGraph& g, double tau, double sd,
                      std::span<double> grad_u, double* grad_tau) {
  check_size(u, g, "icar_log_prior");
  if (!(tau > 0.0)) throw DomainError("ICAR precision must be positive");
  const double r = static_cast<double>(g.size());
  const double pair = icar_pairwise(u, g);
  double lp = 0.5 * (r - 1.0) * std::log(tau) - 0.5 * tau * pair + soft_sum_to_zero(u, sd);
  if (!grad_u.empty()) {
    if (grad_u.size() != u.size()) throw DimensionError("icar_log_prior: gradient length");
    for (auto [k, l] : g.edges()) {
      const double d = tau * (u[k] - u[l]);
      grad_u[k] -= d;
      grad_u[l] += d;
    }
    const double scale = sd * r;
    const double s = std::accumulate(u.begin(), u.end(), 0.0);
    for (auto& gk : grad_u) gk -= s / (scale * scale);
  }
  if (grad_tau) *grad_tau += 0.5 * (r - 1.0) / tau - 0.5 * pair;
  return lp;
}

double iid_log_prior(std::span<const double> u, double sigma) {
  return iid_log_prior(u, sigma, {}, nullptr);
}

double iid_log_prior(std::span<const double> u, double sigma, std::span<double> grad_u,
                     double* grad_sigma) {
  if (!(sigma > 0.0)) throw DomainError("IID effect sd must be positive");
  double ss = 0.0;
  for (double v : u) ss += v * v;
  const double n = static_cast<double>(u.size());
  if (!grad_u.empty()) {
    if (grad_u.size() != u.size()) throw DimensionError("iid_log_prior: gradient length");
    for (std::size_t k = 0; k < u.size(); ++k) grad_u[k] -= u[k] / (sigma * sigma);
  }
  if (grad_sigma) *grad_sigma += -n / sigma + ss / (sigma * sigma * sigma);
  return -n * (special::kLogSqrt2Pi + std::log(sigma)) - 0.5 * ss / (sigma * sigma);
}

double icar_scaling_factor(const RegionGraph& g) {
  if (g.size() == 1) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.laplacian());
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const Eigen::MatrixXd& vec = eig.eigenvectors();
  // eigenvalues come sorted; the first is the constant-vector null direction
  const double tol = 1e-9 * lam.maxCoeff();
  if (lam(1) <= tol) throw RankError("graph Laplacian has more than one zero eigenvalue");
  double log_sum = 0.0;
  for (Eigen::Index k = 0; k < vec.rows(); ++k) {
    double v = 0.0;
    for (Eigen::Index j = 1; j < lam.size(); ++j) v += vec(k, j) * vec(k, j) / lam(j);
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(g.size()));
}

std::vector<double> bym2_combine(std::span<const double> v_star, std::span<const double> s_star,
                                 double sigma, double rho) {
  if (v_star.size() != s_star.size()) throw DimensionError("bym2_combine: length mismatch");
  if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("BYM2 mixing rho must lie in [0, 1]");
  if (!(sigma > 0.0)) throw DomainError("BYM2 sd must be positive");
  const double a = sigma * std::sqrt(1.0 - rho), b = sigma * std::sqrt(rho);
  std::vector<double> u(v_star.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = a * v_star[k] + b * s_star[k];
  return u;
}

double bym2_log_prior(std::span<const double> v_star, std::span<const double> s_star,
                      const RegionGraph& g, double scaling, double sd) {
  return bym2_log_prior(v_star, s_star, g, scaling, sd, {}, {});
}

double bym2_log_prior(std::span<const double> v_star, std::span<const double> s_star,
                      const RegionGraph& g, double scaling, double sd, std::span<double> grad_v,
                      std::span<double> grad_s) {
  check_size(v_star, g, "bym2_log_prior");
  return iid_log_prior(v_star, 1.0, grad_v, nullptr) +
         icar_log_prior(s_star, g, scaling, sd, grad_s, nullptr);
}

}  // namespace rssgh
