// Analytic test objectives and a Hessian-based homogeneity probe.

#pragma once

#include "egd/core.hpp"
#include "egd/objective.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace egd {

namespace detail {

inline double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace detail

/// f(theta) = |theta|^(2p) / (2p), gradient |theta|^(2p-2) theta, minimized at 0.
inline Objective power_norm_objective(int p, int d) {
  detail::require(p >= 1, "power_norm_objective: p must be >= 1");
  detail::require(d >= 1, "power_norm_objective: d must be >= 1");
  Objective obj;
  obj.dim = d;
  obj.value = [p](const ParamVector& th) { return detail::ipow(th.squaredNorm(), p) / (2.0 * p); };
  obj.gradient = [p](const ParamVector& th) {
    return ParamVector(detail::ipow(th.squaredNorm(), p - 1) * th);
  };
  obj.optimum = ParamVector::Zero(d);
  obj.optimal_value = 0.0;
  // Hessian |x|^(2p-2) I + (2p-2)|x|^(2p-4) x x^T has top eigenvalue (2p-1)|x|^(2p-2).
  const double two_p = 2.0 * p;
  obj.profile = HomogeneityProfile{two_p - 2.0, 1.0, two_p - 1.0, std::pow(two_p, (two_p - 1.0) / two_p)};
  return obj;
}

/// f(theta) = |theta|^2 / 2: smooth and strongly convex with c1 = 1.
inline Objective quadratic_objective(int d) {
  detail::require(d >= 1, "quadratic_objective: d must be >= 1");
  Objective obj;
  obj.dim = d;
  obj.value = [](const ParamVector& th) { return 0.5 * th.squaredNorm(); };
  obj.gradient = [](const ParamVector& th) { return ParamVector(th); };
  obj.hessian = [d](const ParamVector&) { return Matrix(Matrix::Identity(d, d)); };
  obj.optimum = ParamVector::Zero(d);
  obj.optimal_value = 0.0;
  obj.profile = HomogeneityProfile{0.0, 1.0, 1.0, std::sqrt(2.0)};
  return obj;
}

/// Per-coordinate exponents alpha_i > 1 of f(theta) = sum |theta_i|^(2 alpha_i).
struct DiagonalSpec {
  std::vector<double> alphas;

  void validate() const {
    detail::require(!alphas.empty(), "DiagonalSpec: need at least one coordinate");
    for (double a : alphas) detail::require(a > 1.0, "DiagonalSpec: every alpha must be > 1");
  }
};

/// f(theta) = sum_i |theta_i|^(2 alpha_i); coordinates are decoupled.
///
/// Powers are taken of |theta_i| and the gradient carries sign(theta_i), which
/// agrees with theta_i^(2 alpha_i) whenever 2 alpha_i is an even integer.
inline Objective diagonal_objective(const DiagonalSpec& spec) {
  spec.validate();
  const auto d = static_cast<int>(spec.alphas.size());
  Objective obj;
  obj.dim = d;
  obj.value = [spec](const ParamVector& th) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < th.size(); ++i) s += std::pow(std::abs(th[i]), 2.0 * spec.alphas[i]);
    return s;
  };
  obj.gradient = [spec](const ParamVector& th) {
    ParamVector g(th.size());
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      const double k = 2.0 * spec.alphas[i];
      const double mag = k * std::pow(std::abs(th[i]), k - 1.0);
      g[i] = th[i] < 0.0 ? -mag : (th[i] > 0.0 ? mag : 0.0);
    }
    return g;
  };
  obj.optimum = ParamVector::Zero(d);
  obj.optimal_value = 0.0;
  return obj;
}

/// f(theta) = (theta_1^2 + theta_2^4)^2, whose Hessian eigenvalues do not
/// share a common order near the origin.
inline Objective nondiagonal_example() {
  Objective obj;
  obj.dim = 2;
  obj.value = [](const ParamVector& th) {
    const double q = th[0] * th[0] + detail::ipow(th[1], 4);
    return q * q;
  };
  obj.gradient = [](const ParamVector& th) {
    const double q = th[0] * th[0] + detail::ipow(th[1], 4);
    ParamVector g(2);
    g << 4.0 * q * th[0], 8.0 * q * detail::ipow(th[1], 3);
    return g;
  };
  obj.hessian = [](const ParamVector& th) {
    const double a = th[0], b = th[1];
    Matrix h(2, 2);
    h(0, 0) = 12.0 * a * a + 4.0 * detail::ipow(b, 4);
    h(0, 1) = h(1, 0) = 16.0 * a * detail::ipow(b, 3);
    h(1, 1) = 24.0 * a * a * b * b + 56.0 * detail::ipow(b, 6);
    return h;
  };
  obj.optimum = ParamVector::Zero(2);
  obj.optimal_value = 0.0;
  return obj;
}

// ---------------------------------------------------------------------------
// Hessians and eigenvalues
// ---------------------------------------------------------------------------

/// Central differences of the analytic gradient, symmetrized.
inline Matrix finite_difference_hessian(const Objective& obj, const ParamVector& theta, double h_rel = 1e-5) {
  const auto d = theta.size();
  const double h = h_rel * std::max(1.0, theta.norm());
  Matrix hess(d, d);
  ParamVector probe = theta;
  for (Eigen::Index j = 0; j < d; ++j) {
    probe[j] = theta[j] + h;
    const ParamVector gp = obj.gradient(probe);
    probe[j] = theta[j] - h;
    const ParamVector gm = obj.gradient(probe);
    probe[j] = theta[j];
    hess.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

inline Matrix hessian_at(const Objective& obj, const ParamVector& theta) {
  if (obj.hessian) return obj.hessian(theta);
  return finite_difference_hessian(obj, theta);
}

/// Ascending eigenvalues of a symmetric matrix.
inline ParamVector symmetric_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

// ---------------------------------------------------------------------------
// Homogeneity probe
// ---------------------------------------------------------------------------

struct HomogeneityEstimate {
  double c1_hat = 0.0;
  double c2_hat = std::numeric_limits<double>::infinity();
  /// Samples whose ratio could not be formed, including those in the core.
  int violations = 0;
  /// Samples within 1e-8 of the optimum (0/0 ratios), a subset of violations.
  int core_excluded = 0;
  int used = 0;
};

inline constexpr double kHomogeneityCoreRadius = 1e-8;

/// Estimates c1 = max lambda_max(H)/r^alpha and c2 = min |grad|/(f - f*)^((alpha+1)/(alpha+2))
/// over the supplied points, r = |theta - theta*|.
inline HomogeneityEstimate probe_homogeneity_at(const Objective& obj, double alpha,
                                                const std::vector<ParamVector>& points) {
  detail::require(obj.optimum.has_value(), "probe_homogeneity: objective optimum must be set");
  detail::require(alpha >= 0.0, "probe_homogeneity: alpha must be >= 0");
  const ParamVector& opt = *obj.optimum;
  const double f_star = *obj.optimum_value();
  const double pl_exponent = (alpha + 1.0) / (alpha + 2.0);

  HomogeneityEstimate est;
  for (const auto& theta : points) {
    const double r = (theta - opt).norm();
    if (r < kHomogeneityCoreRadius) {
      ++est.violations;
      ++est.core_excluded;
      continue;
    }
    const double lam = symmetric_eigenvalues(hessian_at(obj, theta)).maxCoeff();
    const double smooth_ratio = lam / std::pow(r, alpha);
    const double gap = obj.value(theta) - f_star;
    const double pl_ratio = obj.gradient(theta).norm() / std::pow(gap, pl_exponent);
    if (!std::isfinite(smooth_ratio) || !std::isfinite(pl_ratio) || !(gap > 0.0)) {
      ++est.violations;
      continue;
    }
    est.c1_hat = std::max(est.c1_hat, smooth_ratio);
    est.c2_hat = std::min(est.c2_hat, pl_ratio);
    ++est.used;
  }
  return est;
}

/// n points uniform in the ball B(center, radius).
inline std::vector<ParamVector> sample_ball(const ParamVector& center, double radius, int n,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const auto d = center.size();
  std::vector<ParamVector> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ParamVector dir(d);
    for (Eigen::Index j = 0; j < d; ++j) dir[j] = normal(rng);
    const double rr = radius * std::pow(unif(rng), 1.0 / static_cast<double>(d));
    pts.push_back(center + rr * dir / dir.norm());
  }
  return pts;
}

/// Samples n points uniformly in B(theta*, rho) and probes them.
inline HomogeneityEstimate probe_homogeneity(const Objective& obj, double alpha, double rho, int n_samples,
                                             std::uint64_t seed) {
  detail::require(obj.optimum.has_value(), "probe_homogeneity: objective optimum must be set");
  detail::require(rho > 0.0, "probe_homogeneity: rho must be > 0");
  detail::require(n_samples >= 1, "probe_homogeneity: need at least one sample");
  return probe_homogeneity_at(obj, alpha, sample_ball(*obj.optimum, rho, n_samples, seed));
}

}  // namespace egd
