// Core types and update rules for exponential step-size gradient descent.
//
// The optimizer state is a dense Eigen vector. Step schedules are either a
// fixed step `eta` or an exponentially growing step `eta / beta^t`.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace egd {

using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when inputs or intermediate values are not finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a formula has no real solution for the given arguments.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

inline bool all_finite(const ParamVector& v) { return v.allFinite(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Step schedules
// ---------------------------------------------------------------------------

enum class ScheduleKind { Fixed, Exponential };

/// Fixed step `eta`, or exponential step `eta / beta^t` with beta in (0, 1].
class StepSchedule {
 public:
  static StepSchedule fixed(double eta) { return StepSchedule(ScheduleKind::Fixed, eta, 1.0); }
  static StepSchedule exponential(double eta, double beta) {
    return StepSchedule(ScheduleKind::Exponential, eta, beta);
  }

  ScheduleKind kind() const { return kind_; }
  double eta() const { return eta_; }
  /// 1 for fixed schedules.
  double beta() const { return beta_; }

  double step_at(std::int64_t t) const {
    if (kind_ == ScheduleKind::Fixed) return eta_;
    return eta_ / std::pow(beta_, static_cast<double>(t));
  }

 private:
  StepSchedule(ScheduleKind kind, double eta, double beta) : kind_(kind), eta_(eta), beta_(beta) {
    detail::require(std::isfinite(eta) && eta > 0.0, "StepSchedule: eta must be finite and > 0");
    detail::require(beta > 0.0 && beta <= 1.0, "StepSchedule: beta must lie in (0, 1]");
  }

  ScheduleKind kind_;
  double eta_;
  double beta_;
};

// ---------------------------------------------------------------------------
// Single-step updates
// ---------------------------------------------------------------------------

namespace detail {

inline void check_step_inputs(const ParamVector& theta, const ParamVector& grad) {
  require(theta.size() >= 1, "parameter vector must have dimension >= 1");
  require(grad.size() == theta.size(), "gradient dimension " + std::to_string(grad.size()) +
                                           " does not match parameter dimension " +
                                           std::to_string(theta.size()));
  if (!all_finite(theta) || !all_finite(grad)) throw NumericError("non-finite parameter or gradient");
}

}  // namespace detail

/// theta - (eta / beta^t) * grad.
inline ParamVector egd_step(const ParamVector& theta, const ParamVector& grad, double eta, double beta,
                            std::int64_t t) {
  detail::require(eta > 0.0, "egd_step: eta must be > 0");
  detail::require(beta > 0.0 && beta <= 1.0, "egd_step: beta must lie in (0, 1]");
  detail::require(t >= 0, "egd_step: t must be >= 0");
  detail::check_step_inputs(theta, grad);
  const double step = eta / std::pow(beta, static_cast<double>(t));
  return theta - step * grad;
}

/// theta - eta * grad.
inline ParamVector gd_step(const ParamVector& theta, const ParamVector& grad, double eta) {
  detail::require(eta > 0.0, "gd_step: eta must be > 0");
  detail::check_step_inputs(theta, grad);
  return theta - eta * grad;
}

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

/// Deviation scale sqrt((d + log(1/delta)) / n) of the sample gradient.
inline double noise_level(std::int64_t n, std::int64_t d, double delta) {
  detail::require(n >= 1, "noise_level: n must be >= 1");
  detail::require(d >= 1, "noise_level: d must be >= 1");
  detail::require(delta > 0.0 && delta < 1.0, "noise_level: delta must lie in (0, 1)");
  return std::sqrt((static_cast<double>(d) + std::log(1.0 / delta)) / static_cast<double>(n));
}

/// beta = sqrt(1 - (1 - eta*c1)^2 / (2 log(1/epsilon))).
///
/// Requires 0 < eta*c1 < 1. Throws DomainError when epsilon is so large that
/// the squared scale is not positive.
inline double sample_size_dependent_beta(double eta, double c1, double epsilon) {
  const double ec = eta * c1;
  detail::require(eta > 0.0 && c1 > 0.0 && ec < 1.0,
                  "sample_size_dependent_beta: requires 0 < eta*c1 < 1, got " + std::to_string(ec));
  detail::require(epsilon > 0.0, "sample_size_dependent_beta: epsilon must be > 0");
  if (epsilon >= 1.0) {
    throw DomainError("sample_size_dependent_beta: epsilon = " + std::to_string(epsilon) +
                      " >= 1 makes log(1/epsilon) <= 0; increase the sample size");
  }
  const double log_inv = std::log(1.0 / epsilon);
  const double beta_sq = 1.0 - (1.0 - ec) * (1.0 - ec) / (2.0 * log_inv);
  if (!(beta_sq > 0.0)) {
    throw DomainError("sample_size_dependent_beta: beta^2 = " + std::to_string(beta_sq) +
                      " <= 0; epsilon = " + std::to_string(epsilon) +
                      " is too large (need log(1/epsilon) > (1 - eta*c1)^2 / 2)");
  }
  return std::sqrt(beta_sq);
}

/// Number of iterations log(2/(c1*eta)) / log(1/beta) before the exponential
/// step exceeds the stability limit 2/c1 of a c1-smooth objective.
///
/// Returns 0 when eta*c1 >= 2 and +inf when beta == 1.
inline double divergence_horizon(double eta, double c1, double beta) {
  detail::require(eta > 0.0 && c1 > 0.0, "divergence_horizon: eta and c1 must be > 0");
  detail::require(beta > 0.0 && beta <= 1.0, "divergence_horizon: beta must lie in (0, 1]");
  if (eta * c1 >= 2.0) return 0.0;
  if (beta == 1.0) return std::numeric_limits<double>::infinity();
  return std::log(2.0 / (c1 * eta)) / std::log(1.0 / beta);
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// Local growth constants: lambda_max(H) <= c1 |theta - theta*|^alpha and
/// |grad f| >= c2 (f - f*)^(1 - 1/(alpha + 2)) inside a ball of radius rho.
struct HomogeneityProfile {
  double alpha = 0.0;
  double rho = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;

  void validate() const {
    detail::require(alpha >= 0.0, "HomogeneityProfile: alpha must be >= 0");
    detail::require(rho > 0.0, "HomogeneityProfile: rho must be > 0");
    detail::require(c1 > 0.0, "HomogeneityProfile: c1 must be > 0");
    detail::require(c2 > 0.0, "HomogeneityProfile: c2 must be > 0");
  }
};

struct OptimizerConfig {
  StepSchedule schedule = StepSchedule::fixed(0.01);
  std::int64_t max_iters = 1000;
  /// Iterate-norm cap; defaults to 10 * max(1, |theta0|) when unset.
  std::optional<double> divergence_threshold;
  /// Downsampling for serialized output only; trajectories keep every iterate.
  std::int64_t record_every = 1;
  double gradient_tolerance = 1e-14;

  void validate() const {
    detail::require(max_iters >= 1, "OptimizerConfig: max_iters must be >= 1");
    detail::require(!divergence_threshold || *divergence_threshold > 0.0,
                    "OptimizerConfig: divergence_threshold must be > 0");
    detail::require(record_every >= 1, "OptimizerConfig: record_every must be >= 1");
    detail::require(gradient_tolerance >= 0.0, "OptimizerConfig: gradient_tolerance must be >= 0");
  }

  double threshold_for(const ParamVector& theta0) const {
    return divergence_threshold.value_or(10.0 * std::max(1.0, theta0.norm()));
  }
};

struct IterateRecord {
  std::int64_t t = 0;
  ParamVector theta;
  double objective = 0.0;
  double grad_norm = 0.0;
  double effective_step = 0.0;
  std::optional<double> dist_to_optimum;
};

enum class Termination { MaxIters, Diverged, GradientVanished };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::MaxIters: return "MaxIters";
    case Termination::Diverged: return "Diverged";
    case Termination::GradientVanished: return "GradientVanished";
  }
  return "?";
}

struct Trajectory {
  std::vector<IterateRecord> records;
  Termination terminated_by = Termination::MaxIters;
  std::optional<std::uint64_t> seed;
  double divergence_threshold = std::numeric_limits<double>::infinity();

  bool empty() const { return records.empty(); }
  const IterateRecord& back() const { return records.back(); }

  /// dist_to_optimum for every record; throws if any record lacks it.
  std::vector<double> errors() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      detail::require(r.dist_to_optimum.has_value(), "trajectory has no distance to optimum");
      out.push_back(*r.dist_to_optimum);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Step-size feasibility diagnostic for alpha > 0
// ---------------------------------------------------------------------------

/// Evaluates both sides of the step-size window
///   2(1 - beta^((a+2)/a)) / (c2 beta) <= eta * C^(a/(a+2)) <= c2^a / (c1 (a+2)^a)
/// with C = f(theta0) - f*, and the companion condition on beta alone.
/// Purely informational; the constants are conservative.
struct FeasibilityReport {
  double lower = 0.0;
  double middle = 0.0;
  double upper = 0.0;
  double beta_lhs = 0.0;
  double beta_rhs = 0.0;
  bool eta_window_ok = false;
  bool beta_ok = false;

  bool ok() const { return eta_window_ok && beta_ok; }
  std::string warning() const {
    if (ok()) return {};
    std::string w;
    if (!eta_window_ok) {
      w += "step-size window violated: " + std::to_string(lower) + " <= " + std::to_string(middle) +
           " <= " + std::to_string(upper) + " does not hold";
    }
    if (!beta_ok) {
      if (!w.empty()) w += "; ";
      w += "beta condition violated: " + std::to_string(beta_lhs) + " > " + std::to_string(beta_rhs);
    }
    return w;
  }
};

inline FeasibilityReport check_step_feasibility(const HomogeneityProfile& profile, double eta, double beta,
                                                double initial_gap) {
  profile.validate();
  detail::require(profile.alpha > 0.0, "check_step_feasibility: only defined for alpha > 0");
  detail::require(eta > 0.0 && beta > 0.0 && beta <= 1.0, "check_step_feasibility: bad eta/beta");
  detail::require(initial_gap >= 0.0, "check_step_feasibility: initial gap must be >= 0");
  const double a = profile.alpha;
  const double contraction = 1.0 - std::pow(beta, (a + 2.0) / a);
  FeasibilityReport r;
  r.lower = 2.0 * contraction / (profile.c2 * beta);
  r.middle = eta * std::pow(initial_gap, a / (a + 2.0));
  r.upper = std::pow(profile.c2, a) / (profile.c1 * std::pow(a + 2.0, a));
  r.beta_lhs = contraction / beta;
  r.beta_rhs = std::pow(profile.c2, a + 1.0) / (2.0 * profile.c1 * std::pow(a + 2.0, a));
  r.eta_window_ok = r.lower <= r.middle && r.middle <= r.upper;
  r.beta_ok = r.beta_lhs <= r.beta_rhs;
  return r;
}

}  // namespace egd
