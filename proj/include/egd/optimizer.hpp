// Iteration driver: runs EGD, GD, or any fixed-point map and logs a trajectory.

#pragma once

#include "egd/core.hpp"
#include "egd/objective.hpp"

#include <cstdio>
#include <ostream>
#include <string>

namespace egd {

/// Objective evaluation failed at a given iteration.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::int64_t t, const std::string& what)
      : std::runtime_error("objective evaluation failed at iteration " + std::to_string(t) + ": " + what),
        iteration_(t) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

namespace detail {

inline IterateRecord make_record(std::int64_t t, const ParamVector& theta, double value, double grad_norm,
                                 double step, const std::optional<ParamVector>& optimum) {
  IterateRecord r;
  r.t = t;
  r.theta = theta;
  r.objective = value;
  r.grad_norm = grad_norm;
  r.effective_step = step;
  if (optimum) r.dist_to_optimum = (theta - *optimum).norm();
  return r;
}

inline bool past_threshold(const ParamVector& theta, double threshold) {
  return !theta.allFinite() || theta.norm() > threshold;
}

}  // namespace detail

/// Runs `update(theta, grad, t, step) -> theta'` from theta0 until max_iters,
/// divergence (non-finite or |theta| > threshold), or a vanishing gradient.
///
/// One record per iterate, t = 0, 1, ...; at most max_iters + 1 records.
template <class Update>
Trajectory iterate(const Objective& objective, const ParamVector& theta0, const OptimizerConfig& config,
                   const std::optional<ParamVector>& optimum, Update&& update) {
  config.validate();
  detail::require(theta0.size() == objective.dim, "theta0 dimension does not match objective");
  detail::require(theta0.allFinite(), "theta0 must be finite");
  detail::require(!optimum || optimum->size() == objective.dim, "optimum dimension does not match objective");

  Trajectory traj;
  traj.divergence_threshold = config.threshold_for(theta0);
  traj.records.reserve(static_cast<std::size_t>(std::min<std::int64_t>(config.max_iters + 1, 1 << 20)));

  ParamVector theta = theta0;
  for (std::int64_t t = 0;; ++t) {
    std::pair<double, ParamVector> eval;
    try {
      eval = objective.evaluate(theta);
    } catch (const std::exception& e) {
      throw EvaluationError(t, e.what());
    }
    const double step = config.schedule.step_at(t);
    const double gnorm = eval.second.norm();
    traj.records.push_back(detail::make_record(t, theta, eval.first, gnorm, step, optimum));

    if (gnorm < config.gradient_tolerance) {
      traj.terminated_by = Termination::GradientVanished;
      break;
    }
    if (t == config.max_iters) {
      traj.terminated_by = Termination::MaxIters;
      break;
    }

    theta = update(theta, eval.second, t, step);
    if (detail::past_threshold(theta, traj.divergence_threshold)) {
      double value = std::numeric_limits<double>::infinity();
      double next_gnorm = std::numeric_limits<double>::infinity();
      if (theta.allFinite()) {
        try {
          auto last = objective.evaluate(theta);
          value = last.first;
          next_gnorm = last.second.norm();
        } catch (const std::exception&) {
          // diverged iterate: keep the infinite placeholders
        }
      }
      traj.records.push_back(
          detail::make_record(t + 1, theta, value, next_gnorm, config.schedule.step_at(t + 1), optimum));
      traj.terminated_by = Termination::Diverged;
      break;
    }
  }
  return traj;
}

/// Gradient iteration theta <- theta - step_t * grad under the configured schedule.
inline Trajectory run_optimizer(const Objective& objective, const ParamVector& theta0,
                                const OptimizerConfig& config,
                                const std::optional<ParamVector>& optimum = std::nullopt) {
  return iterate(objective, theta0, config, optimum,
                 [](const ParamVector& theta, const ParamVector& grad, std::int64_t, double step) {
                   return ParamVector(theta - step * grad);
                 });
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Writes `t,objective,grad_norm,effective_step,dist_to_optimum,theta_norm`.
/// Rows are thinned to every `record_every`-th iterate; the final record is
/// always written.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::int64_t record_every = 1) {
  detail::require(record_every >= 1, "record_every must be >= 1");
  os << "t,objective,grad_norm,effective_step,dist_to_optimum,theta_norm\n";
  for (std::size_t i = 0; i < traj.records.size(); ++i) {
    const auto& r = traj.records[i];
    const bool last = i + 1 == traj.records.size();
    if (r.t % record_every != 0 && !last) continue;
    os << r.t << ',' << format_double(r.objective) << ',' << format_double(r.grad_norm) << ','
       << format_double(r.effective_step) << ',';
    if (r.dist_to_optimum) os << format_double(*r.dist_to_optimum);
    os << ',' << format_double(r.theta.norm()) << '\n';
  }
}

}  // namespace egd
