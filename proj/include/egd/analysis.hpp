// Rate fits, convergence classification, gradient checks, cross-validated
// early stopping, and Monte Carlo statistical-rate studies.

#pragma once

#include "egd/core.hpp"
#include "egd/objective.hpp"
#include "egd/optimizer.hpp"
#include "egd/stat_models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace egd {

// ---------------------------------------------------------------------------
// Least-squares fits
// ---------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int n_points = 0;

  /// Per-step contraction exp(slope) of a geometric fit.
  double ratio() const { return std::exp(slope); }
};

/// Ordinary least squares y = intercept + slope * x. R^2 is 1 for a perfect fit,
/// including constant data.
inline RateFit fit_linear(const std::vector<double>& xs, const std::vector<double>& ys) {
  detail::require(xs.size() == ys.size(), "fit: xs and ys differ in length");
  detail::require(xs.size() >= 3, "fit: need at least 3 points");
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  detail::require(sxx > 0.0, "fit: xs are all equal");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    sse += r * r;
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  f.t_lo = *std::min_element(xs.begin(), xs.end());
  f.t_hi = *std::max_element(xs.begin(), xs.end());
  f.n_points = static_cast<int>(xs.size());
  return f;
}

/// OLS of log(y) on log(x). The window reports the x range in original units.
inline RateFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  detail::require(xs.size() == ys.size() && xs.size() >= 3, "fit_loglog: need >= 3 paired points");
  std::vector<double> lx, ly;
  lx.reserve(xs.size());
  ly.reserve(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    detail::require(xs[i] > 0.0 && ys[i] > 0.0, "fit_loglog: inputs must be positive");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  RateFit f = fit_linear(lx, ly);
  f.t_lo = *std::min_element(xs.begin(), xs.end());
  f.t_hi = *std::max_element(xs.begin(), xs.end());
  return f;
}

/// OLS of log(error) on t; exp(slope) is the per-iteration contraction.
inline RateFit fit_geometric(const std::vector<double>& ts, const std::vector<double>& errors) {
  detail::require(ts.size() == errors.size() && ts.size() >= 3, "fit_geometric: need >= 3 paired points");
  std::vector<double> ly;
  ly.reserve(errors.size());
  for (double e : errors) {
    detail::require(e > 0.0, "fit_geometric: errors must be positive");
    ly.push_back(std::log(e));
  }
  return fit_linear(ts, ly);
}

/// Fits over records with t in [t_lo, t_hi] and positive error.
inline std::pair<std::vector<double>, std::vector<double>> error_window(const Trajectory& traj, double t_lo,
                                                                        double t_hi) {
  std::vector<double> ts, es;
  for (const auto& r : traj.records) {
    if (r.t < t_lo || r.t > t_hi || !r.dist_to_optimum) continue;
    const double e = *r.dist_to_optimum;
    if (!(e > 0.0) || !std::isfinite(e)) continue;
    ts.push_back(static_cast<double>(r.t));
    es.push_back(e);
  }
  return {ts, es};
}

// ---------------------------------------------------------------------------
// Convergence classification
// ---------------------------------------------------------------------------

enum class ConvergenceClass { Linear, Sublinear, TwoPhase, Diverged, Inconclusive };

inline const char* to_string(ConvergenceClass c) {
  switch (c) {
    case ConvergenceClass::Linear: return "Linear";
    case ConvergenceClass::Sublinear: return "Sublinear";
    case ConvergenceClass::TwoPhase: return "TwoPhase";
    case ConvergenceClass::Diverged: return "Diverged";
    case ConvergenceClass::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct ClassificationThresholds {
  double fit_r2 = 0.99;
  double geometric_r2_ceiling = 0.95;
  double max_linear_ratio = 0.999;
  double rebound_factor = 10.0;
  std::int64_t burn_in = 5;
};

struct ClassificationDetail {
  ConvergenceClass label = ConvergenceClass::Inconclusive;
  std::int64_t argmin_t = 0;
  std::optional<RateFit> geometric;
  std::optional<RateFit> loglog;
};

/// Decision order: interior minimum with a >= 10x rebound (TwoPhase), the
/// divergence flag, a geometric fit over [burn_in, argmin] (Linear), then a
/// log-log fit over the same window (Sublinear). Depends only on error ratios
/// and fit quality, so it is invariant to rescaling the error sequence.
inline ClassificationDetail classify_convergence_detail(const Trajectory& traj,
                                                        const ClassificationThresholds& th = {}) {
  detail::require(traj.records.size() >= 30, "classify_convergence: need at least 30 records");
  const std::vector<double> errs = traj.errors();

  ClassificationDetail out;
  std::size_t imin = 0;
  for (std::size_t i = 1; i < errs.size(); ++i)
    if (std::isfinite(errs[i]) && errs[i] < errs[imin]) imin = i;
  out.argmin_t = traj.records[imin].t;

  const bool interior = imin > 0 && imin + 1 < errs.size();
  if (interior) {
    double after = 0.0;
    for (std::size_t i = imin + 1; i < errs.size(); ++i)
      after = std::max(after, std::isfinite(errs[i]) ? errs[i] : std::numeric_limits<double>::infinity());
    if (after >= th.rebound_factor * errs[imin]) {
      out.label = ConvergenceClass::TwoPhase;
      return out;
    }
  }
  if (traj.terminated_by == Termination::Diverged) {
    out.label = ConvergenceClass::Diverged;
    return out;
  }

  const double lo = static_cast<double>(th.burn_in);
  const double hi = static_cast<double>(out.argmin_t);
  auto [ts, es] = error_window(traj, std::max(lo, 1.0), hi);
  if (ts.size() < 3) return out;
  out.geometric = fit_geometric(ts, es);
  out.loglog = fit_loglog(ts, es);
  if (out.geometric->r_squared >= th.fit_r2 && out.geometric->ratio() < th.max_linear_ratio) {
    out.label = ConvergenceClass::Linear;
  } else if (out.loglog->r_squared >= th.fit_r2 && out.geometric->r_squared < th.geometric_r2_ceiling) {
    out.label = ConvergenceClass::Sublinear;
  }
  return out;
}

inline ConvergenceClass classify_convergence(const Trajectory& traj, const ClassificationThresholds& th = {}) {
  return classify_convergence_detail(traj, th).label;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradientCheck {
  double max_rel_err = 0.0;
  ParamVector worst_point;
};

/// Central differences with h = h_rel * max(1, |theta|); relative error uses
/// the denominator max(|analytic|, 1e-12).
inline GradientCheck finite_difference_check(const std::function<double(const ParamVector&)>& value,
                                             const std::function<ParamVector(const ParamVector&)>& gradient,
                                             const std::vector<ParamVector>& points, double h_rel) {
  detail::require(h_rel > 0.0, "finite_difference_check: h_rel must be > 0");
  GradientCheck out;
  for (const auto& theta : points) {
    const double h = h_rel * std::max(1.0, theta.norm());
    const ParamVector analytic = gradient(theta);
    ParamVector fd(theta.size());
    ParamVector probe = theta;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      probe[j] = theta[j] + h;
      const double fp = value(probe);
      probe[j] = theta[j] - h;
      const double fm = value(probe);
      probe[j] = theta[j];
      fd[j] = (fp - fm) / (2.0 * h);
    }
    const double rel = (fd - analytic).norm() / std::max(analytic.norm(), 1e-12);
    if (rel > out.max_rel_err || out.worst_point.size() == 0) {
      out.max_rel_err = std::max(out.max_rel_err, rel);
      if (rel >= out.max_rel_err) out.worst_point = theta;
    }
  }
  return out;
}

inline GradientCheck finite_difference_check(const Objective& obj, const std::vector<ParamVector>& points,
                                             double h_rel) {
  return finite_difference_check(obj.value, obj.gradient, points, h_rel);
}

/// Points theta* + r u with |u| = 1 and log r uniform in [log r_lo, log r_hi].
inline std::vector<ParamVector> log_radius_points(const ParamVector& center, double r_lo, double r_hi, int n,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(std::log(r_lo), std::log(r_hi));
  std::vector<ParamVector> pts;
  for (int i = 0; i < n; ++i) {
    ParamVector u(center.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = normal(rng);
    pts.push_back(center + std::exp(unif(rng)) * u / u.norm());
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Estimation problems: a dataset family plus the iteration used on it
// ---------------------------------------------------------------------------

enum class Algorithm { Egd, Gd, Em };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Egd: return "egd";
    case Algorithm::Gd: return "gd";
    case Algorithm::Em: return "em";
  }
  return "?";
}

/// Per-family hooks used by cross-validation and rate studies.
template <class Dataset>
struct ModelTraits;

template <>
struct ModelTraits<GlmDataset> {
  static Objective objective(const GlmDataset& d) { return glm_fast_objective(d); }
  static double loss(const ParamVector& th, const GlmDataset& d) { return glm_loss(th, d); }
  static GlmDataset subset(const GlmDataset& d, const std::vector<std::int64_t>& rows) { return glm_subset(d, rows); }
  static std::int64_t size(const GlmDataset& d) { return d.n(); }
  /// theta and -theta fit equally well when p is even.
  static bool sign_symmetric(const GlmDataset& d) { return d.spec.p % 2 == 0; }
  static double em_step_size(const GlmDataset&) { return 0.0; }
};

template <>
struct ModelTraits<GmmDataset> {
  static Objective objective(const GmmDataset& d) { return gmm_objective(d); }
  static double loss(const ParamVector& th, const GmmDataset& d) { return gmm_nll(th, d); }
  static GmmDataset subset(const GmmDataset& d, const std::vector<std::int64_t>& rows) { return gmm_subset(d, rows); }
  static std::int64_t size(const GmmDataset& d) { return d.n(); }
  static bool sign_symmetric(const GmmDataset&) { return true; }
  static double em_step_size(const GmmDataset& d) { return d.spec.sigma * d.spec.sigma; }
};

/// |theta - theta*|, or min(|theta - theta*|, |theta + theta*|) for models
/// identifiable only up to sign.
inline double estimation_error(const ParamVector& theta, const ParamVector& theta_star, bool sign_symmetric) {
  const double plain = (theta - theta_star).norm();
  if (!sign_symmetric) return plain;
  return std::min(plain, (theta + theta_star).norm());
}

/// Runs `algorithm` on the objective. EM ignores the schedule's step and uses
/// em_step; the recorded step is then sigma^2, the equivalent gradient step.
template <class Dataset>
Trajectory run_algorithm(Algorithm algorithm, const Dataset& data, const Objective& objective,
                         const ParamVector& theta0, OptimizerConfig config) {
  if (algorithm == Algorithm::Em) {
    if constexpr (std::is_same_v<Dataset, GmmDataset>) {
      config.schedule = StepSchedule::fixed(ModelTraits<Dataset>::em_step_size(data));
      return iterate(objective, theta0, config, data.spec.theta_star,
                     [&data](const ParamVector& th, const ParamVector&, std::int64_t, double) {
                       return em_step(th, data);
                     });
    } else {
      throw ContractViolation("EM is only defined for the Gaussian mixture");
    }
  }
  return run_optimizer(objective, theta0, config, data.spec.theta_star);
}

// ---------------------------------------------------------------------------
// Cross-validated early stopping
// ---------------------------------------------------------------------------

struct CrossValidationResult {
  std::int64_t selected_t = 0;
  ParamVector selected_theta;
  std::vector<double> val_curve;
  Trajectory trajectory;
};

/// Shuffles rows with `seed`, trains on the first floor(split * n) and returns
/// the logged iterate with the smallest held-out loss. Iterates beyond the
/// divergence threshold score +inf and are never selected.
template <class Dataset>
CrossValidationResult cross_validated_stop(const Dataset& data, const ParamVector& theta0,
                                           const OptimizerConfig& config, double split, std::uint64_t seed,
                                           Algorithm algorithm = Algorithm::Egd) {
  using Traits = ModelTraits<Dataset>;
  const std::int64_t n = Traits::size(data);
  detail::require(n >= 10, "cross_validated_stop: need n >= 10");
  detail::require(split > 0.0 && split < 1.0, "cross_validated_stop: split must lie in (0, 1)");
  const auto n_train = static_cast<std::int64_t>(std::floor(split * static_cast<double>(n)));
  detail::require(n_train >= 1 && n_train < n, "cross_validated_stop: split leaves an empty fold");

  std::vector<std::int64_t> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), std::int64_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  const std::vector<std::int64_t> train_rows(rows.begin(), rows.begin() + n_train);
  const std::vector<std::int64_t> val_rows(rows.begin() + n_train, rows.end());
  const Dataset train = Traits::subset(data, train_rows);
  const Dataset val = Traits::subset(data, val_rows);

  CrossValidationResult out;
  const Objective objective = Traits::objective(train);
  out.trajectory = run_algorithm(algorithm, train, objective, theta0, config);

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < out.trajectory.records.size(); ++i) {
    const auto& r = out.trajectory.records[i];
    double v = std::numeric_limits<double>::infinity();
    if (!detail::past_threshold(r.theta, out.trajectory.divergence_threshold)) {
      v = Traits::loss(r.theta, val);
      if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    }
    out.val_curve.push_back(v);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  out.selected_t = out.trajectory.records[best_i].t;
  out.selected_theta = out.trajectory.records[best_i].theta;
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo rate studies
// ---------------------------------------------------------------------------

enum class ModelFamily { Glm, Gmm };
enum class Regime { LowSnr, HighSnr, MiddleSnr };

inline const char* to_string(ModelFamily m) { return m == ModelFamily::Glm ? "glm" : "gmm"; }
inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::LowSnr: return "low_snr";
    case Regime::HighSnr: return "high_snr";
    case Regime::MiddleSnr: return "middle_snr";
  }
  return "?";
}

/// One iteration scheme inside a study. For Egd, `auto_beta` selects the
/// sample-size-dependent scale from noise_level(n, d, delta) and `c1`.
struct AlgorithmSpec {
  std::string label;
  Algorithm algorithm = Algorithm::Egd;
  double eta = 0.001;
  double beta = 0.9;
  bool auto_beta = false;
  double c1 = 0.0;
  double delta = 0.05;
  std::int64_t max_iters = 400;
  double gradient_tolerance = 1e-14;
};

struct RateStudySpec {
  ModelFamily family = ModelFamily::Glm;
  Regime regime = Regime::LowSnr;
  int d = 4;
  int p = 2;
  double sigma = 1.0;
  /// |theta*| / sigma in the high-SNR regime.
  double snr = 3.0;
  std::vector<std::int64_t> n_grid;
  int replicates = 20;
  std::uint64_t base_seed = 1;
  double init_radius = 0.5;
  std::vector<AlgorithmSpec> algorithms;
  /// Worker threads; 0 means hardware concurrency.
  int threads = 0;

  void validate() const {
    detail::require(d >= 1, "RateStudySpec: d must be >= 1");
    detail::require(family == ModelFamily::Gmm || p >= 1, "RateStudySpec: p must be >= 1");
    detail::require(sigma > 0.0, "RateStudySpec: sigma must be > 0");
    detail::require(replicates >= 5, "RateStudySpec: replicates must be >= 5");
    detail::require(n_grid.size() >= 4, "RateStudySpec: n_grid needs at least 4 sample sizes");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      detail::require(n_grid[i] >= 10, "RateStudySpec: every n must be >= 10");
      detail::require(i == 0 || n_grid[i] > n_grid[i - 1], "RateStudySpec: n_grid must be strictly increasing");
    }
    detail::require(!algorithms.empty(), "RateStudySpec: need at least one algorithm");
    for (const auto& a : algorithms) {
      detail::require(a.algorithm != Algorithm::Em || family == ModelFamily::Gmm,
                      "RateStudySpec: em is only available for the Gaussian mixture");
      detail::require(!a.auto_beta || a.c1 > 0.0, "RateStudySpec: auto beta needs c1 > 0");
      detail::require(a.max_iters >= 1, "RateStudySpec: max_iters must be >= 1");
    }
  }

  /// theta* = |theta*| e_1 for the given sample size.
  ParamVector theta_star(std::int64_t n) const {
    ParamVector t = ParamVector::Zero(d);
    switch (regime) {
      case Regime::LowSnr: break;
      case Regime::HighSnr: t[0] = snr * sigma; break;
      case Regime::MiddleSnr: t[0] = std::pow(static_cast<double>(d) / static_cast<double>(n), 1.0 / 6.0); break;
    }
    return t;
  }
};

/// Outcome of one algorithm on one (n, replicate) dataset.
struct CellOutcome {
  bool ok = false;
  std::string error;
  double min_error = 0.0;
  std::int64_t iters_to_min = 0;
  double final_error = 0.0;
  double beta = 1.0;
  Termination terminated_by = Termination::MaxIters;
  std::int64_t records = 0;
};

struct PerN {
  std::int64_t n = 0;
  /// Geometric mean of per-replicate minimum errors.
  double min_error_mean = 0.0;
  /// Delta-method standard error of that geometric mean.
  double min_error_stderr = 0.0;
  double iters_to_min_mean = 0.0;
  double iters_to_min_stderr = 0.0;
  int successes = 0;
  int failures = 0;
};

struct RateStudyResult {
  std::string algorithm;
  std::vector<std::int64_t> n_grid;
  std::vector<PerN> per_n;
  std::optional<RateFit> loglog_error_slope;
  std::optional<RateFit> loglog_iters_slope;
  /// cells[n_index][replicate]
  std::vector<std::vector<CellOutcome>> cells;
};

struct RateStudyReport {
  RateStudySpec spec;
  std::vector<RateStudyResult> results;
  std::vector<std::string> failures;

  const RateStudyResult& result(const std::string& label) const {
    for (const auto& r : results)
      if (r.algorithm == label) return r;
    throw ContractViolation("no rate-study result for algorithm '" + label + "'");
  }
};

/// theta0 uniform on the sphere of radius r around theta*, from its own stream.
inline ParamVector initial_point(const ParamVector& theta_star, double radius, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x1d1u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  ParamVector u(theta_star.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = normal(rng);
  return theta_star + radius * u / u.norm();
}

/// Scale used by an EGD run at sample size n.
inline double resolve_beta(const AlgorithmSpec& a, std::int64_t n, int d) {
  if (a.algorithm != Algorithm::Egd) return 1.0;
  if (!a.auto_beta) return a.beta;
  return sample_size_dependent_beta(a.eta, a.c1, noise_level(n, d, a.delta));
}

/// Minimum over t >= 1 of the estimation error and where it is reached. For
/// monotone baselines the iteration count is the first t within `monotone_slack`
/// of the minimum rather than the argmin itself.
inline CellOutcome summarize_trajectory(const Trajectory& traj, const ParamVector& theta_star, bool sign_symmetric,
                                        bool monotone, double monotone_slack = 1.5) {
  CellOutcome c;
  std::vector<double> errs;
  std::vector<std::int64_t> ts;
  double final_error = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : traj.records) {
    if (r.t < 1) continue;
    if (detail::past_threshold(r.theta, traj.divergence_threshold)) continue;
    const double e = estimation_error(r.theta, theta_star, sign_symmetric);
    errs.push_back(e);
    ts.push_back(r.t);
    final_error = e;
  }
  detail::require(!errs.empty(), "trajectory has no finite iterate after t = 0");
  const auto it = std::min_element(errs.begin(), errs.end());
  c.min_error = *it;
  c.iters_to_min = ts[static_cast<std::size_t>(it - errs.begin())];
  if (monotone) {
    for (std::size_t i = 0; i < errs.size(); ++i) {
      if (errs[i] <= monotone_slack * c.min_error) {
        c.iters_to_min = ts[i];
        break;
      }
    }
  }
  c.final_error = final_error;
  c.terminated_by = traj.terminated_by;
  c.records = static_cast<std::int64_t>(traj.records.size());
  c.ok = true;
  return c;
}

namespace detail {

template <class Dataset>
std::vector<CellOutcome> run_cell(const RateStudySpec& spec, const Dataset& data, const ParamVector& theta0,
                                  std::int64_t n) {
  std::vector<CellOutcome> out;
  const Objective objective = ModelTraits<Dataset>::objective(data);
  const bool symmetric = ModelTraits<Dataset>::sign_symmetric(data);
  for (const auto& a : spec.algorithms) {
    CellOutcome c;
    try {
      OptimizerConfig cfg;
      const double beta = resolve_beta(a, n, spec.d);
      cfg.schedule = a.algorithm == Algorithm::Egd ? StepSchedule::exponential(a.eta, beta) : StepSchedule::fixed(a.eta);
      cfg.max_iters = a.max_iters;
      cfg.gradient_tolerance = a.gradient_tolerance;
      const Trajectory traj = run_algorithm(a.algorithm, data, objective, theta0, cfg);
      c = summarize_trajectory(traj, data.spec.theta_star, symmetric, a.algorithm != Algorithm::Egd);
      c.beta = beta;
    } catch (const std::exception& e) {
      c.ok = false;
      c.error = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Runs `job(i)` for i in [0, count) on up to `threads` workers.
template <class Job>
void parallel_for(std::size_t count, int threads, Job&& job) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline PerN aggregate(std::int64_t n, const std::vector<CellOutcome>& cells) {
  PerN row;
  row.n = n;
  std::vector<double> logs, iters;
  for (const auto& c : cells) {
    if (!c.ok || !(c.min_error > 0.0)) {
      ++row.failures;
      continue;
    }
    logs.push_back(std::log(c.min_error));
    iters.push_back(static_cast<double>(c.iters_to_min));
  }
  row.successes = static_cast<int>(logs.size());
  if (logs.empty()) return row;
  auto mean_sem = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return std::pair{m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
  };
  const auto [lm, lse] = mean_sem(logs);
  row.min_error_mean = std::exp(lm);
  row.min_error_stderr = row.min_error_mean * lse;
  const auto [im, ise] = mean_sem(iters);
  row.iters_to_min_mean = im;
  row.iters_to_min_stderr = ise;
  return row;
}

}  // namespace detail

/// For every n and replicate: draw data with seed base_seed + replicate, start
/// every algorithm from the same theta0, and record the trajectory's minimum
/// error and when it is reached. Results are independent of thread count.
inline RateStudyReport rate_study(const RateStudySpec& spec) {
  spec.validate();
  const std::size_t n_count = spec.n_grid.size();
  const auto reps = static_cast<std::size_t>(spec.replicates);
  std::vector<std::vector<CellOutcome>> raw(n_count * reps);

  detail::parallel_for(raw.size(), spec.threads, [&](std::size_t idx) {
    const std::size_t ni = idx / reps;
    const std::size_t rep = idx % reps;
    const std::int64_t n = spec.n_grid[ni];
    const std::uint64_t seed = spec.base_seed + rep;
    const ParamVector theta_star = spec.theta_star(n);
    const ParamVector theta0 = initial_point(theta_star, spec.init_radius, seed);
    try {
      if (spec.family == ModelFamily::Glm) {
        const GlmDataset data = generate_glm(GlmSpec{spec.d, spec.p, theta_star, spec.sigma, n}, seed);
        raw[idx] = detail::run_cell(spec, data, theta0, n);
      } else {
        const GmmDataset data = generate_gmm(GmmSpec{spec.d, theta_star, spec.sigma, n}, seed);
        raw[idx] = detail::run_cell(spec, data, theta0, n);
      }
    } catch (const std::exception& e) {
      raw[idx].assign(spec.algorithms.size(), CellOutcome{false, e.what()});
    }
  });

  RateStudyReport report;
  report.spec = spec;
  for (std::size_t a = 0; a < spec.algorithms.size(); ++a) {
    RateStudyResult res;
    res.algorithm = spec.algorithms[a].label;
    res.n_grid = spec.n_grid;
    res.cells.resize(n_count);
    std::vector<double> ns, errs, iters;
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const CellOutcome& c = raw[ni * reps + rep][a];
        res.cells[ni].push_back(c);
        if (!c.ok) {
          report.failures.push_back(res.algorithm + " n=" + std::to_string(spec.n_grid[ni]) +
                                    " replicate=" + std::to_string(rep) + " seed=" +
                                    std::to_string(spec.base_seed + rep) + ": " + c.error);
        }
      }
      const PerN row = detail::aggregate(spec.n_grid[ni], res.cells[ni]);
      res.per_n.push_back(row);
      if (row.successes > 0) {
        ns.push_back(static_cast<double>(row.n));
        errs.push_back(row.min_error_mean);
        iters.push_back(std::max(row.iters_to_min_mean, 1.0));
      }
    }
    if (ns.size() >= 3) {
      res.loglog_error_slope = fit_loglog(ns, errs);
      res.loglog_iters_slope = fit_loglog(ns, iters);
    }
    report.results.push_back(std::move(res));
  }
  return report;
}

}  // namespace egd
