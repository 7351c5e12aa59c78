// Self-contained verification suite: gradient checks, homogeneity and
// stability probes, EM identities, and structural properties of the optimizer.

#pragma once

#include "egd/analysis.hpp"
#include "egd/objectives.hpp"
#include "egd/stat_models.hpp"

#include <functional>
#include <string>
#include <vector>

namespace egd {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string criterion;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int gradient_points = 100;
  double fd_h_rel = 1e-6;
  /// Step for the statistical losses, whose values carry O(1) constants.
  double fd_model_h_rel = 1e-5;
  double fd_tolerance = 1e-5;
  int homogeneity_samples = 200;
  std::int64_t stability_n = 4096;
};

namespace detail {

inline VerifyCheck upper_check(std::string name, double value, double limit, std::string detail = {}) {
  VerifyCheck c;
  c.name = std::move(name);
  c.value = value;
  c.passed = std::isfinite(value) && value <= limit;
  c.criterion = "<= " + format_double(limit);
  c.detail = std::move(detail);
  return c;
}

inline VerifyCheck band_check(std::string name, double value, double lo, double hi, std::string detail = {}) {
  VerifyCheck c;
  c.name = std::move(name);
  c.value = value;
  c.passed = std::isfinite(value) && value >= lo && value <= hi;
  c.criterion = "in [" + format_double(lo) + ", " + format_double(hi) + "]";
  c.detail = std::move(detail);
  return c;
}

inline VerifyCheck flag_check(std::string name, bool ok, std::string detail = {}) {
  VerifyCheck c;
  c.name = std::move(name);
  c.value = ok ? 1.0 : 0.0;
  c.passed = ok;
  c.criterion = "true";
  c.detail = std::move(detail);
  return c;
}

/// Records whose iterate has a given coordinate, as |theta_i| against t.
inline std::pair<std::vector<double>, std::vector<double>> coordinate_errors(const Trajectory& traj, Eigen::Index i,
                                                                           std::int64_t t_lo) {
  std::vector<double> ts, es;
  std::size_t imin = 0;
  for (std::size_t k = 0; k < traj.records.size(); ++k)
    if (std::abs(traj.records[k].theta[i]) < std::abs(traj.records[imin].theta[i])) imin = k;
  for (std::size_t k = 0; k <= imin; ++k) {
    const auto& r = traj.records[k];
    const double e = std::abs(r.theta[i]);
    if (r.t < t_lo || !(e > 0.0)) continue;
    ts.push_back(static_cast<double>(r.t));
    es.push_back(e);
  }
  return {ts, es};
}

}  // namespace detail

/// EGD on the diagonal objective compared with independent one-dimensional
/// runs: returns (bitwise equal over the common horizon, per-coordinate ratios).
inline std::pair<bool, std::vector<double>> diagonal_decoupling(const DiagonalSpec& spec, double eta, double beta,
                                                                std::int64_t max_iters, double theta0_value = 1.0) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.alphas.size());
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(eta, beta);
  cfg.max_iters = max_iters;
  cfg.gradient_tolerance = 0.0;
  const ParamVector theta0 = ParamVector::Constant(d, theta0_value);
  const Objective joint = diagonal_objective(spec);
  const Trajectory full = run_optimizer(joint, theta0, cfg, joint.optimum);

  bool equal = true;
  std::vector<double> ratios;
  for (Eigen::Index i = 0; i < d; ++i) {
    const Objective single = diagonal_objective(DiagonalSpec{{spec.alphas[static_cast<std::size_t>(i)]}});
    OptimizerConfig one = cfg;
    one.divergence_threshold = full.divergence_threshold;
    const Trajectory traj = run_optimizer(single, ParamVector::Constant(1, theta0_value), one, single.optimum);
    const std::size_t common = std::min(traj.records.size(), full.records.size());
    for (std::size_t k = 0; k < common; ++k) {
      if (traj.records[k].theta[0] != full.records[k].theta[i]) {
        equal = false;
        break;
      }
    }
    auto [ts, es] = detail::coordinate_errors(full, i, 5);
    ratios.push_back(ts.size() >= 3 ? fit_geometric(ts, es).ratio() : std::numeric_limits<double>::quiet_NaN());
  }
  return {equal, ratios};
}

/// max eigenvalue / min eigenvalue of the analytic Hessian at (s, s).
inline double nondiagonal_eigen_ratio(double s) {
  const Objective obj = nondiagonal_example();
  ParamVector theta(2);
  theta << s, s;
  const ParamVector ev = symmetric_eigenvalues(obj.hessian(theta));
  return ev.maxCoeff() / ev.minCoeff();
}

/// Iterates EM to a fixed point; returns (|grad| at the fixed point, |EM(theta) - theta|).
inline std::pair<double, double> em_fixed_point_identity(const GmmDataset& data, const ParamVector& theta0,
                                                        int max_iters = 10000) {
  ParamVector theta = theta0;
  for (int k = 0; k < max_iters; ++k) {
    const ParamVector next = em_step(theta, data);
    const double moved = (next - theta).norm();
    theta = next;
    if (moved < 1e-14) break;
  }
  return {gmm_gradient(theta, data).norm(), (em_step(theta, data) - theta).norm()};
}

inline std::vector<VerifyCheck> run_verify_suite(const VerifyOptions& opt = {},
                                                 const std::function<void(const VerifyCheck&)>& on_check = {}) {
  std::vector<VerifyCheck> checks;
  auto add = [&](VerifyCheck c) {
    if (on_check) on_check(c);
    checks.push_back(std::move(c));
  };
  const auto seed = opt.seed;

  // Gradient checks against central differences.
  {
    auto analytic_points = [&](int d, std::uint64_t s) {
      return log_radius_points(ParamVector::Zero(d), 1e-2, 2.0, opt.gradient_points, s);
    };
    auto fd = [&](const std::string& name, const Objective& obj, const std::vector<ParamVector>& pts,
                  double h_rel) {
      const GradientCheck gc = finite_difference_check(obj, pts, h_rel);
      add(detail::upper_check("gradient/" + name, gc.max_rel_err, opt.fd_tolerance));
    };
    fd("power_norm_p2", power_norm_objective(2, 3), analytic_points(3, seed), opt.fd_h_rel);
    fd("power_norm_p4", power_norm_objective(4, 3), analytic_points(3, seed + 1), opt.fd_h_rel);
    fd("quadratic", quadratic_objective(3), analytic_points(3, seed + 2), opt.fd_h_rel);
    fd("diagonal", diagonal_objective(DiagonalSpec{{2.0, 3.0}}), analytic_points(2, seed + 3), opt.fd_h_rel);
    fd("nondiagonal", nondiagonal_example(), analytic_points(2, seed + 4), opt.fd_h_rel);

    ParamVector star = ParamVector::Zero(4);
    star[0] = 1.0;
    const auto model_points = log_radius_points(ParamVector::Zero(4), 1e-3, 2.0, opt.gradient_points, seed + 5);
    const GlmDataset glm = generate_glm(GlmSpec{4, 2, star, 1.0, 512}, seed);
    fd("glm", glm_objective(glm), model_points, opt.fd_model_h_rel);
    const GmmDataset gmm = generate_gmm(GmmSpec{4, star, 1.0, 512}, seed);
    fd("gmm", gmm_objective(gmm), model_points, opt.fd_model_h_rel);
    const auto population_points = log_radius_points(ParamVector::Zero(4), 1e-2, 2.0, opt.gradient_points, seed + 6);
    fd("glm_population", glm_population_objective_low_snr(4, 2, 1.0), population_points, opt.fd_model_h_rel);
    fd("gmm_population", gmm_population_objective(star, 1.0), population_points, opt.fd_model_h_rel);
  }

  // Homogeneity of the low-SNR GLM population loss at two radii.
  {
    const Objective pop = glm_population_objective_low_snr(4, 2, 1.0);
    const double alpha = 2.0;
    const HomogeneityEstimate wide = probe_homogeneity(pop, alpha, 0.5, opt.homogeneity_samples, seed);
    const HomogeneityEstimate narrow = probe_homogeneity(pop, alpha, 0.05, opt.homogeneity_samples, seed + 1);
    const bool finite = std::isfinite(wide.c1_hat) && std::isfinite(wide.c2_hat) && std::isfinite(narrow.c1_hat) &&
                        std::isfinite(narrow.c2_hat) && wide.c2_hat > 0.0 && narrow.c2_hat > 0.0;
    add(detail::flag_check("homogeneity/glm_finite", finite,
                           "c1_hat=" + format_double(wide.c1_hat) + " c2_hat=" + format_double(wide.c2_hat)));
    add(detail::upper_check("homogeneity/glm_violations_outside_core",
                            static_cast<double>((wide.violations - wide.core_excluded) +
                                                (narrow.violations - narrow.core_excluded)),
                            0.0));
    add(detail::upper_check("homogeneity/glm_c1_radius_ratio", std::abs(wide.c1_hat / narrow.c1_hat - 1.0), 0.2));
    add(detail::upper_check("homogeneity/glm_c2_radius_ratio", std::abs(wide.c2_hat / narrow.c2_hat - 1.0), 0.2));

    const Objective gpop = gmm_population_objective(ParamVector::Zero(4), 1.0);
    const HomogeneityEstimate g = probe_homogeneity(gpop, 2.0, 0.5, opt.homogeneity_samples, seed + 2);
    add(detail::flag_check("homogeneity/gmm_finite",
                           std::isfinite(g.c1_hat) && std::isfinite(g.c2_hat) && g.c2_hat > 0.0 &&
                               g.violations == g.core_excluded,
                           "c1_hat=" + format_double(g.c1_hat) + " c2_hat=" + format_double(g.c2_hat)));
  }

  // Stability exponents.
  {
    StabilityProbeConfig cfg;
    cfg.base_seed = seed;
    const ParamVector zero = ParamVector::Zero(4);
    const int p = 2;
    const StabilityProfile glm =
        probe_stability(GlmSpec{4, p, zero, 1.0, opt.stability_n},
                        [p](const ParamVector& th) { return glm_population_gradient_low_snr(th, p); }, cfg);
    add(detail::band_check("stability/glm_gamma", glm.gamma, p - 1 - 0.2, p - 1 + 0.2,
                           "c3_hat=" + format_double(glm.c3_hat)));
    const StabilityProfile gmm = probe_stability(
        GmmSpec{4, zero, 1.0, opt.stability_n},
        [&zero](const ParamVector& th) { return gmm_population_gradient(th, zero, 1.0); }, cfg);
    add(detail::band_check("stability/gmm_gamma", gmm.gamma, 0.8, 1.2, "c3_hat=" + format_double(gmm.c3_hat)));
  }

  // EM identities.
  {
    ParamVector star = ParamVector::Zero(4);
    star[0] = 2.0;
    const GmmDataset data = generate_gmm(GmmSpec{4, star, 1.0, 2000}, seed);
    const auto [grad_norm, residual] = em_fixed_point_identity(data, initial_point(star, 0.5, seed));
    add(detail::upper_check("em/fixed_point_is_stationary", grad_norm, 1e-8));
    add(detail::upper_check("em/fixed_point_residual", residual, 1e-8));

    const GmmDataset over = generate_gmm(GmmSpec{4, ParamVector::Zero(4), 1.0, 2000}, seed + 1);
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& th : log_radius_points(ParamVector::Zero(4), 1e-3, 2.0, 100, seed + 2)) {
      worst = std::max(worst, gmm_nll(em_step(th, over), over) - gmm_nll(th, over));
    }
    add(detail::upper_check("em/monotone_nll", worst, 1e-12));
  }

  // Optimizer structure.
  {
    const auto [equal, ratios] = diagonal_decoupling(DiagonalSpec{{2.0, 3.0}}, 0.01, 0.9, 3000);
    add(detail::flag_check("diagonal/bitwise_decoupling", equal));
    const double alphas[] = {2.0, 3.0};
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      const double expected = std::pow(0.9, 1.0 / (2.0 * alphas[i] - 2.0));
      add(detail::upper_check("diagonal/rate_coordinate_" + std::to_string(i),
                              std::abs(ratios[i] / expected - 1.0), 0.05,
                              "ratio=" + format_double(ratios[i]) + " expected=" + format_double(expected)));
    }
    add(detail::band_check("nondiagonal/eigen_ratio_s1e-2", nondiagonal_eigen_ratio(1e-2), 1e3,
                           std::numeric_limits<double>::infinity()));

    const Objective quad = power_norm_objective(2, 2);
    OptimizerConfig a, b;
    a.schedule = StepSchedule::fixed(0.05);
    b.schedule = StepSchedule::exponential(0.05, 1.0);
    a.max_iters = b.max_iters = 200;
    const ParamVector t0 = ParamVector::Constant(2, 0.7);
    const Trajectory ta = run_optimizer(quad, t0, a, quad.optimum);
    const Trajectory tb = run_optimizer(quad, t0, b, quad.optimum);
    bool same = ta.records.size() == tb.records.size();
    for (std::size_t k = 0; same && k < ta.records.size(); ++k) {
      same = ta.records[k].theta == tb.records[k].theta && ta.records[k].objective == tb.records[k].objective &&
             ta.records[k].effective_step == tb.records[k].effective_step;
    }
    add(detail::flag_check("schedule/beta_one_equals_fixed", same));
  }
  return checks;
}

inline bool all_passed(const std::vector<VerifyCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

}  // namespace egd
