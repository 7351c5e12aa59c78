#include "egd/analysis.hpp"
#include "egd/io.hpp"
#include "egd/objectives.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace egd;

namespace {

ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Trajectory run(const Objective& obj, double theta0, StepSchedule s, std::int64_t max_iters, double tol = 0.0) {
  OptimizerConfig cfg;
  cfg.schedule = s;
  cfg.max_iters = max_iters;
  cfg.gradient_tolerance = tol;
  return run_optimizer(obj, ParamVector::Constant(obj.dim, theta0), cfg, obj.optimum);
}

Trajectory scaled(Trajectory t, double c) {
  for (auto& r : t.records)
    if (r.dist_to_optimum) *r.dist_to_optimum *= c;
  return t;
}

RateStudySpec small_study(int threads) {
  RateStudySpec s;
  s.family = ModelFamily::Gmm;
  s.regime = Regime::LowSnr;
  s.n_grid = {256, 512, 1024, 2048};
  s.replicates = 5;
  s.threads = threads;
  AlgorithmSpec egd;
  egd.label = "egd";
  egd.eta = 0.001;
  egd.beta = 0.9;
  egd.max_iters = 300;
  AlgorithmSpec em;
  em.label = "em";
  em.algorithm = Algorithm::Em;
  em.eta = 1.0;
  em.max_iters = 300;
  em.gradient_tolerance = 1e-6;
  s.algorithms = {egd, em};
  return s;
}

std::string study_csv(const RateStudyReport& r) {
  std::ostringstream os;
  write_rate_study_csv(os, r);
  return os.str();
}

}  // namespace

TEST(FitLoglog, ExactPowerLaw) {
  for (double k : {-1.5, -0.25, 0.5, 2.0}) {
    std::vector<double> xs, ys;
    for (int i = 1; i <= 20; ++i) {
      xs.push_back(1.7 * i);
      ys.push_back(3.0 * std::pow(1.7 * i, k));
    }
    const auto f = fit_loglog(xs, ys);
    EXPECT_NEAR(f.slope, k, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    EXPECT_EQ(f.n_points, 20);
    EXPECT_DOUBLE_EQ(f.t_lo, 1.7);
    EXPECT_DOUBLE_EQ(f.t_hi, 34.0);
  }
}

TEST(FitLoglog, Constant) {
  const auto f = fit_loglog({1, 2, 4, 8}, {5, 5, 5, 5});
  EXPECT_NEAR(f.slope, 0.0, 1e-15);
}

TEST(FitLoglog, NoisyPowerLaw) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  std::vector<double> xs, ys;
  for (int i = 0; i < 50; ++i) {
    const double x = std::pow(10.0, 0.1 * i);
    xs.push_back(x);
    ys.push_back(2.0 * std::pow(x, -0.5) * (1.0 + u(rng)));
  }
  EXPECT_NEAR(fit_loglog(xs, ys).slope, -0.5, 0.02);
}

TEST(FitLoglog, Errors) {
  EXPECT_THROW(fit_loglog({1, 2, 3}, {1, 0, 2}), ContractViolation);
  EXPECT_THROW(fit_loglog({1, -2, 3}, {1, 1, 2}), ContractViolation);
  EXPECT_THROW(fit_loglog({1, 2}, {1, 2}), ContractViolation);
  EXPECT_THROW(fit_loglog({1, 2, 3}, {1, 2}), ContractViolation);
}

TEST(FitGeometric, ExactSequence) {
  std::vector<double> ts, es;
  for (int t = 0; t < 100; ++t) {
    ts.push_back(t);
    es.push_back(std::pow(0.9, t));
  }
  const auto f = fit_geometric(ts, es);
  EXPECT_NEAR(f.ratio(), 0.9, 1e-12);
  EXPECT_NEAR(f.slope, std::log(0.9), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_THROW(fit_geometric({1, 2, 3}, {1, -1, 1}), ContractViolation);
}

TEST(FitGeometric, EgdOnQuarticMatchesBetaToOneOverAlpha) {
  const auto t = run(power_norm_objective(2, 1), 1.0, StepSchedule::exponential(0.01, 0.9), 2000);
  const auto c = classify_convergence_detail(t);
  ASSERT_TRUE(c.geometric.has_value());
  EXPECT_LE(std::abs(c.geometric->ratio() / std::sqrt(0.9) - 1.0), 0.05);
  EXPECT_GE(c.geometric->r_squared, 0.99);
}

TEST(FitGeometric, GdOnQuarticIsNotGeometric) {
  const auto t = run(power_norm_objective(2, 1), 1.0, StepSchedule::fixed(0.01), 10000);
  auto [ts, es] = error_window(t, 100, 1e4);
  EXPECT_LT(fit_geometric(ts, es).r_squared, 0.9);
  const auto ll = fit_loglog(ts, es);
  EXPECT_GE(ll.r_squared, 0.99);
  EXPECT_NEAR(ll.slope, -0.5, 0.1);
}

TEST(Classify, Examples) {
  EXPECT_EQ(classify_convergence(run(power_norm_objective(2, 1), 1.0, StepSchedule::exponential(0.01, 0.9), 2000)),
            ConvergenceClass::Linear);
  EXPECT_EQ(classify_convergence(run(power_norm_objective(2, 1), 1.0, StepSchedule::fixed(0.01), 100000)),
            ConvergenceClass::Sublinear);
  EXPECT_EQ(classify_convergence(run(quadratic_objective(1), 1.0, StepSchedule::exponential(0.05, 0.9), 100)),
            ConvergenceClass::TwoPhase);
}

TEST(Classify, DivergedWithoutRebound) {
  // Fixed step above 2/c1 grows monotonically: no interior minimum.
  const auto t = run(quadratic_objective(1), 1.0, StepSchedule::fixed(2.05), 1000);
  ASSERT_EQ(t.terminated_by, Termination::Diverged);
  ASSERT_GE(t.records.size(), 30u);
  EXPECT_EQ(classify_convergence(t), ConvergenceClass::Diverged);
}

TEST(Classify, TooFewRecords) {
  EXPECT_THROW(classify_convergence(run(quadratic_objective(1), 1.0, StepSchedule::fixed(0.1), 20)),
               ContractViolation);
  Trajectory no_dist = run(quadratic_objective(1), 1.0, StepSchedule::fixed(0.1), 50);
  for (auto& r : no_dist.records) r.dist_to_optimum.reset();
  EXPECT_THROW(classify_convergence(no_dist), ContractViolation);
}

TEST(Classify, InvariantToRescaling) {
  const std::vector<Trajectory> trajs{
      run(power_norm_objective(2, 1), 1.0, StepSchedule::exponential(0.01, 0.9), 2000),
      run(power_norm_objective(2, 1), 1.0, StepSchedule::fixed(0.01), 20000),
      run(power_norm_objective(4, 1), 1.0, StepSchedule::exponential(0.01, 0.9), 3000),
      run(quadratic_objective(1), 1.0, StepSchedule::exponential(0.05, 0.9), 100),
      run(quadratic_objective(1), 1.0, StepSchedule::fixed(2.05), 1000)};
  for (const auto& t : trajs) {
    const auto base = classify_convergence(t);
    for (double c : {1e-6, 0.37, 8.0, 1e5}) EXPECT_EQ(classify_convergence(scaled(t, c)), base) << c;
  }
}

TEST(FiniteDifferenceCheck, QuadraticIsExact) {
  const auto pts = log_radius_points(ParamVector::Zero(3), 1e-2, 2.0, 100, 1);
  EXPECT_LE(finite_difference_check(quadratic_objective(3), pts, 1e-6).max_rel_err, 1e-9);
}

TEST(FiniteDifferenceCheck, DetectsWrongGradient) {
  Objective bad = power_norm_objective(2, 2);
  bad.fused = nullptr;
  const auto good_grad = bad.gradient;
  bad.gradient = [good_grad](const ParamVector& th) { return ParamVector(1.1 * good_grad(th)); };
  const auto chk = finite_difference_check(bad, log_radius_points(ParamVector::Zero(2), 0.1, 2.0, 50, 2), 1e-6);
  EXPECT_NEAR(chk.max_rel_err, 0.1 / 1.1, 1e-4);
  EXPECT_EQ(chk.worst_point.size(), 2);
  EXPECT_THROW(finite_difference_check(bad, {vec({1.0, 1.0})}, 0.0), ContractViolation);
}

TEST(EstimationError, SignInvariance) {
  const ParamVector star = vec({1.0, 0.0});
  EXPECT_DOUBLE_EQ(estimation_error(vec({-1.0, 0.1}), star, true), 0.1);
  EXPECT_DOUBLE_EQ(estimation_error(vec({-1.0, 0.0}), star, false), 2.0);
}

TEST(CrossValidation, NoiselessLinearModelRecoversTruth) {
  const ParamVector star = vec({0.5, -0.3, 0.2});
  const auto data = generate_glm(GlmSpec{3, 1, star, 0.0, 500}, 3);
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::fixed(0.2);
  cfg.max_iters = 500;
  const auto cv = cross_validated_stop(data, ParamVector::Zero(3), cfg, 0.9, 5);
  EXPECT_LE((cv.selected_theta - star).norm(), 1e-6);
  EXPECT_EQ(cv.val_curve.size(), cv.trajectory.records.size());
}

TEST(CrossValidation, NeverSelectsDivergedIterate) {
  const auto data = generate_glm(GlmSpec{4, 2, ParamVector::Zero(4), 1.0, 1000}, 6);
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(0.05, 0.7);
  cfg.max_iters = 1000;
  const auto cv = cross_validated_stop(data, vec({0.5, 0.0, 0.0, 0.0}), cfg, 0.9, 7);
  ASSERT_EQ(cv.trajectory.terminated_by, Termination::Diverged);
  EXPECT_TRUE(std::isinf(cv.val_curve.back()));
  EXPECT_LT(cv.selected_t, cv.trajectory.records.back().t);
  EXPECT_LE(cv.selected_theta.norm(), cv.trajectory.divergence_threshold);
  EXPECT_EQ(cv.val_curve.size(), cv.trajectory.records.size());
}

TEST(CrossValidation, LowSnrGlmSelectsNearOracle) {
  int good = 0;
  constexpr int reps = 10;
  for (int r = 0; r < reps; ++r) {
    const auto data = generate_glm(GlmSpec{4, 2, ParamVector::Zero(4), 1.0, 4096}, 100 + r);
    OptimizerConfig cfg;
    cfg.schedule = StepSchedule::exponential(0.001, 0.9);
    cfg.max_iters = 1000;
    const ParamVector theta0 = initial_point(ParamVector::Zero(4), 0.5, 100 + r);
    const auto cv = cross_validated_stop(data, theta0, cfg, 0.9, 100 + r);
    const auto oracle = summarize_trajectory(cv.trajectory, ParamVector::Zero(4), true, false);
    EXPECT_TRUE(std::isfinite(cv.val_curve[static_cast<std::size_t>(cv.selected_t)]));
    if (cv.selected_theta.norm() <= 3.0 * oracle.min_error) ++good;
  }
  EXPECT_GE(good, 8);
}

TEST(CrossValidation, Errors) {
  const auto data = generate_glm(GlmSpec{2, 1, ParamVector::Zero(2), 1.0, 9}, 1);
  OptimizerConfig cfg;
  EXPECT_THROW(cross_validated_stop(data, ParamVector::Zero(2), cfg, 0.9, 1), ContractViolation);
  const auto ok = generate_glm(GlmSpec{2, 1, ParamVector::Zero(2), 1.0, 10}, 1);
  EXPECT_THROW(cross_validated_stop(ok, ParamVector::Zero(2), cfg, 1.0, 1), ContractViolation);
  EXPECT_THROW(cross_validated_stop(ok, ParamVector::Zero(2), cfg, 0.05, 1), ContractViolation);
}

TEST(CrossValidation, WorksWithEm) {
  const auto data = generate_gmm(GmmSpec{2, vec({2.0, 0.0}), 1.0, 2000}, 4);
  OptimizerConfig cfg;
  cfg.max_iters = 200;
  cfg.gradient_tolerance = 1e-8;
  const auto cv = cross_validated_stop(data, vec({1.0, 1.0}), cfg, 0.9, 1, Algorithm::Em);
  EXPECT_LE(estimation_error(cv.selected_theta, vec({2.0, 0.0}), true), 0.2);
}

TEST(RunAlgorithm, EmOnlyForMixture) {
  const auto data = generate_glm(GlmSpec{2, 2, ParamVector::Zero(2), 1.0, 100}, 1);
  const Objective obj = glm_objective(data);
  EXPECT_THROW(run_algorithm(Algorithm::Em, data, obj, vec({0.1, 0.1}), OptimizerConfig{}), ContractViolation);
}

TEST(RunAlgorithm, EmRecordsMatchEmSteps) {
  const auto data = generate_gmm(GmmSpec{2, vec({1.0, 0.0}), 1.0, 300}, 2);
  const Objective obj = gmm_objective(data);
  OptimizerConfig cfg;
  cfg.max_iters = 5;
  const auto t = run_algorithm(Algorithm::Em, data, obj, vec({0.3, 0.4}), cfg);
  ParamVector th = vec({0.3, 0.4});
  for (const auto& r : t.records) {
    EXPECT_TRUE((r.theta.array() == th.array()).all());
    EXPECT_EQ(r.effective_step, 1.0);
    th = em_step(th, data);
  }
}

TEST(InitialPoint, OnSphere) {
  const ParamVector star = vec({3.0, 0.0, 0.0, 0.0});
  for (std::uint64_t s = 1; s < 20; ++s) EXPECT_NEAR((initial_point(star, 0.5, s) - star).norm(), 0.5, 1e-15);
  EXPECT_TRUE((initial_point(star, 0.5, 4).array() == initial_point(star, 0.5, 4).array()).all());
}

TEST(SummarizeTrajectory, MonotoneUsesSlack) {
  Trajectory t;
  const double errs[] = {1.0, 0.5, 0.2, 0.12, 0.105, 0.1};
  for (int i = 0; i < 6; ++i) {
    IterateRecord r;
    r.t = i;
    r.theta = vec({errs[i]});
    t.records.push_back(r);
  }
  const auto egd = summarize_trajectory(t, vec({0.0}), false, false);
  EXPECT_EQ(egd.iters_to_min, 5);
  EXPECT_DOUBLE_EQ(egd.min_error, 0.1);
  const auto gd = summarize_trajectory(t, vec({0.0}), false, true);
  EXPECT_EQ(gd.iters_to_min, 3);
  EXPECT_DOUBLE_EQ(gd.final_error, 0.1);
}

TEST(RateStudy, DeterministicAcrossThreadCounts) {
  const auto a = rate_study(small_study(1));
  const auto b = rate_study(small_study(3));
  EXPECT_EQ(study_csv(a), study_csv(b));
  EXPECT_EQ(rate_study_to_json(a).dump(), rate_study_to_json(b).dump());
  EXPECT_TRUE(a.failures.empty());
  ASSERT_EQ(a.results.size(), 2u);
  for (const auto& r : a.results) {
    ASSERT_EQ(r.per_n.size(), 4u);
    EXPECT_TRUE(r.loglog_error_slope.has_value());
    for (const auto& row : r.per_n) {
      EXPECT_EQ(row.successes, 5);
      EXPECT_GE(row.min_error_stderr, 0.0);
    }
  }
}

TEST(RateStudy, CsvSchema) {
  const auto a = rate_study(small_study(1));
  const auto s = study_csv(a);
  EXPECT_EQ(s.substr(0, s.find('\n')), "n,min_error_mean,min_error_stderr,iters_to_min_mean,iters_to_min_stderr,algorithm");
  const auto j = rate_study_to_json(a);
  EXPECT_TRUE(j["results"][0].contains("loglog_error_slope"));
  EXPECT_TRUE(j["results"][0].contains("loglog_iters_slope"));
}

TEST(RateStudy, FailuresAreCountedNotDropped) {
  auto spec = small_study(1);
  spec.algorithms[0].eta = 1e6;  // first step leaves the divergence ball
  spec.algorithms[0].label = "egd_blowup";
  const auto r = rate_study(spec);
  EXPECT_EQ(r.failures.size(), 20u);
  EXPECT_NE(r.failures[0].find("seed="), std::string::npos);
  const auto& bad = r.result("egd_blowup");
  for (const auto& row : bad.per_n) {
    EXPECT_EQ(row.failures, 5);
    EXPECT_EQ(row.successes, 0);
  }
  EXPECT_FALSE(bad.loglog_error_slope.has_value());
  for (const auto& row : r.result("em").per_n) EXPECT_EQ(row.successes, 5);
}

TEST(RateStudy, Preconditions) {
  auto s = small_study(1);
  s.replicates = 4;
  EXPECT_THROW(rate_study(s), ContractViolation);
  s = small_study(1);
  s.n_grid = {256, 512, 1024};
  EXPECT_THROW(rate_study(s), ContractViolation);
  s = small_study(1);
  s.n_grid = {256, 1024, 512, 2048};
  EXPECT_THROW(rate_study(s), ContractViolation);
  s = small_study(1);
  s.family = ModelFamily::Glm;
  EXPECT_THROW(rate_study(s), ContractViolation);
}

TEST(RateStudy, MiddleSnrSignal) {
  RateStudySpec s;
  s.regime = Regime::MiddleSnr;
  EXPECT_NEAR(s.theta_star(4096)[0], std::pow(4.0 / 4096.0, 1.0 / 6.0), 1e-15);
  s.regime = Regime::HighSnr;
  s.sigma = 2.0;
  EXPECT_DOUBLE_EQ(s.theta_star(10)[0], 6.0);
}
