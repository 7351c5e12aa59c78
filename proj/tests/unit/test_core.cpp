#include "egd/objectives.hpp"
#include "egd/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace egd;

namespace {

ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::string csv(const Trajectory& t) {
  std::ostringstream os;
  write_trajectory_csv(os, t);
  return os.str();
}

bool bitwise_equal(const Trajectory& a, const Trajectory& b) {
  if (a.records.size() != b.records.size() || a.terminated_by != b.terminated_by) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.t != y.t || x.objective != y.objective || x.grad_norm != y.grad_norm) return false;
    if (x.effective_step != y.effective_step) return false;
    if ((x.theta.array() != y.theta.array()).any()) return false;
  }
  return true;
}

}  // namespace

TEST(EgdStep, SingleStepAtOrigin) {
  EXPECT_DOUBLE_EQ(egd_step(vec({1.0}), vec({1.0}), 0.01, 0.9, 0)[0], 0.99);
}

TEST(EgdStep, ZeroGradientIsFixedPoint) {
  const ParamVector z = ParamVector::Zero(2);
  for (std::int64_t t : {0, 5, 50}) EXPECT_TRUE(egd_step(z, z, 0.3, 0.7, t).isZero(0.0));
}

TEST(EgdStep, StepGrowsAsBetaToMinusT) {
  const double expected = 1.0 - 0.01 / std::pow(0.9, 10);
  EXPECT_NEAR(egd_step(vec({1.0}), vec({1.0}), 0.01, 0.9, 10)[0], expected, 1e-15);
  EXPECT_NEAR(expected, 0.971320, 5e-7);
}

TEST(EgdStep, Errors) {
  EXPECT_THROW(egd_step(vec({1.0, 2.0}), vec({1.0}), 0.1, 0.9, 0), ContractViolation);
  EXPECT_THROW(egd_step(vec({1.0}), vec({1.0}), 0.0, 0.9, 0), ContractViolation);
  EXPECT_THROW(egd_step(vec({1.0}), vec({1.0}), 0.1, 1.5, 0), ContractViolation);
  EXPECT_THROW(egd_step(vec({1.0}), vec({1.0}), 0.1, 0.9, -1), ContractViolation);
  EXPECT_THROW(egd_step(vec({std::numeric_limits<double>::quiet_NaN()}), vec({1.0}), 0.1, 0.9, 0), NumericError);
  EXPECT_THROW(egd_step(vec({1.0}), vec({std::numeric_limits<double>::infinity()}), 0.1, 0.9, 0), NumericError);
}

TEST(GdStep, Examples) {
  EXPECT_DOUBLE_EQ(gd_step(vec({1.0}), vec({1.0}), 0.1)[0], 0.9);
  EXPECT_DOUBLE_EQ(gd_step(vec({2.0}), vec({2.0}), 0.05)[0], 1.9);
  const ParamVector star = vec({0.3, -1.2});
  EXPECT_TRUE((gd_step(star, ParamVector::Zero(2), 0.5).array() == star.array()).all());
  EXPECT_THROW(gd_step(vec({1.0}), vec({1.0, 1.0}), 0.1), ContractViolation);
  EXPECT_THROW(gd_step(vec({1.0}), vec({1.0}), -0.1), ContractViolation);
}

TEST(StepSchedule, EffectiveStepRatioIsOneOverBeta) {
  for (double beta : {0.5, 0.8, 0.9, 0.99}) {
    const auto s = StepSchedule::exponential(0.01, beta);
    for (std::int64_t t = 0; t < 200; ++t) {
      const double r = s.step_at(t + 1) / s.step_at(t);
      EXPECT_NEAR(r, 1.0 / beta, 4.0 * std::numeric_limits<double>::epsilon() / beta) << "t=" << t;
    }
  }
  const auto f = StepSchedule::fixed(0.05);
  EXPECT_EQ(f.step_at(0), 0.05);
  EXPECT_EQ(f.step_at(1000), 0.05);
  EXPECT_THROW(StepSchedule::exponential(0.01, 0.0), ContractViolation);
  EXPECT_THROW(StepSchedule::fixed(0.0), ContractViolation);
}

TEST(NoiseLevel, Examples) {
  EXPECT_NEAR(noise_level(100, 4, std::exp(-1.0)), std::sqrt(0.05), 1e-15);
  EXPECT_NEAR(noise_level(100, 4, std::exp(-1.0)), 0.2236, 1e-4);
  EXPECT_NEAR(noise_level(1, 1, 1.0 - 1e-12), 1.0, 1e-9);
  double prev = noise_level(1, 4, 0.05);
  for (std::int64_t n = 2; n < 1 << 20; n *= 2) {
    const double cur = noise_level(n, 4, 0.05);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_NEAR(prev, std::sqrt((4.0 + std::log(20.0)) / 524288.0), 1e-15);
  EXPECT_THROW(noise_level(10, 4, 0.0), ContractViolation);
  EXPECT_THROW(noise_level(10, 4, 1.0), ContractViolation);
  EXPECT_THROW(noise_level(0, 4, 0.5), ContractViolation);
}

TEST(SampleSizeDependentBeta, Examples) {
  EXPECT_NEAR(sample_size_dependent_beta(0.5, 1.0, std::exp(-8.0)), std::sqrt(0.984375), 1e-15);
  EXPECT_NEAR(sample_size_dependent_beta(0.5, 1.0, std::exp(-8.0)), 0.99216, 1e-5);
  EXPECT_NEAR(sample_size_dependent_beta(1.0 - 1e-9, 1.0, 0.1), 1.0, 1e-12);
  double prev = 0.0;
  for (double eps : {0.3, 0.1, 0.03, 0.01, 1e-3, 1e-6}) {
    const double b = sample_size_dependent_beta(0.1, 1.0, eps);
    EXPECT_GT(b, prev);
    EXPECT_LT(b, 1.0);
    prev = b;
  }
}

TEST(SampleSizeDependentBeta, Errors) {
  // log(1/eps) = 0.1 < (1 - 0.1)^2 / 2 makes beta^2 negative.
  EXPECT_THROW(sample_size_dependent_beta(0.1, 1.0, std::exp(-0.1)), DomainError);
  EXPECT_THROW(sample_size_dependent_beta(0.1, 1.0, 1.5), DomainError);
  EXPECT_THROW(sample_size_dependent_beta(0.1, 10.0, 0.01), ContractViolation);
  EXPECT_THROW(sample_size_dependent_beta(0.1, 1.0, 0.0), ContractViolation);
}

TEST(DivergenceHorizon, Examples) {
  EXPECT_NEAR(divergence_horizon(0.05, 1.0, 0.9), std::log(40.0) / std::log(1.0 / 0.9), 1e-12);
  EXPECT_NEAR(divergence_horizon(0.05, 1.0, 0.9), 35.01, 5e-3);
  EXPECT_EQ(divergence_horizon(2.0, 1.0, 0.9), 0.0);
  EXPECT_EQ(divergence_horizon(1.0, 3.0, 0.9), 0.0);
  EXPECT_TRUE(std::isinf(divergence_horizon(0.05, 1.0, 1.0)));
  EXPECT_GT(divergence_horizon(0.05, 1.0, 0.9999), 1e4);
}

TEST(RunOptimizer, FixedStepQuadraticDecreases) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::fixed(0.05);
  cfg.max_iters = 10;
  const auto obj = quadratic_objective(1);
  const auto t = run_optimizer(obj, vec({1.0}), cfg, obj.optimum);
  ASSERT_EQ(t.records.size(), 11u);
  for (std::size_t i = 1; i < t.records.size(); ++i) {
    EXPECT_LT(t.records[i].objective, t.records[i - 1].objective);
    EXPECT_NEAR(t.records[i].theta[0], std::pow(0.95, static_cast<double>(i)), 1e-15);
  }
  EXPECT_EQ(t.terminated_by, Termination::MaxIters);
}

TEST(RunOptimizer, TwoPhaseOnQuadratic) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(0.05, 0.9);
  cfg.max_iters = 100;
  cfg.divergence_threshold = 10.0;
  const auto obj = quadratic_objective(1);
  const auto t = run_optimizer(obj, vec({1.0}), cfg, obj.optimum);
  EXPECT_EQ(t.terminated_by, Termination::Diverged);
  EXPECT_LT(t.records.back().t, 100);
  EXPECT_GT(t.records.back().theta.norm(), 10.0);

  const auto errs = t.errors();
  const auto imin = std::min_element(errs.begin(), errs.end()) - errs.begin();
  const double horizon = divergence_horizon(0.05, 1.0, 0.9);
  EXPECT_LE(std::abs(static_cast<double>(t.records[imin].t) - horizon), 5.0);
  // Non-increasing objective up to the horizon.
  for (std::size_t i = 1; i < t.records.size() && static_cast<double>(t.records[i].t) <= horizon; ++i)
    EXPECT_LE(t.records[i].objective, t.records[i - 1].objective) << "t=" << t.records[i].t;
}

TEST(RunOptimizer, DescentWindowAcrossSchedules) {
  const auto obj = quadratic_objective(1);
  for (double eta : {0.01, 0.05, 0.2}) {
    for (double beta : {0.8, 0.9, 0.95}) {
      OptimizerConfig cfg;
      cfg.schedule = StepSchedule::exponential(eta, beta);
      cfg.max_iters = 2000;
      cfg.gradient_tolerance = 0.0;
      const auto t = run_optimizer(obj, vec({1.0}), cfg, obj.optimum);
      const double horizon = divergence_horizon(eta, 1.0, beta);
      const auto errs = t.errors();
      const auto imin = std::min_element(errs.begin(), errs.end()) - errs.begin();
      EXPECT_LE(std::abs(static_cast<double>(t.records[imin].t) - horizon), 5.0) << eta << " " << beta;
      for (std::size_t i = 1; i < t.records.size() && static_cast<double>(t.records[i].t) <= horizon; ++i)
        EXPECT_LE(t.records[i].objective, t.records[i - 1].objective);
    }
  }
}

TEST(RunOptimizer, QuarticReachesTinyErrorWithoutGradientStop) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(0.01, 0.9);
  cfg.max_iters = 400;
  cfg.gradient_tolerance = 0.0;
  const auto obj = power_norm_objective(2, 1);
  const auto t = run_optimizer(obj, vec({1.0}), cfg, obj.optimum);
  EXPECT_LT(*t.records.back().dist_to_optimum, 1e-8);
}

TEST(RunOptimizer, QuarticStopsOnVanishingGradientByDefault) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(0.01, 0.9);
  cfg.max_iters = 400;
  const auto obj = power_norm_objective(2, 1);
  const auto t = run_optimizer(obj, vec({1.0}), cfg, obj.optimum);
  EXPECT_EQ(t.terminated_by, Termination::GradientVanished);
  EXPECT_LT(t.records.back().grad_norm, 1e-14);
}

TEST(RunOptimizer, RecordInvariants) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(0.02, 0.85);
  cfg.max_iters = 300;
  const auto obj = power_norm_objective(3, 2);
  const auto t = run_optimizer(obj, vec({0.7, -0.4}), cfg, obj.optimum);
  ASSERT_LE(t.records.size(), 301u);
  EXPECT_EQ(t.records.front().t, 0);
  EXPECT_TRUE((t.records.front().theta.array() == vec({0.7, -0.4}).array()).all());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    if (i) EXPECT_GT(r.t, t.records[i - 1].t);
    EXPECT_GE(r.grad_norm, 0.0);
    EXPECT_GT(r.effective_step, 0.0);
    EXPECT_NEAR(r.effective_step, 0.02 / std::pow(0.85, static_cast<double>(r.t)), 1e-12 * r.effective_step);
    ASSERT_TRUE(r.dist_to_optimum.has_value());
  }
  const auto no_opt = run_optimizer(obj, vec({0.7, -0.4}), cfg);
  for (const auto& r : no_opt.records) EXPECT_FALSE(r.dist_to_optimum.has_value());
}

TEST(RunOptimizer, DivergedLastRecordExceedsThreshold) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::fixed(2.5);
  cfg.max_iters = 1000;
  const auto obj = quadratic_objective(2);
  const auto t = run_optimizer(obj, vec({1.0, 1.0}), cfg, obj.optimum);
  EXPECT_EQ(t.terminated_by, Termination::Diverged);
  EXPECT_DOUBLE_EQ(t.divergence_threshold, 10.0 * std::sqrt(2.0));
  EXPECT_GT(t.records.back().theta.norm(), t.divergence_threshold);
}

TEST(RunOptimizer, DefaultThresholdUsesUnitFloor) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::fixed(2.5);
  cfg.max_iters = 1000;
  const auto t = run_optimizer(quadratic_objective(1), vec({0.1}), cfg);
  EXPECT_DOUBLE_EQ(t.divergence_threshold, 10.0);
  EXPECT_EQ(t.terminated_by, Termination::Diverged);
}

TEST(RunOptimizer, EvaluationFailureCarriesIteration) {
  Objective obj = quadratic_objective(1);
  obj.fused = nullptr;
  obj.value = [](const ParamVector& th) {
    if (th[0] < 0.5) throw std::runtime_error("boom");
    return 0.5 * th.squaredNorm();
  };
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::fixed(0.1);
  cfg.max_iters = 100;
  try {
    run_optimizer(obj, vec({1.0}), cfg);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    // 0.9^t < 0.5 first at t = 7.
    EXPECT_EQ(e.iteration(), 7);
  }
}

TEST(RunOptimizer, ConfigValidation) {
  OptimizerConfig cfg;
  cfg.max_iters = 0;
  EXPECT_THROW(run_optimizer(quadratic_objective(1), vec({1.0}), cfg), ContractViolation);
  cfg.max_iters = 10;
  cfg.divergence_threshold = -1.0;
  EXPECT_THROW(run_optimizer(quadratic_objective(1), vec({1.0}), cfg), ContractViolation);
  cfg.divergence_threshold.reset();
  EXPECT_THROW(run_optimizer(quadratic_objective(1), vec({1.0, 2.0}), cfg), ContractViolation);
}

TEST(ScheduleEquivalence, BetaOneMatchesFixedBitwise) {
  const std::vector<Objective> objs{quadratic_objective(2), power_norm_objective(2, 2), power_norm_objective(4, 3),
                                    nondiagonal_example(), diagonal_objective(DiagonalSpec{{2.0, 3.0}})};
  const std::vector<ParamVector> starts{vec({1.0, -0.5}), vec({0.3, 0.8}), vec({0.5, 0.5, -0.5}), vec({0.4, 0.6}),
                                        vec({0.9, -0.7})};
  for (std::size_t k = 0; k < objs.size(); ++k) {
    for (double eta : {0.01, 0.05}) {
      OptimizerConfig a, b;
      a.schedule = StepSchedule::exponential(eta, 1.0);
      b.schedule = StepSchedule::fixed(eta);
      a.max_iters = b.max_iters = 500;
      const auto ta = run_optimizer(objs[k], starts[k], a, objs[k].optimum);
      const auto tb = run_optimizer(objs[k], starts[k], b, objs[k].optimum);
      EXPECT_TRUE(bitwise_equal(ta, tb)) << "objective " << k << " eta " << eta;
      EXPECT_EQ(csv(ta), csv(tb));
    }
  }
}

TEST(Trajectory, CsvFormat) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(0.05, 0.9);
  cfg.max_iters = 3;
  const auto obj = quadratic_objective(1);
  const auto t = run_optimizer(obj, vec({1.0}), cfg, obj.optimum);
  std::istringstream is(csv(t));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,objective,grad_norm,effective_step,dist_to_optimum,theta_norm");
  std::getline(is, line);
  EXPECT_EQ(line, "0,0.5,1,0.050000000000000003,1,1");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4);

  const auto no_opt = run_optimizer(obj, vec({1.0}), cfg);
  std::istringstream is2(csv(no_opt));
  std::getline(is2, line);
  std::getline(is2, line);
  EXPECT_EQ(line, "0,0.5,1,0.050000000000000003,,1");
}

TEST(Trajectory, CsvThinningKeepsLastRecord) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::fixed(0.05);
  cfg.max_iters = 25;
  const auto t = run_optimizer(quadratic_objective(1), vec({1.0}), cfg);
  std::ostringstream os;
  write_trajectory_csv(os, t, 10);
  std::istringstream is(os.str());
  std::string line;
  std::vector<std::string> ts;
  std::getline(is, line);
  while (std::getline(is, line)) ts.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(ts, (std::vector<std::string>{"0", "10", "20", "25"}));
}

TEST(Trajectory, DeterministicSerialization) {
  OptimizerConfig cfg;
  cfg.schedule = StepSchedule::exponential(0.01, 0.9);
  cfg.max_iters = 500;
  const auto obj = power_norm_objective(2, 3);
  EXPECT_EQ(csv(run_optimizer(obj, vec({0.2, 0.5, -0.3}), cfg, obj.optimum)),
            csv(run_optimizer(obj, vec({0.2, 0.5, -0.3}), cfg, obj.optimum)));
}

TEST(Feasibility, ReportsWithoutThrowing) {
  HomogeneityProfile prof{2.0, 1.0, 3.0, 1.0};
  const auto r = check_step_feasibility(prof, 0.01, 0.9, 0.25);
  EXPECT_NEAR(r.middle, 0.01 * std::pow(0.25, 0.5), 1e-15);
  EXPECT_NEAR(r.upper, 1.0 / (3.0 * 16.0), 1e-15);
  EXPECT_EQ(r.ok(), r.warning().empty());
  const auto bad = check_step_feasibility(prof, 10.0, 0.9, 0.25);
  EXPECT_FALSE(bad.eta_window_ok);
  EXPECT_FALSE(bad.warning().empty());
}

TEST(HomogeneityProfile, Validation) {
  EXPECT_THROW((HomogeneityProfile{-1.0, 1.0, 1.0, 1.0}.validate()), ContractViolation);
  EXPECT_THROW((HomogeneityProfile{1.0, 0.0, 1.0, 1.0}.validate()), ContractViolation);
  EXPECT_NO_THROW((HomogeneityProfile{0.0, 1.0, 1.0, 1.0}.validate()));
}
