// Synthetic statistical testbeds: a generalized linear model with polynomial
// link Y = (X^T theta*)^p + noise, and the symmetric two-component Gaussian
// mixture 1/2 N(-theta*, s^2 I) + 1/2 N(theta*, s^2 I).

#pragma once

#include "egd/core.hpp"
#include "egd/objective.hpp"
#include "egd/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

namespace egd {

// ---------------------------------------------------------------------------
// Generalized linear model
// ---------------------------------------------------------------------------

struct GlmSpec {
  int d = 4;
  int p = 2;
  ParamVector theta_star = ParamVector::Zero(4);
  double sigma = 1.0;
  std::int64_t n = 1024;

  void validate() const {
    detail::require(d >= 1, "GlmSpec: d must be >= 1");
    detail::require(p >= 1, "GlmSpec: p must be >= 1");
    detail::require(theta_star.size() == d, "GlmSpec: theta_star must have dimension d");
    detail::require(theta_star.allFinite(), "GlmSpec: theta_star must be finite");
    detail::require(sigma >= 0.0, "GlmSpec: sigma must be >= 0");
    detail::require(n >= 1, "GlmSpec: n must be >= 1");
  }
};

struct GlmDataset {
  Matrix X;  // n x d
  ParamVector Y;
  GlmSpec spec;
  std::uint64_t seed = 0;

  std::int64_t n() const { return X.rows(); }
  int d() const { return static_cast<int>(X.cols()); }
};

/// Rows of X i.i.d. N(0, I_d), noise i.i.d. N(0, sigma^2), drawn row by row so
/// that datasets of different n built from one seed share their leading rows.
inline GlmDataset generate_glm(const GlmSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  GlmDataset data;
  data.spec = spec;
  data.seed = seed;
  data.X.resize(spec.n, spec.d);
  data.Y.resize(spec.n);
  for (std::int64_t i = 0; i < spec.n; ++i) {
    double dot = 0.0;
    for (int j = 0; j < spec.d; ++j) {
      const double x = normal(rng);
      data.X(i, j) = x;
      dot += x * spec.theta_star[j];
    }
    const double noise = normal(rng);
    data.Y[i] = detail::ipow(dot, spec.p) + spec.sigma * noise;
  }
  return data;
}

/// (1/n) sum_i (Y_i - (X_i^T theta)^p)^2.
inline double glm_loss(const ParamVector& theta, const GlmDataset& data) {
  detail::require(theta.size() == data.d(), "glm_loss: theta dimension mismatch");
  const ParamVector u = data.X * theta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double r = data.Y[i] - detail::ipow(u[i], data.spec.p);
    s += r * r;
  }
  return s / static_cast<double>(data.n());
}

/// -(2p/n) sum_i (Y_i - (X_i^T theta)^p) (X_i^T theta)^(p-1) X_i.
inline ParamVector glm_gradient(const ParamVector& theta, const GlmDataset& data) {
  detail::require(theta.size() == data.d(), "glm_gradient: theta dimension mismatch");
  const int p = data.spec.p;
  const ParamVector u = data.X * theta;
  ParamVector w(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double lower = detail::ipow(u[i], p - 1);
    w[i] = (data.Y[i] - lower * u[i]) * lower;
  }
  return ParamVector((-2.0 * p / static_cast<double>(data.n())) * (data.X.transpose() * w));
}

inline Objective glm_objective(const GlmDataset& data) {
  Objective obj;
  obj.dim = data.d();
  obj.value = [&data](const ParamVector& th) { return glm_loss(th, data); };
  obj.gradient = [&data](const ParamVector& th) { return glm_gradient(th, data); };
  obj.optimum = data.spec.theta_star;
  return obj;
}

/// (2k-1)!! for k >= 0, with (-1)!! = 1.
inline double double_factorial_odd(int k) {
  double r = 1.0;
  for (int j = 2 * k - 1; j > 1; j -= 2) r *= j;
  return r;
}

/// (sigma^2 + (2p-1)!! |theta|^(2p)) / 2 for theta* = 0.
///
/// This is the conventional closed form; it equals one half of the expected
/// value of glm_loss, so its gradient is half of glm_population_gradient_low_snr.
inline double glm_population_loss_low_snr(const ParamVector& theta, int p, double sigma) {
  detail::require(p >= 1, "glm_population_loss_low_snr: p must be >= 1");
  return 0.5 * (sigma * sigma + double_factorial_odd(p) * detail::ipow(theta.squaredNorm(), p));
}

/// Gradient of E[glm_loss] = sigma^2 + (2p-1)!! |theta|^(2p) at theta* = 0.
inline ParamVector glm_population_gradient_low_snr(const ParamVector& theta, int p) {
  detail::require(p >= 1, "glm_population_gradient_low_snr: p must be >= 1");
  return ParamVector(2.0 * p * double_factorial_odd(p) * detail::ipow(theta.squaredNorm(), p - 1) * theta);
}

/// The closed-form low-SNR population loss as an Objective (minimum at 0).
inline Objective glm_population_objective_low_snr(int d, int p, double sigma) {
  Objective obj;
  obj.dim = d;
  obj.value = [p, sigma](const ParamVector& th) { return glm_population_loss_low_snr(th, p, sigma); };
  obj.gradient = [p](const ParamVector& th) { return ParamVector(0.5 * glm_population_gradient_low_snr(th, p)); };
  obj.optimum = ParamVector::Zero(d);
  obj.optimal_value = 0.5 * sigma * sigma;
  return obj;
}

/// Empirical moment tensors that make glm_loss and glm_gradient cost O(d^(2p))
/// per evaluation instead of O(n d):
///   loss = mean(Y^2) - 2 A[theta^p] + T[theta^(2p)]
/// with A = mean(Y X^{(x)p}) and T = mean(X^{(x)2p}).
class GlmMoments {
 public:
  static constexpr std::size_t kMaxEntries = std::size_t{1} << 22;

  explicit GlmMoments(const GlmDataset& data) : d_(data.d()), p_(data.spec.p) {
    const std::size_t full = tensor_size(2 * p_);
    detail::require(full <= kMaxEntries, "GlmMoments: d^(2p) too large for moment tensors");
    y_moment_.assign(tensor_size(p_), 0.0);
    x_moment_.assign(full, 0.0);
    std::vector<double> power(full), next(full);
    const auto n = data.n();
    for (std::int64_t i = 0; i < n; ++i) {
      std::size_t len = 1;
      power[0] = 1.0;
      for (int k = 1; k <= 2 * p_; ++k) {
        for (std::size_t a = 0; a < len; ++a)
          for (int j = 0; j < d_; ++j) next[a * d_ + j] = power[a] * data.X(i, j);
        len *= d_;
        std::swap(power, next);
        if (k == p_) {
          for (std::size_t a = 0; a < len; ++a) y_moment_[a] += data.Y[i] * power[a];
        }
      }
      for (std::size_t a = 0; a < len; ++a) x_moment_[a] += power[a];
      mean_y2_ += data.Y[i] * data.Y[i];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : y_moment_) v *= inv;
    for (double& v : x_moment_) v *= inv;
    mean_y2_ *= inv;
  }

  int d() const { return d_; }
  int p() const { return p_; }

  std::pair<double, ParamVector> evaluate(const ParamVector& theta) const {
    detail::require(theta.size() == d_, "GlmMoments: theta dimension mismatch");
    const ParamVector gy = contract_to_vector(y_moment_, p_, theta);
    const ParamVector gx = contract_to_vector(x_moment_, 2 * p_, theta);
    const double value = mean_y2_ - 2.0 * theta.dot(gy) + theta.dot(gx);
    return {value, ParamVector(2.0 * p_ * (gx - gy))};
  }

  double loss(const ParamVector& theta) const { return evaluate(theta).first; }
  ParamVector gradient(const ParamVector& theta) const { return evaluate(theta).second; }

 private:
  std::size_t tensor_size(int order) const {
    std::size_t s = 1;
    for (int k = 0; k < order; ++k) s *= static_cast<std::size_t>(d_);
    return s;
  }

  // Contracts all but the last axis of a symmetric tensor of the given order with theta.
  ParamVector contract_to_vector(const std::vector<double>& tensor, int order, const ParamVector& theta) const {
    std::vector<double> cur = tensor;
    std::size_t rest = tensor_size(order);
    for (int k = 0; k < order - 1; ++k) {
      rest /= static_cast<std::size_t>(d_);
      std::vector<double> out(rest, 0.0);
      for (int i = 0; i < d_; ++i) {
        const double ti = theta[i];
        const double* row = cur.data() + static_cast<std::size_t>(i) * rest;
        for (std::size_t j = 0; j < rest; ++j) out[j] += ti * row[j];
      }
      cur.swap(out);
    }
    return Eigen::Map<const ParamVector>(cur.data(), d_);
  }

  int d_;
  int p_;
  double mean_y2_ = 0.0;
  std::vector<double> y_moment_;
  std::vector<double> x_moment_;
};

/// glm_loss through precomputed moments; falls back to direct evaluation when
/// the moment tensors would be too large.
inline Objective glm_fast_objective(const GlmDataset& data) {
  std::size_t entries = 1;
  for (int k = 0; k < 2 * data.spec.p; ++k) entries *= static_cast<std::size_t>(data.d());
  if (entries > GlmMoments::kMaxEntries) return glm_objective(data);
  auto moments = std::make_shared<const GlmMoments>(data);
  Objective obj;
  obj.dim = data.d();
  obj.value = [moments](const ParamVector& th) { return moments->loss(th); };
  obj.gradient = [moments](const ParamVector& th) { return moments->gradient(th); };
  obj.fused = [moments](const ParamVector& th) { return moments->evaluate(th); };
  obj.optimum = data.spec.theta_star;
  return obj;
}

inline GlmDataset glm_subset(const GlmDataset& data, const std::vector<std::int64_t>& rows) {
  GlmDataset out;
  out.spec = data.spec;
  out.spec.n = static_cast<std::int64_t>(rows.size());
  out.seed = data.seed;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  out.Y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.X.row(static_cast<Eigen::Index>(k)) = data.X.row(rows[k]);
    out.Y[static_cast<Eigen::Index>(k)] = data.Y[rows[k]];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric two-component Gaussian mixture
// ---------------------------------------------------------------------------

struct GmmSpec {
  int d = 4;
  ParamVector theta_star = ParamVector::Zero(4);
  double sigma = 1.0;
  std::int64_t n = 1024;

  void validate() const {
    detail::require(d >= 1, "GmmSpec: d must be >= 1");
    detail::require(theta_star.size() == d, "GmmSpec: theta_star must have dimension d");
    detail::require(theta_star.allFinite(), "GmmSpec: theta_star must be finite");
    detail::require(sigma > 0.0, "GmmSpec: sigma must be > 0");
    detail::require(n >= 1, "GmmSpec: n must be >= 1");
  }
};

struct GmmDataset {
  Matrix X;  // n x d
  GmmSpec spec;
  std::uint64_t seed = 0;
  std::vector<signed char> labels;

  std::int64_t n() const { return X.rows(); }
  int d() const { return static_cast<int>(X.cols()); }
};

/// Each row: s uniform on {-1, +1}, X = s theta* + sigma Z with Z ~ N(0, I_d).
inline GmmDataset generate_gmm(const GmmSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  GmmDataset data;
  data.spec = spec;
  data.seed = seed;
  data.X.resize(spec.n, spec.d);
  data.labels.resize(static_cast<std::size_t>(spec.n));
  for (std::int64_t i = 0; i < spec.n; ++i) {
    const signed char s = coin(rng) ? 1 : -1;
    data.labels[static_cast<std::size_t>(i)] = s;
    for (int j = 0; j < spec.d; ++j) data.X(i, j) = s * spec.theta_star[j] + spec.sigma * normal(rng);
  }
  return data;
}

namespace detail {

/// log cosh(u) = |u| + log(1 + e^{-2|u|}) - log 2, overflow-free.
inline double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace detail

inline std::pair<double, ParamVector> gmm_evaluate(const ParamVector& theta, const GmmDataset& data,
                                                   bool want_value = true, bool want_grad = true) {
  detail::require(theta.size() == data.d(), "gmm: theta dimension mismatch");
  const double s2 = data.spec.sigma * data.spec.sigma;
  const auto n = static_cast<double>(data.n());
  const ParamVector u = (data.X * theta) / s2;
  // One exponential per row serves both log cosh(u) and tanh(u).
  double acc = 0.0;
  ParamVector w(want_grad ? u.size() : 0);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]);
    const double em1 = std::expm1(-2.0 * a);
    if (want_value) acc += a + std::log1p(1.0 + em1);
    if (want_grad) w[i] = std::copysign(-em1 / (2.0 + em1), u[i]);
  }
  double value = 0.0;
  ParamVector grad;
  if (want_value) {
    const double mean_sq = data.X.squaredNorm() / n;
    value = (mean_sq + theta.squaredNorm()) / (2.0 * s2) - (acc / n - std::numbers::ln2) +
            0.5 * data.d() * std::log(2.0 * std::numbers::pi * s2);
  }
  if (want_grad) grad = (theta - (data.X.transpose() * w) / n) / s2;
  return {value, grad};
}

/// Negative sample log-likelihood of the symmetric mixture, averaged over rows.
inline double gmm_nll(const ParamVector& theta, const GmmDataset& data) {
  return gmm_evaluate(theta, data, true, false).first;
}

/// (1/sigma^2) [theta - (1/n) sum_i tanh(x_i^T theta / sigma^2) x_i].
inline ParamVector gmm_gradient(const ParamVector& theta, const GmmDataset& data) {
  return gmm_evaluate(theta, data, false, true).second;
}

/// EM update (1/n) sum_i tanh(x_i^T theta / sigma^2) x_i, i.e. a gradient step
/// of size sigma^2 on gmm_nll.
inline ParamVector em_step(const ParamVector& theta, const GmmDataset& data) {
  detail::require(theta.size() == data.d(), "em_step: theta dimension mismatch");
  const double s2 = data.spec.sigma * data.spec.sigma;
  const ParamVector u = (data.X * theta) / s2;
  ParamVector w(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) w[i] = std::tanh(u[i]);
  return ParamVector((data.X.transpose() * w) / static_cast<double>(data.n()));
}

inline Objective gmm_objective(const GmmDataset& data) {
  Objective obj;
  obj.dim = data.d();
  obj.value = [&data](const ParamVector& th) { return gmm_nll(th, data); };
  obj.gradient = [&data](const ParamVector& th) { return gmm_gradient(th, data); };
  obj.fused = [&data](const ParamVector& th) { return gmm_evaluate(th, data); };
  obj.optimum = data.spec.theta_star;
  return obj;
}

inline GmmDataset gmm_subset(const GmmDataset& data, const std::vector<std::int64_t>& rows) {
  GmmDataset out;
  out.spec = data.spec;
  out.spec.n = static_cast<std::int64_t>(rows.size());
  out.seed = data.seed;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.X.row(static_cast<Eigen::Index>(k)) = data.X.row(rows[k]);
    if (!data.labels.empty()) out.labels.push_back(data.labels[static_cast<std::size_t>(rows[k])]);
  }
  return out;
}

// Population quantities of the mixture. With x = s theta* + sigma z, the
// statistic x^T theta / sigma^2 equals s a + b w for a = theta*^T theta / sigma^2,
// b = |theta| / sigma and w ~ N(0, 1), and E[z | w] = w theta/|theta|. Every
// expectation therefore reduces to a one-dimensional Gaussian integral, done
// here with the trapezoid rule (spectrally accurate for these analytic integrands).

namespace detail {

struct GaussianRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline const GaussianRule& gaussian_rule() {
  static const GaussianRule rule = [] {
    GaussianRule r;
    constexpr double half_width = 12.0;
    constexpr int intervals = 4800;
    const double h = 2.0 * half_width / intervals;
    const double norm = h / std::sqrt(2.0 * std::numbers::pi);
    for (int k = 0; k <= intervals; ++k) {
      const double w = -half_width + k * h;
      r.nodes.push_back(w);
      r.weights.push_back(norm * std::exp(-0.5 * w * w));
    }
    return r;
  }();
  return rule;
}

template <class F>
double gaussian_expectation(F&& f) {
  const auto& rule = gaussian_rule();
  double s = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) s += rule.weights[k] * f(rule.nodes[k]);
  return s;
}

}  // namespace detail

/// Population counterpart of gmm_nll for data drawn with the given theta*.
inline double gmm_population_nll(const ParamVector& theta, const ParamVector& theta_star, double sigma) {
  detail::require(theta.size() == theta_star.size(), "gmm_population_nll: dimension mismatch");
  detail::require(sigma > 0.0, "gmm_population_nll: sigma must be > 0");
  const double s2 = sigma * sigma;
  const auto d = static_cast<double>(theta.size());
  const double a = theta_star.dot(theta) / s2;
  const double b = theta.norm() / sigma;
  const double mean_log_cosh = detail::gaussian_expectation([&](double w) { return detail::log_cosh(a + b * w); });
  const double mean_sq = theta_star.squaredNorm() + d * s2;
  return (mean_sq + theta.squaredNorm()) / (2.0 * s2) - mean_log_cosh + 0.5 * d * std::log(2.0 * std::numbers::pi * s2);
}

inline ParamVector gmm_population_gradient(const ParamVector& theta, const ParamVector& theta_star, double sigma) {
  detail::require(theta.size() == theta_star.size(), "gmm_population_gradient: dimension mismatch");
  detail::require(sigma > 0.0, "gmm_population_gradient: sigma must be > 0");
  const double s2 = sigma * sigma;
  const double norm = theta.norm();
  if (norm == 0.0) return ParamVector::Zero(theta.size());
  const double a = theta_star.dot(theta) / s2;
  const double b = norm / sigma;
  const double e_tanh = detail::gaussian_expectation([&](double w) { return std::tanh(a + b * w); });
  const double e_w_tanh = detail::gaussian_expectation([&](double w) { return w * std::tanh(a + b * w); });
  const ParamVector mean_map = theta_star * e_tanh + (sigma * e_w_tanh / norm) * theta;
  return (theta - mean_map) / s2;
}

inline Objective gmm_population_objective(const ParamVector& theta_star, double sigma) {
  Objective obj;
  obj.dim = static_cast<int>(theta_star.size());
  obj.value = [theta_star, sigma](const ParamVector& th) { return gmm_population_nll(th, theta_star, sigma); };
  obj.gradient = [theta_star, sigma](const ParamVector& th) {
    return gmm_population_gradient(th, theta_star, sigma);
  };
  obj.optimum = theta_star;
  return obj;
}

// ---------------------------------------------------------------------------
// Stability probe
// ---------------------------------------------------------------------------

struct StabilityProfile {
  double gamma = 0.0;
  double c3_hat = 0.0;
  double gamma_r_squared = 0.0;
  std::vector<double> radii;
  /// Sup over the ball of radius radii[k], averaged over replicates.
  std::vector<double> sup_deviation;
};

struct StabilityProbeConfig {
  std::vector<double> radii{0.0125, 0.025, 0.05, 0.1, 0.2};
  int m_dirs = 32;
  int replicates = 10;
  std::uint64_t base_seed = 1;
  double delta = 0.05;
};

using PopulationGradient = std::function<ParamVector(const ParamVector&)>;
using SampleGradient = std::function<ParamVector(const ParamVector&)>;

namespace detail {

inline std::pair<double, double> ols_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return {slope, r2};
}

/// `make_sample_gradient(replicate_seed)` builds the sample gradient for one
/// freshly drawn dataset.
template <class MakeSampleGradient>
StabilityProfile probe_stability_impl(const ParamVector& theta_star, std::int64_t n,
                                      const PopulationGradient& population, const StabilityProbeConfig& cfg,
                                      MakeSampleGradient&& make_sample_gradient) {
  require(cfg.radii.size() >= 2, "probe_stability: need at least two radii");
  for (std::size_t k = 0; k < cfg.radii.size(); ++k) {
    require(cfg.radii[k] > 0.0, "probe_stability: radii must be positive");
    require(k == 0 || cfg.radii[k] > cfg.radii[k - 1], "probe_stability: radii must be strictly increasing");
  }
  require(cfg.m_dirs >= 1 && cfg.replicates >= 1, "probe_stability: need m_dirs >= 1 and replicates >= 1");

  const auto d = theta_star.size();
  std::mt19937_64 dir_rng(cfg.base_seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  std::vector<ParamVector> dirs;
  for (int m = 0; m < cfg.m_dirs; ++m) {
    ParamVector u(d);
    for (Eigen::Index j = 0; j < d; ++j) u[j] = normal(dir_rng);
    dirs.push_back(u / u.norm());
  }

  StabilityProfile prof;
  prof.radii = cfg.radii;
  prof.sup_deviation.assign(cfg.radii.size(), 0.0);
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    const SampleGradient sample = make_sample_gradient(cfg.base_seed + static_cast<std::uint64_t>(rep));
    double running = 0.0;
    for (std::size_t k = 0; k < cfg.radii.size(); ++k) {
      for (const auto& u : dirs) {
        const ParamVector theta = theta_star + cfg.radii[k] * u;
        running = std::max(running, (sample(theta) - population(theta)).norm());
      }
      prof.sup_deviation[k] += running / cfg.replicates;
    }
  }

  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < cfg.radii.size(); ++k) {
    lx.push_back(std::log(cfg.radii[k]));
    ly.push_back(std::log(prof.sup_deviation[k]));
  }
  const auto [slope, r2] = ols_slope(lx, ly);
  prof.gamma = slope;
  prof.gamma_r_squared = r2;
  const double eps = noise_level(n, d, cfg.delta);
  for (std::size_t k = 0; k < cfg.radii.size(); ++k) {
    prof.c3_hat = std::max(prof.c3_hat, prof.sup_deviation[k] / (std::pow(cfg.radii[k], slope) * eps));
  }
  return prof;
}

}  // namespace detail

/// Estimates gamma and c3 in sup_{B(theta*, r)} |grad f_n - grad f| <= c3 r^gamma eps(n, delta)
/// for the GLM sample loss glm_loss.
inline StabilityProfile probe_stability(const GlmSpec& spec, const PopulationGradient& population,
                                        const StabilityProbeConfig& cfg) {
  spec.validate();
  return detail::probe_stability_impl(spec.theta_star, spec.n, population, cfg, [&spec](std::uint64_t seed) {
    auto data = std::make_shared<const GlmDataset>(generate_glm(spec, seed));
    return SampleGradient([data](const ParamVector& th) { return glm_gradient(th, *data); });
  });
}

/// Same probe for the mixture negative log-likelihood gmm_nll.
inline StabilityProfile probe_stability(const GmmSpec& spec, const PopulationGradient& population,
                                        const StabilityProbeConfig& cfg) {
  spec.validate();
  return detail::probe_stability_impl(spec.theta_star, spec.n, population, cfg, [&spec](std::uint64_t seed) {
    auto data = std::make_shared<const GmmDataset>(generate_gmm(spec, seed));
    return SampleGradient([data](const ParamVector& th) { return gmm_gradient(th, *data); });
  });
}

}  // namespace egd
