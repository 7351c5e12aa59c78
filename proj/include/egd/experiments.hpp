// Experiment configurations, validation, and runners that write CSV/JSON
// artifacts plus a reproducibility manifest.

#pragma once

#include "egd/analysis.hpp"
#include "egd/io.hpp"
#include "egd/objectives.hpp"
#include "egd/optimizer.hpp"
#include "egd/stat_models.hpp"
#include "egd/verify.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace egd {

inline constexpr const char* kVersion = "1.0.0";

/// Invalid experiment configuration; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Experiment {
  AnalyticRates,
  EffectsEtaBeta,
  TwoPhase,
  GlmHighSnr,
  GlmLowSnr,
  GlmMiddleSnr,
  GmmOverSpecified,
  GmmHighSnr,
  Diagonal,
  Verify
};

struct ExperimentInfo {
  Experiment experiment;
  const char* name;
  const char* figure;
  const char* description;
};

inline const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog{
      {Experiment::AnalyticRates, "analytic_rates", "1",
       "EGD vs GD on |theta|^(2p)/(2p), p in {2,4}: linear vs sub-linear convergence"},
      {Experiment::EffectsEtaBeta, "effects_eta_beta", "2",
       "EGD on theta^4/4 for several beta (eta = 1e-2) and several eta (beta = 0.9)"},
      {Experiment::TwoPhase, "two_phase", "two-phase",
       "EGD vs GD on theta^2/2: geometric descent, then divergence past the step horizon"},
      {Experiment::GlmHighSnr, "glm_high_snr", "3", "GLM, |theta*|/sigma = 3: EGD vs GD statistical rates"},
      {Experiment::GlmLowSnr, "glm_low_snr", "4", "GLM, theta* = 0: EGD vs GD statistical rates"},
      {Experiment::GmmOverSpecified, "gmm_over_specified", "5",
       "Symmetric mixture, theta* = 0: EGD vs EM statistical rates"},
      {Experiment::GmmHighSnr, "gmm_high_snr", "6", "Symmetric mixture, |theta*|/sigma = 3: EGD vs EM"},
      {Experiment::GlmMiddleSnr, "glm_middle_snr", "7",
       "GLM, |theta*| = (d/n)^(1/6): exploratory middle-SNR rates"},
      {Experiment::Diagonal, "diagonal", "diagonal",
       "EGD on sum_i theta_i^(2 alpha_i): coordinatewise decoupling and per-coordinate rates"},
      {Experiment::Verify, "verify", "verify",
       "Gradient checks, homogeneity/stability probes, EM identities, structural checks"},
  };
  return catalog;
}

inline const ExperimentInfo& experiment_info(Experiment e) {
  for (const auto& info : experiment_catalog())
    if (info.experiment == e) return info;
  throw ContractViolation("unknown experiment");
}

inline const char* to_string(Experiment e) { return experiment_info(e).name; }

inline std::optional<Experiment> experiment_from_string(const std::string& s) {
  for (const auto& info : experiment_catalog())
    if (s == info.name) return info.experiment;
  return std::nullopt;
}

inline std::optional<Experiment> experiment_from_figure(const std::string& id) {
  for (const auto& info : experiment_catalog())
    if (id == info.figure || id == info.name) return info.experiment;
  return std::nullopt;
}

inline bool is_rate_study(Experiment e) {
  switch (e) {
    case Experiment::GlmHighSnr:
    case Experiment::GlmLowSnr:
    case Experiment::GlmMiddleSnr:
    case Experiment::GmmOverSpecified:
    case Experiment::GmmHighSnr: return true;
    default: return false;
  }
}

inline bool is_gmm(Experiment e) { return e == Experiment::GmmOverSpecified || e == Experiment::GmmHighSnr; }

inline std::optional<Algorithm> algorithm_from_string(const std::string& s) {
  if (s == "egd") return Algorithm::Egd;
  if (s == "gd") return Algorithm::Gd;
  if (s == "em") return Algorithm::Em;
  return std::nullopt;
}

/// Per-algorithm settings; unset fields fall back to the top-level values and
/// then to the experiment defaults.
struct AlgorithmEntry {
  Algorithm algorithm = Algorithm::Egd;
  std::optional<double> eta;
  std::optional<double> beta;
  bool auto_beta = false;
  std::optional<std::int64_t> max_iters;
  std::optional<double> gradient_tolerance;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Verify;
  std::vector<AlgorithmEntry> algorithms;
  std::optional<double> eta;
  std::optional<double> beta;
  bool auto_beta = false;
  std::optional<double> c1;
  double delta = 0.05;
  std::optional<std::int64_t> max_iters;
  int d = 4;
  int p = 2;
  double sigma = 1.0;
  std::optional<double> theta_star_norm;
  std::vector<std::int64_t> n_grid{1024, 2048, 4096, 8192, 16384, 32768, 65536};
  int replicates = 20;
  std::uint64_t base_seed = 1;
  double init_radius = 0.5;
  std::string output_dir = "egd_out";
  bool write_trajectories = false;
  std::int64_t record_every = 1;
  bool cross_validation = true;
  double cv_split = 0.9;
  std::vector<int> p_values{2, 4};
  std::vector<double> betas{0.8, 0.9, 0.95};
  std::vector<double> etas{1e-2, 1e-3, 1e-4};
  std::vector<double> alphas{2.0, 3.0};
};

// ---------------------------------------------------------------------------
// Defaults
// ---------------------------------------------------------------------------

namespace detail {

struct AlgorithmDefaults {
  double eta;
  double beta;
  std::int64_t max_iters;
  double gradient_tolerance;
};

inline AlgorithmDefaults algorithm_defaults(Experiment e, Algorithm a) {
  switch (e) {
    case Experiment::AnalyticRates:
      return a == Algorithm::Gd ? AlgorithmDefaults{0.01, 1.0, 100000, 1e-14} : AlgorithmDefaults{0.01, 0.9, 2000, 0.0};
    case Experiment::EffectsEtaBeta:
    case Experiment::Diagonal: return {0.01, 0.9, 3000, 0.0};
    case Experiment::TwoPhase: return {0.05, 0.9, 100, 1e-14};
    default: break;
  }
  switch (a) {
    case Algorithm::Egd: return {0.001, 0.9, 1000, 1e-14};
    case Algorithm::Gd: return {0.001, 1.0, 40000, 1e-14};
    case Algorithm::Em: return {1.0, 1.0, 20000, 1e-6};
  }
  return {0.001, 0.9, 1000, 1e-14};
}

inline AlgorithmEntry entry(Algorithm a) {
  AlgorithmEntry e;
  e.algorithm = a;
  return e;
}

inline std::vector<AlgorithmEntry> default_algorithms(Experiment e) {
  switch (e) {
    case Experiment::AnalyticRates:
    case Experiment::TwoPhase:
    case Experiment::GlmHighSnr:
    case Experiment::GlmLowSnr:
    case Experiment::GlmMiddleSnr: return {entry(Algorithm::Egd), entry(Algorithm::Gd)};
    case Experiment::GmmOverSpecified:
    case Experiment::GmmHighSnr: return {entry(Algorithm::Egd), entry(Algorithm::Em)};
    case Experiment::EffectsEtaBeta:
    case Experiment::Diagonal: return {entry(Algorithm::Egd)};
    case Experiment::Verify: return {};
  }
  return {};
}

}  // namespace detail

inline ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  c.algorithms = detail::default_algorithms(e);
  if (e == Experiment::GlmHighSnr || e == Experiment::GmmHighSnr) c.theta_star_norm = 3.0;
  if (e == Experiment::AnalyticRates || e == Experiment::TwoPhase) c.d = 1;
  return c;
}

/// Closed-form smoothness-growth constant of the sample least-squares loss,
/// 2 p (2p-1) (2p-1)!!.
inline double glm_default_c1(int p) { return 2.0 * p * (2.0 * p - 1.0) * double_factorial_odd(p); }

/// c1 estimated by the homogeneity probe on the population mixture loss.
inline double gmm_estimated_c1(int d, double sigma, std::uint64_t seed) {
  const Objective pop = gmm_population_objective(ParamVector::Zero(d), sigma);
  return probe_homogeneity(pop, 2.0, 0.5, 200, seed).c1_hat;
}

// ---------------------------------------------------------------------------
// Resolution and validation
// ---------------------------------------------------------------------------

struct ResolvedAlgorithm {
  std::string label;
  Algorithm algorithm = Algorithm::Egd;
  double eta = 0.0;
  double beta = 1.0;
  bool auto_beta = false;
  std::int64_t max_iters = 0;
  double gradient_tolerance = 0.0;
};

inline std::vector<ResolvedAlgorithm> resolve_algorithms(const ExperimentConfig& c) {
  std::vector<ResolvedAlgorithm> out;
  std::map<std::string, int> seen;
  for (const auto& a : c.algorithms) {
    const auto def = detail::algorithm_defaults(c.experiment, a.algorithm);
    ResolvedAlgorithm r;
    r.algorithm = a.algorithm;
    r.label = to_string(a.algorithm);
    if (int k = seen[r.label]++; k > 0) r.label += "_" + std::to_string(k + 1);
    if (a.algorithm == Algorithm::Em) {
      r.eta = c.sigma * c.sigma;
      r.beta = 1.0;
    } else {
      r.eta = a.eta.value_or(c.eta.value_or(def.eta));
      if (a.algorithm == Algorithm::Egd) {
        r.auto_beta = a.auto_beta || (!a.beta && c.auto_beta);
        r.beta = a.beta.value_or(c.beta.value_or(def.beta));
        if (r.auto_beta) r.label += "_auto";
      }
    }
    r.max_iters = a.max_iters.value_or(c.max_iters.value_or(def.max_iters));
    r.gradient_tolerance = a.gradient_tolerance.value_or(def.gradient_tolerance);
    out.push_back(r);
  }
  return out;
}

/// c1 used by auto beta: the user value, else the closed form (GLM) or the
/// probe estimate (mixture).
inline std::optional<double> resolve_c1(const ExperimentConfig& c) {
  if (c.c1) return c.c1;
  switch (c.experiment) {
    case Experiment::GlmHighSnr:
    case Experiment::GlmLowSnr:
    case Experiment::GlmMiddleSnr: return glm_default_c1(c.p);
    case Experiment::GmmOverSpecified:
    case Experiment::GmmHighSnr: return gmm_estimated_c1(c.d, c.sigma, c.base_seed);
    default: return std::nullopt;
  }
}

/// beta from the sample-size rule with epsilon = noise_level(n, d, delta).
inline double resolve_auto_beta(double eta, double c1, std::int64_t n, int d, double delta) {
  try {
    return sample_size_dependent_beta(eta, c1, noise_level(n, d, delta));
  } catch (const DomainError& e) {
    throw ConfigError("beta", std::string("auto beta infeasible at n = ") + std::to_string(n) + ": " + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError("beta", std::string("auto beta: ") + e.what());
  }
}

inline void validate_config(const ExperimentConfig& c) {
  auto need = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
  };
  need(c.d >= 1, "d", "must be >= 1");
  need(c.p >= 1, "p", "must be >= 1");
  need(c.sigma > 0.0 && std::isfinite(c.sigma), "sigma", "must be finite and > 0");
  need(c.delta > 0.0 && c.delta < 1.0, "delta", "must lie in (0, 1)");
  need(!c.eta || (*c.eta > 0.0 && std::isfinite(*c.eta)), "eta", "must be finite and > 0");
  need(!c.beta || (*c.beta > 0.0 && *c.beta <= 1.0), "beta", "must lie in (0, 1]");
  need(!c.max_iters || *c.max_iters >= 1, "max_iters", "must be >= 1");
  need(!c.theta_star_norm || *c.theta_star_norm >= 0.0, "theta_star_norm", "must be >= 0");
  need(c.init_radius > 0.0, "init_radius", "must be > 0");
  need(c.record_every >= 1, "record_every", "must be >= 1");
  need(c.cv_split > 0.0 && c.cv_split < 1.0, "cv_split", "must lie in (0, 1)");
  need(!c.c1 || *c.c1 > 0.0, "c1", "must be > 0");
  need(!c.output_dir.empty(), "output_dir", "must not be empty");
  for (const auto& a : c.algorithms) {
    need(a.algorithm != Algorithm::Em || is_gmm(c.experiment), "algorithms",
         std::string("em is only available for gmm experiments, not ") + to_string(c.experiment));
    need(!a.eta || *a.eta > 0.0, "algorithms.eta", "must be > 0");
    need(!a.beta || (*a.beta > 0.0 && *a.beta <= 1.0), "algorithms.beta", "must lie in (0, 1]");
    need(!a.max_iters || *a.max_iters >= 1, "algorithms.max_iters", "must be >= 1");
    need(!a.gradient_tolerance || *a.gradient_tolerance >= 0.0, "algorithms.gradient_tolerance", "must be >= 0");
  }
  const bool wants_auto =
      c.auto_beta || std::any_of(c.algorithms.begin(), c.algorithms.end(), [](const auto& a) { return a.auto_beta; });
  if (wants_auto) {
    need(is_rate_study(c.experiment) || c.c1.has_value(), "beta",
         "\"auto\" needs a c1 estimate; supply \"c1\" for this experiment");
  }
  if (is_rate_study(c.experiment)) {
    need(c.n_grid.size() >= 4, "n_grid", "needs at least 4 sample sizes");
    for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
      need(c.n_grid[i] >= 10, "n_grid", "every n must be >= 10");
      need(i == 0 || c.n_grid[i] > c.n_grid[i - 1], "n_grid", "must be strictly increasing");
    }
    need(c.replicates >= 5, "replicates", "must be >= 5");
    need(!c.algorithms.empty(), "algorithms", "needs at least one algorithm");
    if (wants_auto) {
      const double c1 = *resolve_c1(c);
      for (const auto& a : resolve_algorithms(c)) {
        if (!a.auto_beta) continue;
        need(a.eta * c1 < 1.0, "eta", "auto beta requires eta * c1 < 1 (c1 = " + format_double(c1) + ")");
        for (auto n : c.n_grid) resolve_auto_beta(a.eta, c1, n, c.d, c.delta);
      }
    }
  }
  if (c.experiment == Experiment::AnalyticRates) {
    need(!c.p_values.empty(), "p_values", "must not be empty");
    for (int p : c.p_values) need(p >= 2, "p_values", "every p must be >= 2");
  }
  if (c.experiment == Experiment::EffectsEtaBeta) {
    for (double b : c.betas) need(b > 0.0 && b <= 1.0, "betas", "every beta must lie in (0, 1]");
    for (double e : c.etas) need(e > 0.0, "etas", "every eta must be > 0");
  }
  if (c.experiment == Experiment::Diagonal) {
    for (double a : c.alphas) need(a > 1.0, "alphas", "every alpha must be > 1");
    need(!c.alphas.empty(), "alphas", "must not be empty");
  }
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T json_get(const Json& j, const char* field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field, "has the wrong type");
  }
}

inline void read_beta(const Json& j, const char* field, std::optional<double>& beta, bool& auto_beta) {
  if (j.is_string()) {
    if (j.get<std::string>() != "auto") throw ConfigError(field, "must be a number or \"auto\"");
    auto_beta = true;
    beta.reset();
  } else {
    beta = json_get<double>(j, field);
    auto_beta = false;
  }
}

inline AlgorithmEntry parse_algorithm(const Json& j) {
  AlgorithmEntry a;
  auto name_of = [](const Json& v) {
    const auto s = json_get<std::string>(v, "algorithms");
    const auto alg = algorithm_from_string(s);
    if (!alg) throw ConfigError("algorithms", "unknown algorithm '" + s + "' (expected egd, gd or em)");
    return *alg;
  };
  if (j.is_string()) {
    a.algorithm = name_of(j);
    return a;
  }
  if (!j.is_object()) throw ConfigError("algorithms", "entries must be names or objects");
  for (const auto& [key, v] : j.items()) {
    if (key == "name") a.algorithm = name_of(v);
    else if (key == "eta") a.eta = json_get<double>(v, "algorithms.eta");
    else if (key == "beta") read_beta(v, "algorithms.beta", a.beta, a.auto_beta);
    else if (key == "max_iters") a.max_iters = json_get<std::int64_t>(v, "algorithms.max_iters");
    else if (key == "gradient_tolerance") a.gradient_tolerance = json_get<double>(v, "algorithms.gradient_tolerance");
    else throw ConfigError("algorithms." + key, "unknown field");
  }
  if (!j.contains("name")) throw ConfigError("algorithms.name", "is required");
  return a;
}

}  // namespace detail

/// Parses a config object, or a manifest whose "config" member is one.
inline ExperimentConfig parse_config(const Json& root) {
  const Json& j = root.contains("config") && root.at("config").is_object() ? root.at("config") : root;
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  if (!j.contains("experiment")) throw ConfigError("experiment", "is required");
  const auto name = detail::json_get<std::string>(j.at("experiment"), "experiment");
  const auto e = experiment_from_string(name);
  if (!e) throw ConfigError("experiment", "unknown experiment '" + name + "'");
  ExperimentConfig c = default_config(*e);
  using detail::json_get;
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") continue;
    if (key == "algorithms") {
      if (!v.is_array()) throw ConfigError("algorithms", "must be an array");
      c.algorithms.clear();
      for (const auto& a : v) c.algorithms.push_back(detail::parse_algorithm(a));
    } else if (key == "eta") c.eta = json_get<double>(v, "eta");
    else if (key == "beta") detail::read_beta(v, "beta", c.beta, c.auto_beta);
    else if (key == "c1") c.c1 = json_get<double>(v, "c1");
    else if (key == "delta") c.delta = json_get<double>(v, "delta");
    else if (key == "max_iters") c.max_iters = json_get<std::int64_t>(v, "max_iters");
    else if (key == "d") c.d = json_get<int>(v, "d");
    else if (key == "p") c.p = json_get<int>(v, "p");
    else if (key == "sigma") c.sigma = json_get<double>(v, "sigma");
    else if (key == "theta_star_norm") {
      if (v.is_null()) c.theta_star_norm.reset();
      else c.theta_star_norm = json_get<double>(v, "theta_star_norm");
    } else if (key == "n_grid") c.n_grid = json_get<std::vector<std::int64_t>>(v, "n_grid");
    else if (key == "replicates") c.replicates = json_get<int>(v, "replicates");
    else if (key == "base_seed") c.base_seed = json_get<std::uint64_t>(v, "base_seed");
    else if (key == "init_radius") c.init_radius = json_get<double>(v, "init_radius");
    else if (key == "output_dir") c.output_dir = json_get<std::string>(v, "output_dir");
    else if (key == "write_trajectories") c.write_trajectories = json_get<bool>(v, "write_trajectories");
    else if (key == "record_every") c.record_every = json_get<std::int64_t>(v, "record_every");
    else if (key == "cross_validation") c.cross_validation = json_get<bool>(v, "cross_validation");
    else if (key == "cv_split") c.cv_split = json_get<double>(v, "cv_split");
    else if (key == "p_values") c.p_values = json_get<std::vector<int>>(v, "p_values");
    else if (key == "betas") c.betas = json_get<std::vector<double>>(v, "betas");
    else if (key == "etas") c.etas = json_get<std::vector<double>>(v, "etas");
    else if (key == "alphas") c.alphas = json_get<std::vector<double>>(v, "alphas");
    else throw ConfigError(key, "unknown field");
  }
  validate_config(c);
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json algs = Json::array();
  for (const auto& a : c.algorithms) {
    Json o{{"name", to_string(a.algorithm)}};
    if (a.eta) o["eta"] = *a.eta;
    if (a.auto_beta) o["beta"] = "auto";
    else if (a.beta) o["beta"] = *a.beta;
    if (a.max_iters) o["max_iters"] = *a.max_iters;
    if (a.gradient_tolerance) o["gradient_tolerance"] = *a.gradient_tolerance;
    algs.push_back(o);
  }
  Json j{{"experiment", to_string(c.experiment)}, {"algorithms", algs}};
  if (c.eta) j["eta"] = *c.eta;
  if (c.auto_beta) j["beta"] = "auto";
  else if (c.beta) j["beta"] = *c.beta;
  if (c.c1) j["c1"] = *c.c1;
  j["delta"] = c.delta;
  if (c.max_iters) j["max_iters"] = *c.max_iters;
  j["d"] = c.d;
  j["p"] = c.p;
  j["sigma"] = c.sigma;
  j["theta_star_norm"] = c.theta_star_norm ? Json(*c.theta_star_norm) : Json(nullptr);
  j["n_grid"] = c.n_grid;
  j["replicates"] = c.replicates;
  j["base_seed"] = c.base_seed;
  j["init_radius"] = c.init_radius;
  j["output_dir"] = c.output_dir;
  j["write_trajectories"] = c.write_trajectories;
  j["record_every"] = c.record_every;
  j["cross_validation"] = c.cross_validation;
  j["cv_split"] = c.cv_split;
  j["p_values"] = c.p_values;
  j["betas"] = c.betas;
  j["etas"] = c.etas;
  j["alphas"] = c.alphas;
  return j;
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

struct ExperimentResult {
  bool ok = true;
  Json summary;
  std::vector<std::string> artifacts;
  std::vector<std::string> failures;
};

struct RunOptions {
  /// Worker threads for rate studies; 0 means hardware concurrency.
  int threads = 0;
  std::ostream* log = nullptr;
};

namespace detail {

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  template <class Fn>
  void write(const std::string& rel, Fn&& fill) {
    const auto path = root_ / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    fill(os);
    if (!os) throw std::runtime_error("write failed for " + path.string());
    names_.push_back(rel);
  }

  void json(const std::string& rel, const Json& j) {
    write(rel, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

  void trajectory(const std::string& rel, const Trajectory& t, std::int64_t record_every) {
    write(rel, [&](std::ostream& os) { write_trajectory_csv(os, t, record_every); });
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> names_;
};

inline void log_line(const RunOptions& opt, const std::string& line) {
  if (opt.log) *opt.log << line << '\n';
}

inline Json fit_json(const std::optional<RateFit>& f) { return rate_fit_to_json(f); }

inline Json classification_json(const Trajectory& t) {
  if (t.records.size() < 30) return Json{{"label", "TooShort"}};
  const auto c = classify_convergence_detail(t);
  return Json{{"label", to_string(c.label)},
              {"argmin_t", c.argmin_t},
              {"geometric_fit", fit_json(c.geometric)},
              {"geometric_ratio", c.geometric ? Json(c.geometric->ratio()) : Json(nullptr)},
              {"loglog_fit", fit_json(c.loglog)}};
}

inline Trajectory run_analytic(const Objective& obj, const ParamVector& theta0, const ResolvedAlgorithm& a,
                               double beta) {
  OptimizerConfig cfg;
  cfg.schedule = a.algorithm == Algorithm::Egd ? StepSchedule::exponential(a.eta, beta) : StepSchedule::fixed(a.eta);
  cfg.max_iters = a.max_iters;
  cfg.gradient_tolerance = a.gradient_tolerance;
  return run_optimizer(obj, theta0, cfg, obj.optimum);
}

/// log-log fit of error on t over [t_lo, t_hi].
inline std::optional<RateFit> loglog_window(const Trajectory& t, double t_lo, double t_hi) {
  auto [ts, es] = error_window(t, t_lo, t_hi);
  if (ts.size() < 3) return std::nullopt;
  return fit_loglog(ts, es);
}

/// First t at which the error falls below half its initial value.
inline std::int64_t plateau_length(const Trajectory& t) {
  const double e0 = *t.records.front().dist_to_optimum;
  for (const auto& r : t.records)
    if (r.dist_to_optimum && *r.dist_to_optimum < 0.5 * e0) return r.t;
  return t.records.back().t;
}

inline ExperimentResult run_analytic_rates(const ExperimentConfig& c, ArtifactWriter& w) {
  ExperimentResult res;
  Json per_p = Json::array();
  for (int p : c.p_values) {
    const Objective obj = power_norm_objective(p, 1);
    Json entry{{"p", p}, {"alpha", 2 * p - 2}};
    for (const auto& a : resolve_algorithms(c)) {
      const Trajectory t = run_analytic(obj, ParamVector::Constant(1, 1.0), a, a.beta);
      w.trajectory("trajectories/" + a.label + "_p" + std::to_string(p) + ".csv", t, c.record_every);
      Json j{{"terminated_by", to_string(t.terminated_by)},
             {"records", t.records.size()},
             {"classification", classification_json(t)}};
      if (a.algorithm == Algorithm::Egd) j["expected_ratio"] = std::pow(a.beta, 1.0 / (2.0 * p - 2.0));
      if (a.algorithm == Algorithm::Gd) {
        j["loglog_fit_1e2_1e5"] = fit_json(loglog_window(t, 1e2, 1e5));
        j["expected_slope"] = -1.0 / (2.0 * p - 2.0);
      }
      entry[a.label] = j;
    }
    per_p.push_back(entry);
  }
  res.summary = Json{{"objective", "power_norm"}, {"per_p", per_p}};
  return res;
}

inline ExperimentResult run_effects(const ExperimentConfig& c, ArtifactWriter& w) {
  ExperimentResult res;
  const Objective obj = power_norm_objective(2, 1);
  const auto algs = resolve_algorithms(c);
  ResolvedAlgorithm a = algs.empty() ? ResolvedAlgorithm{} : algs.front();
  Json by_beta = Json::array(), by_eta = Json::array();
  ResolvedAlgorithm fixed_eta = a;
  fixed_eta.eta = 0.01;
  for (double beta : c.betas) {
    const Trajectory t = run_analytic(obj, ParamVector::Constant(1, 1.0), fixed_eta, beta);
    w.trajectory("trajectories/egd_beta" + format_double(beta) + ".csv", t, c.record_every);
    const auto cls = classify_convergence_detail(t);
    by_beta.push_back(Json{{"beta", beta},
                           {"ratio", cls.geometric ? Json(cls.geometric->ratio()) : Json(nullptr)},
                           {"expected_ratio", std::sqrt(beta)},
                           {"label", to_string(cls.label)}});
  }
  for (double eta : c.etas) {
    ResolvedAlgorithm e = a;
    e.eta = eta;
    const Trajectory t = run_analytic(obj, ParamVector::Constant(1, 1.0), e, 0.9);
    w.trajectory("trajectories/egd_eta" + format_double(eta) + ".csv", t, c.record_every);
    by_eta.push_back(Json{{"eta", eta}, {"plateau_length", plateau_length(t)}});
  }
  res.summary = Json{{"objective", "theta^4/4"}, {"by_beta", by_beta}, {"by_eta", by_eta}};
  return res;
}

inline ExperimentResult run_two_phase(const ExperimentConfig& c, ArtifactWriter& w) {
  ExperimentResult res;
  const Objective obj = quadratic_objective(1);
  Json out{{"objective", "theta^2/2"}};
  for (const auto& a : resolve_algorithms(c)) {
    const Trajectory t = run_analytic(obj, ParamVector::Constant(1, 1.0), a, a.beta);
    w.trajectory("trajectories/" + a.label + ".csv", t, c.record_every);
    const auto errs = t.errors();
    const auto imin = static_cast<std::size_t>(std::min_element(errs.begin(), errs.end()) - errs.begin());
    Json j{{"argmin_t", t.records[imin].t}, {"terminated_by", to_string(t.terminated_by)}};
    if (a.algorithm == Algorithm::Egd) j["horizon"] = divergence_horizon(a.eta, 1.0, a.beta);
    out[a.label] = j;
  }
  res.summary = out;
  return res;
}

inline ExperimentResult run_diagonal(const ExperimentConfig& c, ArtifactWriter& w) {
  ExperimentResult res;
  const auto algs = resolve_algorithms(c);
  const ResolvedAlgorithm a = algs.empty() ? ResolvedAlgorithm{"egd", Algorithm::Egd, 0.01, 0.9, false, 3000, 0.0} : algs.front();
  const DiagonalSpec spec{c.alphas};
  const Objective obj = diagonal_objective(spec);
  const Trajectory t = run_analytic(obj, ParamVector::Ones(static_cast<Eigen::Index>(c.alphas.size())), a, a.beta);
  w.trajectory("trajectories/egd_diagonal.csv", t, c.record_every);
  const auto [equal, ratios] = diagonal_decoupling(spec, a.eta, a.beta, a.max_iters);
  Json coords = Json::array();
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    coords.push_back(Json{{"alpha", c.alphas[i]},
                          {"ratio", ratios[i]},
                          {"expected_ratio", std::pow(a.beta, 1.0 / (2.0 * c.alphas[i] - 2.0))}});
  }
  res.summary = Json{{"bitwise_decoupled", equal}, {"coordinates", coords}};
  res.ok = equal;
  if (!equal) res.failures.push_back("diagonal run differs from independent coordinate runs");
  return res;
}

inline ExperimentResult run_verify(const ExperimentConfig& c, const RunOptions& opt) {
  ExperimentResult res;
  VerifyOptions vo;
  vo.seed = c.base_seed;
  const auto checks = run_verify_suite(vo, [&](const VerifyCheck& k) {
    log_line(opt, std::string(k.passed ? "PASS " : "FAIL ") + k.name + " value=" + format_double(k.value) + " " +
                      k.criterion + (k.detail.empty() ? "" : " (" + k.detail + ")"));
  });
  Json arr = Json::array();
  for (const auto& k : checks) {
    arr.push_back(Json{{"name", k.name},
                       {"passed", k.passed},
                       {"value", k.value},
                       {"criterion", k.criterion},
                       {"detail", k.detail}});
    if (!k.passed) res.failures.push_back(k.name);
  }
  res.ok = res.failures.empty();
  res.summary = Json{{"checks", arr}, {"passed", res.ok}};
  return res;
}

inline RateStudySpec study_spec(const ExperimentConfig& c, int threads) {
  RateStudySpec s;
  s.family = is_gmm(c.experiment) ? ModelFamily::Gmm : ModelFamily::Glm;
  switch (c.experiment) {
    case Experiment::GlmHighSnr:
    case Experiment::GmmHighSnr: s.regime = Regime::HighSnr; break;
    case Experiment::GlmMiddleSnr: s.regime = Regime::MiddleSnr; break;
    default: s.regime = Regime::LowSnr; break;
  }
  s.d = c.d;
  s.p = c.p;
  s.sigma = c.sigma;
  s.snr = c.theta_star_norm.value_or(0.0) / c.sigma;
  s.n_grid = c.n_grid;
  s.replicates = c.replicates;
  s.base_seed = c.base_seed;
  s.init_radius = c.init_radius;
  s.threads = threads;
  const bool any_auto =
      std::any_of(c.algorithms.begin(), c.algorithms.end(), [](const auto& a) { return a.auto_beta; }) || c.auto_beta;
  const double c1 = any_auto ? *resolve_c1(c) : 0.0;
  for (const auto& a : resolve_algorithms(c)) {
    AlgorithmSpec as;
    as.label = a.label;
    as.algorithm = a.algorithm;
    as.eta = a.eta;
    as.beta = a.beta;
    as.auto_beta = a.auto_beta;
    as.c1 = c1;
    as.delta = c.delta;
    as.max_iters = a.max_iters;
    as.gradient_tolerance = a.gradient_tolerance;
    s.algorithms.push_back(as);
  }
  return s;
}

template <class Dataset>
Json cross_validation_entry(const Dataset& data, const ParamVector& theta0, const AlgorithmSpec& a, std::int64_t n,
                            int d, double split, std::uint64_t seed) {
  OptimizerConfig cfg;
  const double beta = resolve_beta(a, n, d);
  cfg.schedule = StepSchedule::exponential(a.eta, beta);
  cfg.max_iters = a.max_iters;
  cfg.gradient_tolerance = a.gradient_tolerance;
  const auto cv = cross_validated_stop(data, theta0, cfg, split, seed);
  const bool sym = ModelTraits<Dataset>::sign_symmetric(data);
  const CellOutcome oracle = summarize_trajectory(cv.trajectory, data.spec.theta_star, sym, false);
  return Json{{"n", n},
              {"selected_t", cv.selected_t},
              {"selected_error", estimation_error(cv.selected_theta, data.spec.theta_star, sym)},
              {"oracle_min_error", oracle.min_error},
              {"oracle_argmin_t", oracle.iters_to_min}};
}

inline ExperimentResult run_rate_experiment(const ExperimentConfig& c, const RunOptions& opt, ArtifactWriter& w) {
  ExperimentResult res;
  const RateStudySpec spec = study_spec(c, opt.threads);
  log_line(opt, std::string("rate study: ") + to_string(c.experiment) + ", " + std::to_string(spec.n_grid.size()) +
                    " sample sizes x " + std::to_string(spec.replicates) + " replicates");
  const RateStudyReport report = rate_study(spec);
  w.write("rate_study.csv", [&](std::ostream& os) { write_rate_study_csv(os, report); });

  Json summary = rate_study_to_json(report);
  Json betas = Json::array();
  for (const auto& a : spec.algorithms) {
    if (a.algorithm != Algorithm::Egd) continue;
    Json row{{"algorithm", a.label}, {"by_n", Json::array()}};
    for (auto n : spec.n_grid) row["by_n"].push_back(Json{{"n", n}, {"beta", resolve_beta(a, n, spec.d)}});
    betas.push_back(row);
  }
  summary["egd_beta"] = betas;
  if (std::any_of(spec.algorithms.begin(), spec.algorithms.end(), [](const auto& a) { return a.auto_beta; }))
    summary["c1"] = spec.algorithms.front().c1;

  if (c.cross_validation) {
    Json cv = Json::array();
    for (const auto& a : spec.algorithms) {
      if (a.algorithm != Algorithm::Egd) continue;
      Json rows = Json::array();
      for (auto n : spec.n_grid) {
        const ParamVector star = spec.theta_star(n);
        const ParamVector theta0 = initial_point(star, spec.init_radius, spec.base_seed);
        if (spec.family == ModelFamily::Glm) {
          const auto data = generate_glm(GlmSpec{spec.d, spec.p, star, spec.sigma, n}, spec.base_seed);
          rows.push_back(cross_validation_entry(data, theta0, a, n, spec.d, c.cv_split, spec.base_seed));
        } else {
          const auto data = generate_gmm(GmmSpec{spec.d, star, spec.sigma, n}, spec.base_seed);
          rows.push_back(cross_validation_entry(data, theta0, a, n, spec.d, c.cv_split, spec.base_seed));
        }
      }
      cv.push_back(Json{{"algorithm", a.label}, {"replicate_seed", spec.base_seed}, {"by_n", rows}});
    }
    summary["cross_validation"] = cv;
  }
  w.json("rate_study.json", summary);

  if (c.write_trajectories) {
    for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
      const auto n = spec.n_grid[ni];
      for (int rep = 0; rep < spec.replicates; ++rep) {
        const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(rep);
        const ParamVector star = spec.theta_star(n);
        const ParamVector theta0 = initial_point(star, spec.init_radius, seed);
        auto emit = [&](const auto& data) {
          const Objective obj = ModelTraits<std::decay_t<decltype(data)>>::objective(data);
          for (const auto& a : spec.algorithms) {
            OptimizerConfig cfg;
            const double beta = resolve_beta(a, n, spec.d);
            cfg.schedule = a.algorithm == Algorithm::Egd ? StepSchedule::exponential(a.eta, beta)
                                                         : StepSchedule::fixed(a.eta);
            cfg.max_iters = a.max_iters;
            cfg.gradient_tolerance = a.gradient_tolerance;
            Trajectory t = run_algorithm(a.algorithm, data, obj, theta0, cfg);
            t.seed = seed;
            w.trajectory("trajectories/" + a.label + "_n" + std::to_string(n) + "_rep" + std::to_string(rep) + ".csv",
                         t, c.record_every);
          }
        };
        if (spec.family == ModelFamily::Glm) emit(generate_glm(GlmSpec{spec.d, spec.p, star, spec.sigma, n}, seed));
        else emit(generate_gmm(GmmSpec{spec.d, star, spec.sigma, n}, seed));
      }
    }
  }

  res.summary = summary;
  res.failures = report.failures;
  res.ok = report.failures.empty();
  return res;
}

}  // namespace detail

inline Json make_manifest(const ExperimentConfig& c, const std::vector<std::string>& artifacts) {
  Json seeds = Json::array();
  if (is_rate_study(c.experiment)) {
    for (int r = 0; r < c.replicates; ++r) seeds.push_back(c.base_seed + static_cast<std::uint64_t>(r));
  } else {
    seeds.push_back(c.base_seed);
  }
  Json algs = Json::array();
  for (const auto& a : resolve_algorithms(c)) {
    algs.push_back(Json{{"label", a.label},
                        {"algorithm", to_string(a.algorithm)},
                        {"eta", a.eta},
                        {"beta", a.auto_beta ? Json("auto") : Json(a.beta)},
                        {"max_iters", a.max_iters},
                        {"gradient_tolerance", a.gradient_tolerance}});
  }
  Json cfg = config_to_json(c);
  cfg.erase("output_dir");
  std::vector<std::string> sorted = artifacts;
  std::sort(sorted.begin(), sorted.end());
  return Json{{"tool", "egd_cli"},
              {"version", kVersion},
              {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
              {"figure", experiment_info(c.experiment).figure},
              {"config", cfg},
              {"resolved_algorithms", algs},
              {"replicate_seeds", seeds},
              {"artifacts", sorted}};
}

/// Runs the experiment and writes artifacts plus manifest.json into
/// config.output_dir. Throws ConfigError for invalid configs; replicate
/// failures are reported in the result, not thrown.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& opt = {}) {
  validate_config(config);
  detail::ArtifactWriter w(config.output_dir);
  ExperimentResult res;
  switch (config.experiment) {
    case Experiment::AnalyticRates: res = detail::run_analytic_rates(config, w); break;
    case Experiment::EffectsEtaBeta: res = detail::run_effects(config, w); break;
    case Experiment::TwoPhase: res = detail::run_two_phase(config, w); break;
    case Experiment::Diagonal: res = detail::run_diagonal(config, w); break;
    case Experiment::Verify: res = detail::run_verify(config, opt); break;
    default: res = detail::run_rate_experiment(config, opt, w); break;
  }
  if (!is_rate_study(config.experiment)) w.json("summary.json", res.summary);
  res.artifacts = w.names();
  w.json("manifest.json", make_manifest(config, res.artifacts));
  res.artifacts = w.names();
  return res;
}

}  // namespace egd
