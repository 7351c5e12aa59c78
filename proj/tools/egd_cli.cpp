// egd_cli: run optimizers, rate studies, verification checks and figure
// experiments, writing CSV/JSON artifacts.

#include "egd/experiments.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Overrides {
  std::string config_path;
  std::string eta;
  std::string beta;
  std::string c1;
  std::string n_grid;
  std::string max_iters;
  std::string replicates;
  std::string seed;
  std::string output_dir;
  bool trajectories = false;
  bool no_cv = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file, or a manifest.json from an earlier run");
  cmd->add_option("--eta", o.eta, "base step size for egd/gd");
  cmd->add_option("--beta", o.beta, "egd scale parameter in (0, 1], or \"auto\" for the sample-size rule");
  cmd->add_option("--c1", o.c1, "smoothness-growth constant used by --beta auto");
  cmd->add_option("--n-grid", o.n_grid, "comma-separated sample sizes, e.g. 1024,4096,16384");
  cmd->add_option("--max-iters", o.max_iters, "iteration budget for every algorithm");
  cmd->add_option("--replicates", o.replicates, "replicates per sample size");
  cmd->add_option("--seed", o.seed, "base seed; replicate r uses seed + r");
  cmd->add_option("--output-dir", o.output_dir, "directory for artifacts");
  cmd->add_flag("--trajectories", o.trajectories, "also write one trajectory CSV per (algorithm, n, replicate)");
  cmd->add_flag("--no-cv", o.no_cv, "skip the cross-validated stopping summary");
}

template <class T>
T parse_number(const std::string& s, const char* field) {
  std::istringstream is(s);
  T v{};
  is >> v;
  if (!is || !is.eof()) throw egd::ConfigError(field, "cannot parse '" + s + "'");
  return v;
}

/// Loads the config (or the experiment defaults) and applies flag overrides.
egd::ExperimentConfig build_config(egd::Experiment fallback, const Overrides& o) {
  egd::Json j;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw egd::ConfigError("config", "cannot open " + o.config_path);
    try {
      j = egd::Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw egd::ConfigError("config", e.what());
    }
    if (j.contains("config") && j.at("config").is_object()) j = j.at("config");
  } else {
    j = egd::Json{{"experiment", egd::to_string(fallback)}};
  }
  if (!o.eta.empty()) j["eta"] = parse_number<double>(o.eta, "eta");
  if (!o.beta.empty()) {
    if (o.beta == "auto") j["beta"] = "auto";
    else j["beta"] = parse_number<double>(o.beta, "beta");
    if (j.contains("algorithms")) {
      for (auto& a : j["algorithms"])
        if (a.is_object()) a.erase("beta");
    }
  }
  if (!o.c1.empty()) j["c1"] = parse_number<double>(o.c1, "c1");
  if (!o.n_grid.empty()) {
    std::vector<std::int64_t> grid;
    std::stringstream ss(o.n_grid);
    std::string cell;
    while (std::getline(ss, cell, ',')) grid.push_back(parse_number<std::int64_t>(cell, "n_grid"));
    j["n_grid"] = grid;
  }
  if (!o.max_iters.empty()) {
    j["max_iters"] = parse_number<std::int64_t>(o.max_iters, "max_iters");
    if (j.contains("algorithms")) {
      for (auto& a : j["algorithms"])
        if (a.is_object()) a.erase("max_iters");
    }
  }
  if (!o.replicates.empty()) j["replicates"] = parse_number<int>(o.replicates, "replicates");
  if (!o.seed.empty()) j["base_seed"] = parse_number<std::uint64_t>(o.seed, "seed");
  if (!o.output_dir.empty()) j["output_dir"] = o.output_dir;
  if (o.trajectories) j["write_trajectories"] = true;
  if (o.no_cv) j["cross_validation"] = false;
  return egd::parse_config(j);
}

int threads_from_env() {
  const char* s = std::getenv("EGD_THREADS");
  if (!s || !*s) return 0;
  try {
    const int n = std::stoi(s);
    if (n < 1) throw std::invalid_argument("");
    return n;
  } catch (const std::exception&) {
    throw egd::ConfigError("EGD_THREADS", std::string("must be a positive integer, got '") + s + "'");
  }
}

void print_rate_summary(const egd::Json& summary) {
  for (const auto& r : summary.at("results")) {
    std::cout << r.at("algorithm").get<std::string>() << ": ";
    const auto& e = r.at("loglog_error_slope");
    const auto& it = r.at("loglog_iters_slope");
    std::cout << "error slope " << (e.is_null() ? "n/a" : egd::format_double(e.at("slope").get<double>()))
              << ", iters slope " << (it.is_null() ? "n/a" : egd::format_double(it.at("slope").get<double>())) << '\n';
  }
}

int run(const egd::ExperimentConfig& config) {
  egd::RunOptions opt;
  opt.threads = threads_from_env();
  opt.log = &std::cerr;
  const auto res = egd::run_experiment(config, opt);
  if (egd::is_rate_study(config.experiment)) print_rate_summary(res.summary);
  std::cout << "wrote " << res.artifacts.size() << " artifacts to " << config.output_dir << '\n';
  if (!res.ok) {
    for (const auto& f : res.failures) std::cerr << "failure: " << f << '\n';
    return kExitRuntime;
  }
  return 0;
}

struct OptimizeArgs {
  std::string objective = "power";
  std::string algorithm = "egd";
  int p = 2;
  int d = 1;
  double eta = 0.01;
  std::string beta = "0.9";
  std::int64_t max_iters = 1000;
  double theta0 = 1.0;
  double sigma = 1.0;
  double theta_star_norm = 0.0;
  std::int64_t n = 4096;
  std::uint64_t seed = 1;
  double gradient_tolerance = 1e-14;
  std::int64_t record_every = 1;
  std::string output = "-";
};

int run_optimize(const OptimizeArgs& a) {
  const auto alg = egd::algorithm_from_string(a.algorithm);
  if (!alg) throw egd::ConfigError("algorithm", "expected egd, gd or em");
  const bool model = a.objective == "glm" || a.objective == "gmm";
  if (!model && a.objective != "power" && a.objective != "quadratic")
    throw egd::ConfigError("objective", "expected power, quadratic, glm or gmm");
  if (*alg == egd::Algorithm::Em && a.objective != "gmm")
    throw egd::ConfigError("algorithm", "em is only available for the gmm objective");
  if (a.max_iters < 1) throw egd::ConfigError("max_iters", "must be >= 1");
  if (!(a.eta > 0.0)) throw egd::ConfigError("eta", "must be > 0");

  egd::OptimizerConfig cfg;
  cfg.max_iters = a.max_iters;
  cfg.gradient_tolerance = a.gradient_tolerance;
  cfg.record_every = a.record_every;
  double beta = 1.0;
  if (*alg == egd::Algorithm::Egd) {
    if (a.beta == "auto") {
      if (!model) throw egd::ConfigError("beta", "\"auto\" needs a model objective (glm or gmm)");
      egd::ExperimentConfig ec;
      ec.experiment = a.objective == "glm" ? egd::Experiment::GlmLowSnr : egd::Experiment::GmmOverSpecified;
      ec.d = a.d;
      ec.p = a.p;
      ec.sigma = a.sigma;
      ec.base_seed = a.seed;
      beta = egd::resolve_auto_beta(a.eta, *egd::resolve_c1(ec), a.n, a.d, 0.05);
    } else {
      beta = parse_number<double>(a.beta, "beta");
      if (!(beta > 0.0 && beta <= 1.0)) throw egd::ConfigError("beta", "must lie in (0, 1]");
    }
  }
  cfg.schedule = *alg == egd::Algorithm::Egd ? egd::StepSchedule::exponential(a.eta, beta)
                 : *alg == egd::Algorithm::Em ? egd::StepSchedule::fixed(a.sigma * a.sigma)
                                              : egd::StepSchedule::fixed(a.eta);

  egd::Trajectory traj;
  if (!model) {
    if (a.d < 1 || a.p < 1) throw egd::ConfigError("d", "d and p must be >= 1");
    const egd::Objective obj =
        a.objective == "power" ? egd::power_norm_objective(a.p, a.d) : egd::quadratic_objective(a.d);
    traj = egd::run_optimizer(obj, egd::ParamVector::Constant(a.d, a.theta0), cfg, obj.optimum);
  } else {
    if (a.n < 10) throw egd::ConfigError("n", "must be >= 10");
    egd::ParamVector star = egd::ParamVector::Zero(a.d);
    star[0] = a.theta_star_norm;
    const egd::ParamVector theta0 = egd::initial_point(star, 0.5, a.seed);
    if (a.objective == "glm") {
      const auto data = egd::generate_glm(egd::GlmSpec{a.d, a.p, star, a.sigma, a.n}, a.seed);
      traj = egd::run_algorithm(*alg, data, egd::ModelTraits<egd::GlmDataset>::objective(data), theta0, cfg);
    } else {
      const auto data = egd::generate_gmm(egd::GmmSpec{a.d, star, a.sigma, a.n}, a.seed);
      traj = egd::run_algorithm(*alg, data, egd::ModelTraits<egd::GmmDataset>::objective(data), theta0, cfg);
    }
    traj.seed = a.seed;
  }
  if (a.output == "-") {
    egd::write_trajectory_csv(std::cout, traj, a.record_every);
  } else {
    std::ofstream os(a.output, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + a.output);
    egd::write_trajectory_csv(os, traj, a.record_every);
  }
  std::cerr << "terminated_by " << egd::to_string(traj.terminated_by) << " after " << traj.records.back().t
            << " iterations\n";
  return 0;
}

std::string figure_help() {
  std::ostringstream os;
  os << "Figure ids:\n";
  for (const auto& info : egd::experiment_catalog())
    os << "  " << info.figure << (std::string(info.figure).size() < 10 ? std::string(10 - std::string(info.figure).size(), ' ') : " ")
       << info.name << ": " << info.description << '\n';
  os << "\nExit codes: 0 success, 1 runtime or replicate failure, 2 invalid configuration.\n"
        "EGD_THREADS caps rate-study worker threads (default: logical cores).";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponential step-size gradient descent experiments"};
  app.footer(figure_help());
  app.require_subcommand(1);

  OptimizeArgs oa;
  auto* optimize = app.add_subcommand("optimize", "run one optimizer and write its trajectory CSV");
  optimize->add_option("--objective", oa.objective, "power (|theta|^(2p)/(2p)), quadratic, glm or gmm")->capture_default_str();
  optimize->add_option("--algorithm", oa.algorithm, "egd, gd or em")->capture_default_str();
  optimize->add_option("--p", oa.p, "power / link degree")->capture_default_str();
  optimize->add_option("--d", oa.d, "dimension")->capture_default_str();
  optimize->add_option("--eta", oa.eta, "base step size")->capture_default_str();
  optimize->add_option("--beta", oa.beta, "egd scale parameter, or auto (model objectives)")->capture_default_str();
  optimize->add_option("--max-iters", oa.max_iters, "iteration budget")->capture_default_str();
  optimize->add_option("--theta0", oa.theta0, "initial value of every coordinate (analytic objectives)")->capture_default_str();
  optimize->add_option("--sigma", oa.sigma, "noise level (model objectives)")->capture_default_str();
  optimize->add_option("--theta-star-norm", oa.theta_star_norm, "|theta*| along e1 (model objectives)")->capture_default_str();
  optimize->add_option("--n", oa.n, "sample size (model objectives)")->capture_default_str();
  optimize->add_option("--seed", oa.seed, "data and initialization seed")->capture_default_str();
  optimize->add_option("--gradient-tolerance", oa.gradient_tolerance, "stop when |grad| falls below this")->capture_default_str();
  optimize->add_option("--record-every", oa.record_every, "keep every k-th iterate")->capture_default_str();
  optimize->add_option("--output", oa.output, "trajectory CSV path, - for stdout")->capture_default_str();

  Overrides rs_o, fig_o, ver_o;
  std::string rs_experiment = "glm_low_snr";
  auto* rate = app.add_subcommand("rate-study", "Monte Carlo statistical-rate study over an n grid");
  rate->add_option("--experiment", rs_experiment,
                   "glm_low_snr, glm_high_snr, glm_middle_snr, gmm_over_specified or gmm_high_snr")
      ->capture_default_str();
  add_overrides(rate, rs_o);

  auto* verify = app.add_subcommand("verify", "gradient, homogeneity, stability, EM and structural checks");
  verify->add_option("--seed", ver_o.seed, "probe seed");
  verify->add_option("--output-dir", ver_o.output_dir, "directory for summary.json and manifest.json");

  std::string figure_id;
  auto* figure = app.add_subcommand("figure", "regenerate the data behind one figure id (see list below)");
  figure->add_option("id", figure_id, "figure id or experiment name")->required();
  add_overrides(figure, fig_o);
  figure->footer(figure_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*optimize) return run_optimize(oa);
    if (*rate) {
      auto e = egd::experiment_from_string(rs_experiment);
      if (!e || !egd::is_rate_study(*e)) throw egd::ConfigError("experiment", "not a rate-study experiment: " + rs_experiment);
      auto config = build_config(*e, rs_o);
      if (!egd::is_rate_study(config.experiment))
        throw egd::ConfigError("experiment", std::string("not a rate-study experiment: ") + egd::to_string(config.experiment));
      return run(config);
    }
    if (*verify) {
      if (ver_o.output_dir.empty()) ver_o.output_dir = "egd_verify";
      return run(build_config(egd::Experiment::Verify, ver_o));
    }
    if (*figure) {
      const auto e = egd::experiment_from_figure(figure_id);
      if (!e) throw egd::ConfigError("id", "unknown figure id '" + figure_id + "'");
      auto config = build_config(*e, fig_o);
      if (config.experiment != *e)
        throw egd::ConfigError("experiment", "config names " + std::string(egd::to_string(config.experiment)) +
                                                 " but figure " + figure_id + " was requested");
      return run(config);
    }
  } catch (const egd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const egd::DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const egd::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
