// CSV and JSON serialization of datasets and rate-study results.

#pragma once

#include "egd/analysis.hpp"
#include "egd/optimizer.hpp"
#include "egd/stat_models.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace egd {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Json vector_to_json(const ParamVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline ParamVector vector_from_json(const Json& a) {
  ParamVector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline void write_rows(std::ostream& os, const Matrix& X, const ParamVector* y) {
  for (Eigen::Index j = 0; j < X.cols(); ++j) os << (j ? "," : "") << "x_" << j;
  if (y) os << ",y";
  os << '\n';
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) os << (j ? "," : "") << format_double(X(i, j));
    if (y) os << ',' << format_double((*y)[i]);
    os << '\n';
  }
}

/// Reads a header plus numeric rows; returns the column matrix.
inline Matrix read_rows(std::istream& is, std::vector<std::string>& header) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "dataset csv: missing header");
  header = split_csv_line(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), "dataset csv: row " + std::to_string(rows.size() + 1) +
                                               " has " + std::to_string(cells.size()) + " fields, expected " +
                                               std::to_string(header.size()));
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(std::stod(c));
    rows.push_back(std::move(r));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Datasets: CSV rows plus a JSON sidecar holding spec and seed
// ---------------------------------------------------------------------------

inline void write_dataset_csv(std::ostream& os, const GlmDataset& data) { detail::write_rows(os, data.X, &data.Y); }
inline void write_dataset_csv(std::ostream& os, const GmmDataset& data) { detail::write_rows(os, data.X, nullptr); }

inline Json dataset_metadata(const GlmDataset& data) {
  return Json{{"model", "glm"},
              {"d", data.spec.d},
              {"p", data.spec.p},
              {"theta_star", detail::vector_to_json(data.spec.theta_star)},
              {"sigma", data.spec.sigma},
              {"n", data.spec.n},
              {"seed", data.seed}};
}

inline Json dataset_metadata(const GmmDataset& data) {
  return Json{{"model", "gmm"},
              {"d", data.spec.d},
              {"theta_star", detail::vector_to_json(data.spec.theta_star)},
              {"sigma", data.spec.sigma},
              {"n", data.spec.n},
              {"seed", data.seed}};
}

/// Writes `<prefix>.csv` and `<prefix>.json`.
template <class Dataset>
void save_dataset(const std::string& prefix, const Dataset& data) {
  std::ofstream csv(prefix + ".csv");
  if (!csv) throw std::runtime_error("cannot write " + prefix + ".csv");
  write_dataset_csv(csv, data);
  std::ofstream meta(prefix + ".json");
  if (!meta) throw std::runtime_error("cannot write " + prefix + ".json");
  meta << dataset_metadata(data).dump(2) << '\n';
}

inline GlmDataset load_glm_dataset(const std::string& prefix) {
  std::ifstream meta_in(prefix + ".json");
  if (!meta_in) throw std::runtime_error("cannot read " + prefix + ".json");
  const Json meta = Json::parse(meta_in);
  detail::require(meta.at("model") == "glm", "load_glm_dataset: sidecar is not a glm dataset");
  GlmDataset data;
  data.spec.d = meta.at("d").get<int>();
  data.spec.p = meta.at("p").get<int>();
  data.spec.theta_star = detail::vector_from_json(meta.at("theta_star"));
  data.spec.sigma = meta.at("sigma").get<double>();
  data.spec.n = meta.at("n").get<std::int64_t>();
  data.seed = meta.at("seed").get<std::uint64_t>();
  std::ifstream csv(prefix + ".csv");
  if (!csv) throw std::runtime_error("cannot read " + prefix + ".csv");
  std::vector<std::string> header;
  const Matrix m = detail::read_rows(csv, header);
  detail::require(m.cols() == data.spec.d + 1 && header.back() == "y", "load_glm_dataset: unexpected columns");
  detail::require(m.rows() == data.spec.n, "load_glm_dataset: row count does not match sidecar");
  data.X = m.leftCols(data.spec.d);
  data.Y = m.col(data.spec.d);
  return data;
}

inline GmmDataset load_gmm_dataset(const std::string& prefix) {
  std::ifstream meta_in(prefix + ".json");
  if (!meta_in) throw std::runtime_error("cannot read " + prefix + ".json");
  const Json meta = Json::parse(meta_in);
  detail::require(meta.at("model") == "gmm", "load_gmm_dataset: sidecar is not a gmm dataset");
  GmmDataset data;
  data.spec.d = meta.at("d").get<int>();
  data.spec.theta_star = detail::vector_from_json(meta.at("theta_star"));
  data.spec.sigma = meta.at("sigma").get<double>();
  data.spec.n = meta.at("n").get<std::int64_t>();
  data.seed = meta.at("seed").get<std::uint64_t>();
  std::ifstream csv(prefix + ".csv");
  if (!csv) throw std::runtime_error("cannot read " + prefix + ".csv");
  std::vector<std::string> header;
  data.X = detail::read_rows(csv, header);
  detail::require(data.X.cols() == data.spec.d, "load_gmm_dataset: unexpected columns");
  detail::require(data.X.rows() == data.spec.n, "load_gmm_dataset: row count does not match sidecar");
  return data;
}

// ---------------------------------------------------------------------------
// Rate studies
// ---------------------------------------------------------------------------

inline void write_rate_study_csv(std::ostream& os, const RateStudyReport& report) {
  os << "n,min_error_mean,min_error_stderr,iters_to_min_mean,iters_to_min_stderr,algorithm\n";
  for (const auto& res : report.results) {
    for (const auto& row : res.per_n) {
      os << row.n << ',' << format_double(row.min_error_mean) << ',' << format_double(row.min_error_stderr) << ','
         << format_double(row.iters_to_min_mean) << ',' << format_double(row.iters_to_min_stderr) << ','
         << res.algorithm << '\n';
    }
  }
}

inline Json rate_fit_to_json(const std::optional<RateFit>& f) {
  if (!f) return nullptr;
  return Json{{"slope", f->slope},       {"intercept", f->intercept}, {"r_squared", f->r_squared},
              {"window", {f->t_lo, f->t_hi}}, {"n_points", f->n_points}};
}

inline Json rate_study_to_json(const RateStudyReport& report) {
  Json results = Json::array();
  for (const auto& res : report.results) {
    Json per_n = Json::array();
    for (const auto& row : res.per_n) {
      per_n.push_back(Json{{"n", row.n},
                           {"min_error_mean", row.min_error_mean},
                           {"min_error_stderr", row.min_error_stderr},
                           {"iters_to_min_mean", row.iters_to_min_mean},
                           {"iters_to_min_stderr", row.iters_to_min_stderr},
                           {"successes", row.successes},
                           {"failures", row.failures}});
    }
    results.push_back(Json{{"algorithm", res.algorithm},
                           {"loglog_error_slope", rate_fit_to_json(res.loglog_error_slope)},
                           {"loglog_iters_slope", rate_fit_to_json(res.loglog_iters_slope)},
                           {"per_n", per_n}});
  }
  return Json{{"family", to_string(report.spec.family)},
              {"regime", to_string(report.spec.regime)},
              {"n_grid", report.spec.n_grid},
              {"replicates", report.spec.replicates},
              {"results", results},
              {"failures", report.failures}};
}

}  // namespace egd
