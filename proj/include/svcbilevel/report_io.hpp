#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "svcbilevel/cv_driver.hpp"

namespace svcbilevel {

inline constexpr const char* kToolVersion = "0.1.0";

/// Six significant digits, the granularity of every human-facing number.
std::string fmt6(double v);

/// Trace rows `k,eps,C,psi,E_hat_norm,ell,bicg_iters`, one per outer iteration,
/// plus a closing row for the final iterate with ell = bicg_iters = -1. Values are
/// written at full precision so the line-search inequality can be rechecked.
void write_trace_csv(std::ostream& out, const SolveReport<double>& rep);

struct TraceRecord {
  int k = 0;
  double eps = 0.0, C = 0.0, psi = 0.0, E_hat_norm = 0.0;
  int ell = 0;
  int bicg_iters = 0;
};

std::vector<TraceRecord> read_trace_csv(std::istream& in);

/// `dataset,method,C,t,E_t,E_CV`
std::string summary_header();
std::string summary_row(const std::string& dataset, const TuneResult& r, bool timing = true);

nlohmann::json solver_config_json(const SolverConfig<double>& cfg);
SolverConfig<double> solver_config_from_json(const nlohmann::json& j);

nlohmann::json solve_report_json(const SolveReport<double>& rep, bool timing = true);
nlohmann::json tune_result_json(const std::string& dataset, const TuneResult& r, bool timing = true);

/// A saved classifier: C_hat, w_hat, n and free-form metadata.
struct Classifier {
  double C_hat = 0.0;
  Eigen::VectorXd w_hat;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json classifier_json(const Classifier& c);
Classifier classifier_from_json(const nlohmann::json& j);
Classifier read_classifier(const std::filesystem::path& path);

/// Everything needed to rerun a command and reproduce its files.
struct RunManifest {
  std::string command;
  std::string data;
  int folds = 3;
  std::size_t train_size = 0;
  std::uint64_t seed = 20240101;
  SolverConfig<double> solver;
  std::vector<double> grid;
  std::string out_dir;
  std::string format = "csv";
  bool timing = true;
  std::string tool_version = kToolVersion;
};

nlohmann::json manifest_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace svcbilevel
