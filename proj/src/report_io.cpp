#include "svcbilevel/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace svcbilevel {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_trace_csv(std::ostream& out, const SolveReport<double>& rep) {
  out << "k,eps,C,psi,E_hat_norm,ell,bicg_iters\n";
  for (const auto& r : rep.trace)
    out << r.k << ',' << fmt17(r.eps) << ',' << fmt17(r.C) << ',' << fmt17(r.psi) << ',' << fmt17(r.e_hat_norm)
        << ',' << r.ell << ',' << r.bicg_iters << '\n';
  out << rep.outer_iters << ',' << fmt17(rep.final.eps) << ',' << fmt17(rep.final.C) << ',' << fmt17(rep.final_psi)
      << ',' << fmt17(rep.final_e_hat_norm) << ",-1,-1\n";
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::vector<TraceRecord> rows;
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,eps,C,psi,E_hat_norm,ell,bicg_iters", 0) != 0)
    throw std::runtime_error("trace CSV header missing");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    TraceRecord r;
    char c1, c2, c3, c4, c5, c6;
    if (!(ss >> r.k >> c1 >> r.eps >> c2 >> r.C >> c3 >> r.psi >> c4 >> r.E_hat_norm >> c5 >> r.ell >> c6 >>
          r.bicg_iters))
      throw std::runtime_error("bad trace row: " + line);
    rows.push_back(r);
  }
  return rows;
}

std::string summary_header() { return "dataset,method,C,t,E_t,E_CV"; }

std::string summary_row(const std::string& dataset, const TuneResult& r, bool timing) {
  return dataset + ',' + r.method + ',' + fmt6(r.C_star) + ',' + fmt6(timing ? r.train_seconds : 0.0) + ',' +
         fmt6(r.E_t) + ',' + fmt6(r.E_CV);
}

nlohmann::json solver_config_json(const SolverConfig<double>& c) {
  return {{"eps_hat", c.eps_hat}, {"r", c.r},
          {"r_hat", c.r_hat},     {"eta_hat", c.eta_hat},
          {"rho", c.rho},         {"sigma", c.sigma},
          {"tau", c.tau},         {"kappa", c.kappa},
          {"eps0", c.eps0},       {"C0", c.C0},
          {"tol", c.tol},         {"max_outer", c.max_outer},
          {"max_line_search", c.max_line_search},
          {"bicg_max_iters", c.bicg_max_iters},
          {"zero_tol", c.zero_tol},
          {"jacobian", std::string(to_string(c.jacobian_mode))}};
}

SolverConfig<double> solver_config_from_json(const nlohmann::json& j) {
  SolverConfig<double> c;
  c.eps_hat = j.value("eps_hat", c.eps_hat);
  c.r = j.value("r", c.r);
  c.r_hat = j.value("r_hat", c.r_hat);
  c.eta_hat = j.value("eta_hat", c.eta_hat);
  c.rho = j.value("rho", c.rho);
  c.sigma = j.value("sigma", c.sigma);
  c.tau = j.value("tau", c.tau);
  c.kappa = j.value("kappa", c.kappa);
  c.eps0 = j.value("eps0", c.eps0);
  c.C0 = j.value("C0", c.C0);
  c.tol = j.value("tol", c.tol);
  c.max_outer = j.value("max_outer", c.max_outer);
  c.max_line_search = j.value("max_line_search", c.max_line_search);
  c.bicg_max_iters = j.value("bicg_max_iters", c.bicg_max_iters);
  c.zero_tol = j.value("zero_tol", c.zero_tol);
  c.jacobian_mode = parse_jacobian_mode(j.value("jacobian", std::string("implicit")));
  return c;
}

nlohmann::json solve_report_json(const SolveReport<double>& rep, bool timing) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& r : rep.trace)
    trace.push_back({{"k", r.k},
                     {"eps", r.eps},
                     {"C", r.C},
                     {"psi", r.psi},
                     {"E_hat_norm", r.e_hat_norm},
                     {"E_norm", r.E_norm},
                     {"ell", r.ell},
                     {"bicg_iters", r.bicg_iters},
                     {"R_norm", r.r_norm},
                     {"R_target", r.r_target},
                     {"E_plus_grad_eps_norm", r.e_plus_grad_eps_norm},
                     {"eta", r.eta},
                     {"zeta", r.zeta},
                     {"dense_fallback", r.dense_fallback}});
  const auto& d = rep.diagnostics;
  return {{"converged", rep.converged},
          {"outer_iters", rep.outer_iters},
          {"total_bicg_iters", rep.total_bicg_iters},
          {"dense_fallbacks", rep.dense_fallbacks},
          {"final",
           {{"eps", rep.final.eps},
            {"C", rep.final.C},
            {"lambda", d.lambda_star},
            {"E_hat_norm", rep.final_e_hat_norm},
            {"eps_norm", rep.final_eps_norm},
            {"E_norm", rep.final_E_norm},
            {"psi", rep.final_psi}}},
          {"diagnostics",
           {{"z_star", d.z_star},
            {"iota_star", d.iota_star},
            {"lambda_star", d.lambda_star},
            {"nu_star", d.nu_star},
            {"case", std::string(to_string(d.cone_case))},
            {"strict_local_min", d.strict_local_min},
            {"verdict", d.verdict()}}},
          {"wall_time_seconds", timing ? rep.wall_time_seconds : 0.0},
          {"trace", trace}};
}

nlohmann::json tune_result_json(const std::string& dataset, const TuneResult& r, bool timing) {
  nlohmann::json j = {{"dataset", dataset},
                      {"method", r.method},
                      {"folds", r.T},
                      {"C_star", r.C_star},
                      {"C_hat", r.C_hat},
                      {"w_hat", to_std(r.w_hat)},
                      {"w_star", to_std(r.w_star)},
                      {"E_t", r.E_t},
                      {"E_t_w_star", r.E_t_w_star},
                      {"E_CV", r.E_CV},
                      {"t", timing ? r.train_seconds : 0.0},
                      {"converged", r.converged}};
  if (r.solve_report) j["solve_report"] = solve_report_json(*r.solve_report, timing);
  if (r.grid) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < r.grid->table.size(); ++i)
      rows.push_back({{"C", r.grid->table[i].C}, {"E_CV", r.grid->table[i].E_CV}, {"best", i == r.grid->best_index}});
    j["grid"] = rows;
  }
  return j;
}

nlohmann::json classifier_json(const Classifier& c) {
  return {{"C_hat", c.C_hat}, {"w_hat", to_std(c.w_hat)}, {"n", c.w_hat.size()}, {"metadata", c.metadata}};
}

Classifier classifier_from_json(const nlohmann::json& j) {
  Classifier c;
  try {
    c.C_hat = j.at("C_hat").get<double>();
    const auto w = j.at("w_hat").get<std::vector<double>>();
    const auto n = j.at("n").get<std::size_t>();
    if (w.size() != n) throw std::runtime_error("w_hat has " + std::to_string(w.size()) + " entries, n = " + std::to_string(n));
    c.w_hat = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    c.metadata = j.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed classifier: ") + e.what());
  }
  return c;
}

Classifier read_classifier(const std::filesystem::path& path) { return classifier_from_json(read_json(path)); }

nlohmann::json manifest_json(const RunManifest& m) {
  return {{"command", m.command},   {"data", m.data},
          {"folds", m.folds},       {"train_size", m.train_size},
          {"seed", m.seed},         {"solver", solver_config_json(m.solver)},
          {"grid", m.grid},         {"out_dir", m.out_dir},
          {"format", m.format},     {"timing", m.timing},
          {"tool_version", m.tool_version}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.data = j.at("data").get<std::string>();
    m.folds = j.at("folds").get<int>();
    m.train_size = j.at("train_size").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.solver = solver_config_from_json(j.at("solver"));
    m.grid = j.value("grid", std::vector<double>{});
    m.out_dir = j.value("out_dir", std::string());
    m.format = j.value("format", std::string("csv"));
    m.timing = j.value("timing", true);
    m.tool_version = j.value("tool_version", std::string(kToolVersion));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace svcbilevel
