#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svcbilevel/baselines.hpp"
#include "svcbilevel/dataio.hpp"
#include "svcbilevel/newton_solver.hpp"

namespace svcbilevel {

/// Outcome of one tuning pipeline: the selected C, the final classifier and its errors.
struct TuneResult {
  std::string method;  // "imSN", "exSN" or "GS-UNC"
  int T = 0;
  double C_star = 0.0;
  double C_hat = 0.0;
  Vec<double> w_hat;
  Vec<double> w_star;         // fold-stacked lower-level solutions at C_star
  double E_t = 0.0;           // hold-out error of w_hat, percent
  double E_t_w_star = 0.0;    // mean hold-out error of the T fold classifiers, percent
  double E_CV = 0.0;          // upper objective at w_star
  double train_seconds = 0.0;
  bool converged = true;
  std::optional<SolveReport<double>> solve_report;
  std::optional<GridResult> grid;
};

/// Omega = every index the split drew into the cross-validation pool.
inline std::vector<std::size_t> omega_indices(const SplitPlan& plan) {
  std::vector<std::size_t> all = plan.cv_indices;
  all.insert(all.end(), plan.dropped.begin(), plan.dropped.end());
  return all;
}

struct PostProcessed {
  double C_hat = 0.0;
  Vec<double> w_hat;
};

/// C_hat = C_star T / (T - 1), then retrain one classifier on all of Omega.
inline PostProcessed post_process(const Eigen::MatrixXd& X_omega, const Eigen::VectorXd& y_omega, double C_star, int T,
                                  double tol = 1e-10) {
  if (C_star < 0.0) throw std::invalid_argument("C_star must be nonnegative");
  if (T < 2) throw std::invalid_argument("need at least 2 folds");
  PostProcessed out;
  out.C_hat = C_star * T / (T - 1);
  out.w_hat = solve_logistic_svc<double>(X_omega, y_omega, out.C_hat, tol).w;
  return out;
}

inline Eigen::VectorXd labels_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) y(static_cast<Eigen::Index>(i)) = ds.labels[idx[i]];
  return y;
}

/// Percentage of misclassified columns of X; sign(0) counts as +1.
inline double test_error(const Eigen::VectorXd& w, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (y.size() == 0) throw std::invalid_argument("test set is empty");
  const Eigen::VectorXd margin = X.transpose() * w;
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) wrong += ((margin(i) >= 0.0 ? 1.0 : -1.0) != y(i)) ? 1 : 0;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(y.size());
}

inline double test_error(const Eigen::VectorXd& w, const Dataset& ds, const std::vector<std::size_t>& idx) {
  return test_error(w, ds.dense_columns(idx), labels_of(ds, idx));
}

namespace detail {

inline void finish(TuneResult& r, const Dataset& ds, const SplitPlan& plan, const FoldedProblem<double>& fp,
                   std::chrono::steady_clock::time_point t0) {
  const auto omega = omega_indices(plan);
  const auto pp = post_process(ds.dense_columns(omega), labels_of(ds, omega), r.C_star, r.T);
  r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.C_hat = pp.C_hat;
  r.w_hat = pp.w_hat;
  r.E_CV = upper_objective(fp, r.w_star);
  if (plan.test_indices.empty()) return;
  const Eigen::MatrixXd Xt = ds.dense_columns(plan.test_indices);
  const Eigen::VectorXd yt = labels_of(ds, plan.test_indices);
  r.E_t = test_error(r.w_hat, Xt, yt);
  double sum = 0.0;
  for (int j = 0; j < fp.T; ++j) sum += test_error(Vec<double>(fp.block(r.w_star, j)), Xt, yt);
  r.E_t_w_star = sum / fp.T;
}

}  // namespace detail

/// SN-CV: split, solve the bilevel program by smoothing Newton, post-process, score.
inline TuneResult run_sncv(const Dataset& ds, const SplitPlan& plan, const SolverConfig<double>& cfg) {
  const auto fp = assemble(ds, plan);
  const auto t0 = std::chrono::steady_clock::now();
  TuneResult r;
  r.method = cfg.jacobian_mode == JacobianMode::implicit ? "imSN" : "exSN";
  r.T = fp.T;
  r.solve_report = solve(fp, cfg);
  r.converged = r.solve_report->converged;
  r.C_star = std::max(0.0, r.solve_report->final.C);
  r.w_star = r.solve_report->final.w;
  detail::finish(r, ds, plan, fp, t0);
  return r;
}

inline TuneResult run_sncv(const Dataset& ds, int T, std::size_t l1, std::uint64_t seed,
                           const SolverConfig<double>& cfg) {
  return run_sncv(ds, make_split(ds, T, l1, seed), cfg);
}

/// Same pipeline with the grid baseline choosing C.
inline TuneResult run_grid(const Dataset& ds, const SplitPlan& plan, const GridSpec& grid, double tol = 1e-10) {
  const auto fp = assemble(ds, plan);
  const auto t0 = std::chrono::steady_clock::now();
  TuneResult r;
  r.method = "GS-UNC";
  r.T = fp.T;
  r.grid = grid_search(fp, grid, tol);
  r.C_star = r.grid->C_best;
  r.w_star = r.grid->w_best;
  detail::finish(r, ds, plan, fp, t0);
  return r;
}

inline TuneResult run_grid(const Dataset& ds, int T, std::size_t l1, std::uint64_t seed, const GridSpec& grid,
                           double tol = 1e-10) {
  return run_grid(ds, make_split(ds, T, l1, seed), grid, tol);
}

}  // namespace svcbilevel
