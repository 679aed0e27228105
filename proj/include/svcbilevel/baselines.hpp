#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>

#include "svcbilevel/folded_problem.hpp"

namespace svcbilevel {

/// Candidate values of C for the grid baseline.
struct GridSpec {
  std::vector<double> values;

  /// 0.5e-4, 1e-4, 0.5e-3, 1e-3, ..., 0.5e4, 1e4
  static GridSpec standard() {
    GridSpec g;
    for (int e = -4; e <= 4; ++e) {
      const double base = std::pow(10.0, e);
      g.values.push_back(0.5 * base);
      g.values.push_back(base);
    }
    return g;
  }

  void validate() const {
    if (values.empty()) throw std::invalid_argument("grid is empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] > 0.0)) throw std::invalid_argument("grid values must be positive");
      if (i > 0 && !(values[i] > values[i - 1])) throw std::invalid_argument("grid values must be strictly increasing");
    }
  }
};

template <typename Scalar>
struct LowerSolve {
  Vec<Scalar> w;
  int iters = 0;
  Scalar grad_norm{};
};

/// Damped Newton for min ||w||^2/2 + C sum log(1 + e^{-y x^T w}) from w = 0.
/// The Hessian is I + C X Diag(u) X^T; Armijo backtracking on the objective.
/// Stops at ||grad|| <= tol (1 + C ||X||_F), the scale below which rounding in the
/// loss term dominates for large C.
template <typename Scalar>
LowerSolve<Scalar> solve_logistic_svc(const Mat<Scalar>& X, const Vec<Scalar>& y, Scalar C, Scalar tol = Scalar(1e-10),
                                      int max_iters = 100) {
  if (C < Scalar(0)) throw std::invalid_argument("C must be nonnegative");
  LowerSolve<Scalar> out;
  out.w = Vec<Scalar>::Zero(X.rows());
  const Scalar target = tol * (Scalar(1) + C * X.norm());
  for (int it = 0; it <= max_iters; ++it) {
    const Vec<Scalar> grad = logistic_svc_gradient(X, y, out.w, C);
    out.grad_norm = grad.norm();
    out.iters = it;
    if (out.grad_norm <= target) return out;
    if (it == max_iters) break;

    const Vec<Scalar> u = (X.transpose() * out.w).unaryExpr([](Scalar t) { return logistic_curvature(t); });
    Mat<Scalar> H = C * X * u.asDiagonal() * X.transpose();
    H.diagonal().array() += Scalar(1);
    const Vec<Scalar> dir = -H.llt().solve(grad);

    const Scalar f0 = logistic_svc_objective(X, y, out.w, C);
    const Scalar slope = grad.dot(dir);
    Scalar step(1);
    for (int ls = 0; ls < 60; ++ls, step *= Scalar(0.5)) {
      const Vec<Scalar> trial = out.w + step * dir;
      if (logistic_svc_objective(X, y, trial, C) <= f0 + Scalar(1e-4) * step * slope) break;
      // Near the minimizer the objective decrease drops below rounding; fall back to the gradient.
      if (logistic_svc_gradient(X, y, trial, C).norm() <= Scalar(0.5) * out.grad_norm) break;
    }
    out.w += step * dir;
  }
  std::ostringstream msg;
  msg << "lower-level Newton stopped at gradient norm " << out.grad_norm << " > " << target << " after " << max_iters
      << " iterations (C = " << C << ")";
  throw std::runtime_error(msg.str());
}

/// Minimizer of fold j's training problem.
template <typename Scalar>
Vec<Scalar> solve_lower(const FoldedProblem<Scalar>& fp, int j, Scalar C, Scalar tol = Scalar(1e-10)) {
  return solve_logistic_svc(fp.X[j], fp.yhat[j], C, tol).w;
}

/// All T lower-level minimizers stacked.
template <typename Scalar>
Vec<Scalar> solve_all_lower(const FoldedProblem<Scalar>& fp, Scalar C, Scalar tol = Scalar(1e-10)) {
  Vec<Scalar> w(fp.dim());
  for (int j = 0; j < fp.T; ++j) fp.block(w, j) = solve_lower(fp, j, C, tol);
  return w;
}

struct GridRow {
  double C = 0.0;
  double E_CV = 0.0;
};

struct GridResult {
  double C_best = 0.0;
  std::size_t best_index = 0;
  std::vector<GridRow> table;
  Vec<double> w_best;
};

/// Cross-validation error at every grid value; the first minimum wins ties within 1e-12.
inline GridResult grid_search(const FoldedProblem<double>& fp, const GridSpec& grid, double tol = 1e-10,
                              unsigned threads = 0) {
  grid.validate();
  const std::size_t N = grid.values.size();
  std::vector<Vec<double>> ws(N);
  std::vector<std::exception_ptr> errors(N);
  auto work = [&](std::size_t i) {
    try {
      ws[i] = solve_all_lower(fp, grid.values[i], tol);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, N));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < N; i += threads) work(i);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  GridResult res;
  for (std::size_t i = 0; i < N; ++i) {
    res.table.push_back({grid.values[i], upper_objective(fp, ws[i])});
    if (i == 0 || res.table[i].E_CV < res.table[res.best_index].E_CV - 1e-12) res.best_index = i;
  }
  res.C_best = grid.values[res.best_index];
  res.w_best = ws[res.best_index];
  return res;
}

}  // namespace svcbilevel
