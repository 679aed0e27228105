#pragma once

#include <random>

#include "svcbilevel/newton_solver.hpp"

namespace svcb_test {

using namespace svcbilevel;

/// Random T-fold problem with m1 samples per fold; features drawn from N(0, scale^2),
/// labels from a planted hyperplane with a fraction `flip` of them flipped.
inline FoldedProblem<double> random_problem(int T, int n, int m1, std::uint64_t seed, double scale = 1.0,
                                            double flip = 0.15) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Eigen::VectorXd truth(n);
  for (int i = 0; i < n; ++i) truth(i) = N(gen);
  std::vector<Eigen::MatrixXd> pts(T);
  std::vector<Eigen::VectorXd> lab(T);
  for (int j = 0; j < T; ++j) {
    pts[j].resize(n, m1);
    lab[j].resize(m1);
    for (int c = 0; c < m1; ++c) {
      for (int i = 0; i < n; ++i) pts[j](i, c) = scale * N(gen);
      double y = pts[j].col(c).dot(truth) >= 0.0 ? 1.0 : -1.0;
      if (U(gen) < flip) y = -y;
      lab[j](c) = y;
    }
  }
  std::vector<Mat<double>> A(T), X(T);
  std::vector<Vec<double>> yhat(T);
  for (int j = 0; j < T; ++j) {
    A[j] = (pts[j] * lab[j].asDiagonal()).transpose();
    X[j].resize(n, (T - 1) * m1);
    yhat[j].resize((T - 1) * m1);
    int c = 0;
    for (int k = 0; k < T; ++k) {
      if (k == j) continue;
      X[j].middleCols(c, m1) = pts[k];
      yhat[j].segment(c, m1) = lab[k];
      c += m1;
    }
  }
  return make_folded_problem<double>(A, X, yhat);
}

inline Iterate<double> random_iterate(const FoldedProblem<double>& fp, std::mt19937_64& gen, double spread = 1.0) {
  std::uniform_real_distribution<double> U(-spread, spread);
  std::uniform_real_distribution<double> Upos(0.05, 1.0);
  Iterate<double> it;
  it.eps = Upos(gen);
  it.C = 2.0 * Upos(gen);
  it.mu = Vec<double>(fp.dim()).unaryExpr([&](double) { return U(gen); });
  it.w = Vec<double>(fp.dim()).unaryExpr([&](double) { return U(gen); });
  return it;
}

inline Vec<double> random_vector(Eigen::Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> N(0.0, 1.0);
  return Vec<double>(n).unaryExpr([&](double) { return N(gen); });
}

}  // namespace svcb_test

namespace svcb_test {

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
template <typename A, typename B>
double rel_err(const A& a, const B& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale < 1e-300 ? 0.0 : (a - b).norm() / scale;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-300 ? 0.0 : std::abs(a - b) / scale;
}

/// Central difference of a vector-valued map along direction d.
template <typename F>
Vec<double> central_diff(F&& f, const Vec<double>& x, const Vec<double>& d, double h) {
  return (f(Vec<double>(x + h * d)) - f(Vec<double>(x - h * d))) / (2.0 * h);
}

}  // namespace svcb_test
