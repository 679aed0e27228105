#pragma once

#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "svcbilevel/dataio.hpp"
#include "svcbilevel/logistic.hpp"

namespace svcbilevel {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// T-fold block structure of the cross-validation program.
///
/// Fold j owns a validation block A[j] (m1 x n, rows y_i x_i^T) and a training
/// block X[j] (n x m2, columns x_i) with labels yhat[j]. The stacked operators
/// A and X of the single-level program are block diagonal in these pieces, and
/// w, mu in R^{T n} are split the same way. Nothing here ever mixes folds.
template <typename Scalar>
struct FoldedProblem {
  int T = 0;
  int n = 0;
  int m1 = 0;
  int m2 = 0;
  std::vector<Mat<Scalar>> A;
  std::vector<Mat<Scalar>> X;
  std::vector<Vec<Scalar>> yhat;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(T) * n; }
  Scalar inv_Tm1() const { return Scalar(1) / (Scalar(T) * Scalar(m1)); }

  template <typename V>
  auto block(V& v, int j) const {
    return v.segment(static_cast<Eigen::Index>(j) * n, n);
  }
};

/// Builds a FoldedProblem from explicit per-fold blocks; checks shapes.
template <typename Scalar>
FoldedProblem<Scalar> make_folded_problem(std::vector<Mat<Scalar>> A, std::vector<Mat<Scalar>> X,
                                          std::vector<Vec<Scalar>> yhat) {
  if (A.empty() || A.size() != X.size() || X.size() != yhat.size())
    throw std::invalid_argument("fold block counts disagree");
  FoldedProblem<Scalar> fp;
  fp.T = static_cast<int>(A.size());
  fp.n = static_cast<int>(A.front().cols());
  fp.m1 = static_cast<int>(A.front().rows());
  fp.m2 = static_cast<int>(X.front().cols());
  for (int j = 0; j < fp.T; ++j) {
    if (A[j].rows() != fp.m1 || A[j].cols() != fp.n || X[j].rows() != fp.n || X[j].cols() != fp.m2 ||
        yhat[j].size() != fp.m2)
      throw std::invalid_argument("fold " + std::to_string(j) + " has inconsistent block shapes");
    for (Eigen::Index i = 0; i < yhat[j].size(); ++i)
      if (yhat[j](i) != Scalar(1) && yhat[j](i) != Scalar(-1))
        throw std::invalid_argument("training labels must be +1 or -1");
  }
  fp.A = std::move(A);
  fp.X = std::move(X);
  fp.yhat = std::move(yhat);
  return fp;
}

/// Fold j validates on plan.folds[j] and trains on the other folds, in fold order.
inline FoldedProblem<double> assemble(const Dataset& ds, const SplitPlan& plan) {
  const int T = plan.num_folds();
  std::vector<Mat<double>> A(T), X(T);
  std::vector<Vec<double>> yhat(T);
  for (int j = 0; j < T; ++j) {
    const auto& val = plan.folds[j];
    Mat<double> cols = ds.dense_columns(val);
    Vec<double> ybar(static_cast<Eigen::Index>(val.size()));
    for (std::size_t i = 0; i < val.size(); ++i) ybar(static_cast<Eigen::Index>(i)) = ds.labels[val[i]];
    A[j] = (cols * ybar.asDiagonal()).transpose();

    std::vector<std::size_t> train;
    for (int k = 0; k < T; ++k)
      if (k != j) train.insert(train.end(), plan.folds[k].begin(), plan.folds[k].end());
    X[j] = ds.dense_columns(train);
    yhat[j].resize(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) yhat[j](static_cast<Eigen::Index>(i)) = ds.labels[train[i]];
  }
  return make_folded_problem<double>(std::move(A), std::move(X), std::move(yhat));
}

/// Per-point model quantities at a fixed w. All vectors are fold-stacked.
template <typename Scalar>
struct ModelEval {
  Vec<Scalar> w;
  Vec<Scalar> val_margin;    // A w, length T m1
  Vec<Scalar> train_margin;  // X^T w, length T m2
  Vec<Scalar> s;             // (1 + e^{A w})^{-1}, in (0, 1)
  Vec<Scalar> u;             // (2 + e^{-x^T w} + e^{x^T w})^{-1}, in (0, 1/4]
  Vec<Scalar> hX;            // tanh(x^T w / 2), in (-1, 1)
  Vec<Scalar> p;             // e^{A w} / (1 + e^{A w})^2
  Vec<Scalar> q;             // du / d(x^T w)
};

template <typename Scalar>
ModelEval<Scalar> evaluate(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& w) {
  assert(w.size() == fp.dim());
  ModelEval<Scalar> ev;
  ev.w = w;
  ev.val_margin.resize(static_cast<Eigen::Index>(fp.T) * fp.m1);
  ev.train_margin.resize(static_cast<Eigen::Index>(fp.T) * fp.m2);
  for (int j = 0; j < fp.T; ++j) {
    const auto wj = fp.block(w, j);
    ev.val_margin.segment(static_cast<Eigen::Index>(j) * fp.m1, fp.m1).noalias() = fp.A[j] * wj;
    ev.train_margin.segment(static_cast<Eigen::Index>(j) * fp.m2, fp.m2).noalias() = fp.X[j].transpose() * wj;
  }
  ev.s = ev.val_margin.unaryExpr([](Scalar t) { return sigmoid(-t); });
  ev.p = ev.val_margin.unaryExpr([](Scalar t) { return logistic_curvature(t); });
  ev.u = ev.train_margin.unaryExpr([](Scalar t) { return logistic_curvature(t); });
  ev.hX = ev.train_margin.unaryExpr([](Scalar t) { return h_logistic(t); });
  ev.q = ev.train_margin.unaryExpr([](Scalar t) { return logistic_curvature_slope(t); });
  return ev;
}

/// f(w) = 1^T log(1 + e^{-A w})
template <typename Scalar>
Scalar eval_f(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& w) {
  Scalar total(0);
  for (int j = 0; j < fp.T; ++j) {
    const Vec<Scalar> margin = fp.A[j] * fp.block(w, j);
    for (Eigen::Index i = 0; i < margin.size(); ++i) total += softplus(-margin(i));
  }
  return total;
}

/// grad f(w) = -A^T s(w)
template <typename Scalar>
Vec<Scalar> grad_f(const FoldedProblem<Scalar>& fp, const ModelEval<Scalar>& ev) {
  Vec<Scalar> out(fp.dim());
  for (int j = 0; j < fp.T; ++j)
    fp.block(out, j).noalias() = -fp.A[j].transpose() * ev.s.segment(static_cast<Eigen::Index>(j) * fp.m1, fp.m1);
  return out;
}

template <typename Scalar>
Vec<Scalar> grad_f(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& w) {
  return grad_f(fp, evaluate(fp, w));
}

/// g(w) = X (h_X(w) - yhat) / 2
template <typename Scalar>
Vec<Scalar> eval_g(const FoldedProblem<Scalar>& fp, const ModelEval<Scalar>& ev) {
  Vec<Scalar> out(fp.dim());
  for (int j = 0; j < fp.T; ++j)
    fp.block(out, j).noalias() =
        Scalar(0.5) * fp.X[j] * (ev.hX.segment(static_cast<Eigen::Index>(j) * fp.m2, fp.m2) - fp.yhat[j]);
  return out;
}

template <typename Scalar>
Vec<Scalar> eval_g(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& w) {
  return eval_g(fp, evaluate(fp, w));
}

/// X Diag(weights) X^T d, blockwise, never forming the product matrix.
template <typename Scalar>
Vec<Scalar> apply_XDXt(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& weights, const Vec<Scalar>& d) {
  Vec<Scalar> out(fp.dim());
  for (int j = 0; j < fp.T; ++j) {
    Vec<Scalar> t = fp.X[j].transpose() * fp.block(d, j);
    t.array() *= weights.segment(static_cast<Eigen::Index>(j) * fp.m2, fp.m2).array();
    fp.block(out, j).noalias() = fp.X[j] * t;
  }
  return out;
}

/// A^T Diag(weights) A d, blockwise.
template <typename Scalar>
Vec<Scalar> apply_ADAt(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& weights, const Vec<Scalar>& d) {
  Vec<Scalar> out(fp.dim());
  for (int j = 0; j < fp.T; ++j) {
    Vec<Scalar> t = fp.A[j] * fp.block(d, j);
    t.array() *= weights.segment(static_cast<Eigen::Index>(j) * fp.m1, fp.m1).array();
    fp.block(out, j).noalias() = fp.A[j].transpose() * t;
  }
  return out;
}

/// Dense block-diagonal X Diag(weights) X^T of size Tn x Tn.
template <typename Scalar>
Mat<Scalar> assemble_XDXt(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& weights) {
  Mat<Scalar> out = Mat<Scalar>::Zero(fp.dim(), fp.dim());
  for (int j = 0; j < fp.T; ++j) {
    const Eigen::Index o = static_cast<Eigen::Index>(j) * fp.n;
    out.block(o, o, fp.n, fp.n).noalias() =
        fp.X[j] * weights.segment(static_cast<Eigen::Index>(j) * fp.m2, fp.m2).asDiagonal() * fp.X[j].transpose();
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> assemble_ADAt(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& weights) {
  Mat<Scalar> out = Mat<Scalar>::Zero(fp.dim(), fp.dim());
  for (int j = 0; j < fp.T; ++j) {
    const Eigen::Index o = static_cast<Eigen::Index>(j) * fp.n;
    out.block(o, o, fp.n, fp.n).noalias() =
        fp.A[j].transpose() * weights.segment(static_cast<Eigen::Index>(j) * fp.m1, fp.m1).asDiagonal() * fp.A[j];
  }
  return out;
}

/// grad g(w) d = X Diag(u(w)) X^T d
template <typename Scalar>
Vec<Scalar> grad_g_apply(const FoldedProblem<Scalar>& fp, const ModelEval<Scalar>& ev, const Vec<Scalar>& d) {
  return apply_XDXt(fp, ev.u, d);
}

template <typename Scalar>
Vec<Scalar> grad_g_apply(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& w, const Vec<Scalar>& d) {
  return grad_g_apply(fp, evaluate(fp, w), d);
}

/// Explicit symmetric positive semidefinite grad g(w).
template <typename Scalar>
Mat<Scalar> grad_g_matrix(const FoldedProblem<Scalar>& fp, const ModelEval<Scalar>& ev) {
  return assemble_XDXt(fp, ev.u);
}

template <typename Scalar>
Mat<Scalar> grad_g_matrix(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& w) {
  return grad_g_matrix(fp, evaluate(fp, w));
}

/// F(w_j) = ||w_j||^2 / 2 + C sum_i log(1 + e^{-yhat_i x_i^T w_j})
template <typename Scalar>
Scalar logistic_svc_objective(const Mat<Scalar>& X, const Vec<Scalar>& y, const Vec<Scalar>& w, Scalar C) {
  const Vec<Scalar> margin = X.transpose() * w;
  Scalar loss(0);
  for (Eigen::Index i = 0; i < margin.size(); ++i) loss += softplus(-y(i) * margin(i));
  return Scalar(0.5) * w.squaredNorm() + C * loss;
}

/// grad F(w_j) = w_j + (C/2) X (h(X^T w_j) - yhat)
template <typename Scalar>
Vec<Scalar> logistic_svc_gradient(const Mat<Scalar>& X, const Vec<Scalar>& y, const Vec<Scalar>& w, Scalar C) {
  const Vec<Scalar> h = (X.transpose() * w).unaryExpr([](Scalar t) { return h_logistic(t); });
  return w + Scalar(0.5) * C * X * (h - y);
}

template <typename Scalar>
Scalar lower_objective(const FoldedProblem<Scalar>& fp, int j, const Vec<Scalar>& wj, Scalar C) {
  return logistic_svc_objective(fp.X[j], fp.yhat[j], wj, C);
}

template <typename Scalar>
Vec<Scalar> lower_gradient(const FoldedProblem<Scalar>& fp, int j, const Vec<Scalar>& wj, Scalar C) {
  return logistic_svc_gradient(fp.X[j], fp.yhat[j], wj, C);
}

/// w + C g(w); zero exactly when every fold's w_j minimizes its training problem.
template <typename Scalar>
Vec<Scalar> nlp_residual(const FoldedProblem<Scalar>& fp, Scalar C, const Vec<Scalar>& w) {
  return w + C * eval_g(fp, w);
}

/// Mean validation logistic loss f(w) / (T m1); the cross-validation error.
template <typename Scalar>
Scalar upper_objective(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& w) {
  return eval_f(fp, w) * fp.inv_Tm1();
}

}  // namespace svcbilevel
