#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace svcbilevel {

template <typename Scalar>
struct KrylovConfig {
  int max_iters = 0;  // 0 means 10 * system size
  Scalar rel_tol = Scalar(1e-10);
  Scalar abs_tol = Scalar(1e-14);
  Scalar breakdown_tol = Scalar(1e-30);
  std::uint64_t shadow_seed = 0x9e3779b97f4a7c15ULL;
};

template <typename Scalar>
struct KrylovResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar residual_norm{};  // true residual ||b - M x||
  int iters = 0;
  bool converged = false;
  bool breakdown = false;
  int restarts = 0;
};

/// Bi-conjugate gradients for a square, possibly nonsymmetric M given only as
/// products x -> M x and x -> M^T x. Starts from zero. The shadow residual is
/// the initial residual; after a breakdown the method restarts once from the
/// current iterate with a seeded pseudo-random shadow vector.
///
/// Convergence is declared on the true residual ||b - M x|| <= max(rel_tol ||b||, abs_tol).
/// Without convergence the iterate with the smallest residual seen is returned.
template <typename Scalar, typename ApplyM, typename ApplyMt>
KrylovResult<Scalar> bicg_solve(ApplyM&& apply_M, ApplyMt&& apply_Mt,
                                const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                                const KrylovConfig<Scalar>& cfg = {}) {
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = b.size();
  const int max_iters = cfg.max_iters > 0 ? cfg.max_iters : static_cast<int>(10 * n);
  const Scalar target = std::max(cfg.rel_tol * b.norm(), cfg.abs_tol);

  KrylovResult<Scalar> res;
  res.x = V::Zero(n);
  if (b.norm() <= target) {
    res.residual_norm = b.norm();
    res.converged = true;
    return res;
  }

  V x = V::Zero(n);
  V r = b;
  V rt = r;
  V p(n), pt(n);
  Scalar rho_prev(0);
  bool fresh = true;

  V best_x = x;
  Scalar best_norm = r.norm();

  auto restart = [&]() -> bool {
    if (res.restarts > 0) return false;
    ++res.restarts;
    r = b - apply_M(x);
    std::mt19937_64 gen(cfg.shadow_seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    rt = V::NullaryExpr(n, [&](Eigen::Index) { return Scalar(unif(gen)); });
    fresh = true;
    return true;
  };

  while (res.iters < max_iters) {
    const Scalar rho = rt.dot(r);
    if (std::abs(rho) <= cfg.breakdown_tol) {
      if (!restart()) {
        res.breakdown = true;
        break;
      }
      continue;
    }
    if (fresh) {
      p = r;
      pt = rt;
      fresh = false;
    } else {
      const Scalar beta = rho / rho_prev;
      p = r + beta * p;
      pt = rt + beta * pt;
    }
    const V q = apply_M(p);
    const V qt = apply_Mt(pt);
    const Scalar denom = pt.dot(q);
    if (std::abs(denom) <= cfg.breakdown_tol) {
      if (!restart()) {
        res.breakdown = true;
        break;
      }
      continue;
    }
    const Scalar alpha = rho / denom;
    x += alpha * p;
    r -= alpha * q;
    rt -= alpha * qt;
    rho_prev = rho;
    ++res.iters;

    const Scalar rn = r.norm();
    if (!std::isfinite(rn)) {
      res.breakdown = true;
      break;
    }
    if (rn <= target) {
      const Scalar true_norm = (b - apply_M(x)).norm();
      if (true_norm <= target) {
        res.x = x;
        res.residual_norm = true_norm;
        res.converged = true;
        return res;
      }
      r = b - apply_M(x);  // recursive residual drifted; resynchronize
    }
    if (rn < best_norm) {
      best_norm = rn;
      best_x = x;
    }
  }
  res.x = best_x;
  res.residual_norm = (b - apply_M(best_x)).norm();
  res.converged = res.residual_norm <= target;
  return res;
}

/// Conjugate gradients for a symmetric positive definite operator.
template <typename Scalar, typename ApplyM>
KrylovResult<Scalar> cg_solve(ApplyM&& apply_M, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                              const KrylovConfig<Scalar>& cfg = {}) {
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = b.size();
  const int max_iters = cfg.max_iters > 0 ? cfg.max_iters : static_cast<int>(10 * n);
  const Scalar target = std::max(cfg.rel_tol * b.norm(), cfg.abs_tol);
  KrylovResult<Scalar> res;
  V x = V::Zero(n);
  V r = b;
  V p = r;
  Scalar rr = r.squaredNorm();
  while (std::sqrt(rr) > target && res.iters < max_iters) {
    const V q = apply_M(p);
    const Scalar pq = p.dot(q);
    if (pq <= Scalar(0)) {
      res.breakdown = true;
      break;
    }
    const Scalar alpha = rr / pq;
    x += alpha * p;
    r -= alpha * q;
    const Scalar rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++res.iters;
  }
  res.x = x;
  res.residual_norm = (b - apply_M(x)).norm();
  res.converged = res.residual_norm <= target;
  return res;
}

}  // namespace svcbilevel
