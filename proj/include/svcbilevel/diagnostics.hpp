#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "svcbilevel/bicg.hpp"
#include "svcbilevel/jacobian.hpp"

namespace svcbilevel {

/// Which piece of the critical cone applies at a KKT point.
enum class ConeCase { C_positive, C_zero_lambda_zero, C_zero_lambda_positive };

inline std::string_view to_string(ConeCase c) {
  switch (c) {
    case ConeCase::C_positive: return "C_positive";
    case ConeCase::C_zero_lambda_zero: return "C_zero_lambda_zero";
    case ConeCase::C_zero_lambda_positive: return "C_zero_lambda_positive";
  }
  return "unknown";
}

template <typename Scalar>
struct SecondOrderReport {
  Scalar z_star{};
  Scalar iota_star{};
  Scalar lambda_star{};
  Scalar nu_star{};
  ConeCase cone_case = ConeCase::C_positive;
  bool strict_local_min = false;

  /// "strict local minimizer (case i|ii|iii)" or "unverified (...)".
  std::string verdict() const {
    switch (cone_case) {
      case ConeCase::C_positive:
        return strict_local_min ? "strict local minimizer (case i)" : "unverified (case i, z <= 0)";
      case ConeCase::C_zero_lambda_zero:
        return strict_local_min ? "strict local minimizer (case ii)" : "unverified (case ii, iota <= 0)";
      case ConeCase::C_zero_lambda_positive:
        return "strict local minimizer (case iii)";
    }
    return "unverified";
  }
};

/// P^{-1} v for the SPD block P = I + C grad g at the given Jacobian snapshot.
template <typename Scalar>
Vec<Scalar> solve_P(const JacobianBlocks<Scalar>& b, const Vec<Scalar>& v) {
  if (b.mode == JacobianMode::explicit_) {
    Eigen::LLT<Mat<Scalar>> llt(b.P_dense);
    if (llt.info() != Eigen::Success) throw std::runtime_error("P is not numerically positive definite");
    return llt.solve(v);
  }
  KrylovConfig<Scalar> cfg;
  cfg.rel_tol = Scalar(1e-13);
  cfg.abs_tol = Scalar(0);
  const auto res = cg_solve<Scalar>([&](const Vec<Scalar>& d) { return b.apply_P(d); }, v, cfg);
  if (res.breakdown || !res.x.allFinite()) throw std::runtime_error("P solve broke down");
  return res.x;
}

/// z(mu, v) = g^T P^{-1} (alpha P^{-1} g - 2 grad g mu). With y = P^{-1} g and P
/// symmetric this is y^T alpha y - 2 y^T grad g mu, one P solve.
template <typename Scalar>
Scalar compute_z(const JacobianBlocks<Scalar>& b) {
  const Vec<Scalar> y = solve_P(b, b.g);
  return y.dot(b.apply_alpha(y)) - Scalar(2) * y.dot(b.dg_mu);
}

template <typename Scalar>
Scalar compute_z(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it,
                 JacobianMode mode = JacobianMode::implicit, Scalar kappa = Scalar(1)) {
  return compute_z(build_blocks(fp, it, kappa, mode));
}

/// iota(mu) = (1/4) mu^T X X^T X yhat + (1/(16 T m1)) ||A X yhat||^2, by factored products.
template <typename Scalar>
Scalar compute_iota(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& mu) {
  Scalar cross(0), sq(0);
  for (int j = 0; j < fp.T; ++j) {
    const Vec<Scalar> xy = fp.X[j] * fp.yhat[j];
    cross += (fp.X[j].transpose() * fp.block(mu, j)).dot(fp.X[j].transpose() * xy);
    sq += (fp.A[j] * xy).squaredNorm();
  }
  return cross / Scalar(4) + sq / (Scalar(16) * Scalar(fp.T) * Scalar(fp.m1));
}

/// nu = 1 + kappa eps + h2 (z - 1); nonzero whenever z > -kappa eps and eps > 0.
template <typename Scalar>
Scalar compute_nu(Scalar eps, Scalar kappa, Scalar h2, Scalar z) {
  return Scalar(1) + kappa * eps + h2 * (z - Scalar(1));
}

/// Second-order sufficiency check at an (approximate) KKT point.
template <typename Scalar>
SecondOrderReport<Scalar> classify(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it, Scalar kappa,
                                   Scalar tol_zero = Scalar(1e-8), JacobianMode mode = JacobianMode::implicit) {
  const auto blocks = build_blocks(fp, it, kappa, mode);
  SecondOrderReport<Scalar> rep;
  rep.lambda_star = -it.mu.dot(blocks.g);
  const Scalar zero_C = tol_zero * std::max(Scalar(1), std::abs(it.C));
  rep.z_star = compute_z(blocks);
  rep.iota_star = compute_iota(fp, it.mu);
  rep.nu_star = compute_nu(it.eps, kappa, blocks.h2, rep.z_star);
  if (it.C > zero_C) {
    rep.cone_case = ConeCase::C_positive;
    rep.strict_local_min = rep.z_star > Scalar(0);
  } else if (rep.lambda_star > tol_zero) {
    rep.cone_case = ConeCase::C_zero_lambda_positive;
    rep.strict_local_min = true;
  } else {
    rep.cone_case = ConeCase::C_zero_lambda_zero;
    rep.strict_local_min = rep.iota_star > Scalar(0);
  }
  return rep;
}

}  // namespace svcbilevel
