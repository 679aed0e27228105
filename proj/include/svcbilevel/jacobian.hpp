#pragma once

#include <stdexcept>
#include <string_view>

#include "svcbilevel/smoothing.hpp"

namespace svcbilevel {

enum class JacobianMode { implicit, explicit_ };

inline std::string_view to_string(JacobianMode m) { return m == JacobianMode::implicit ? "implicit" : "explicit"; }

inline JacobianMode parse_jacobian_mode(std::string_view s) {
  if (s == "implicit") return JacobianMode::implicit;
  if (s == "explicit") return JacobianMode::explicit_;
  throw std::invalid_argument("jacobian mode must be 'implicit' or 'explicit'");
}

/// Stacked X^T v over folds, length T m2.
template <typename Scalar>
Vec<Scalar> stacked_Xt(const FoldedProblem<Scalar>& fp, const Vec<Scalar>& v) {
  Vec<Scalar> out(static_cast<Eigen::Index>(fp.T) * fp.m2);
  for (int j = 0; j < fp.T; ++j)
    out.segment(static_cast<Eigen::Index>(j) * fp.m2, fp.m2).noalias() = fp.X[j].transpose() * fp.block(v, j);
  return out;
}

/// Jacobian of E-hat at one iterate, as used by the Newton step.
///
/// In the variable order (eps, C, mu, w) the Jacobian is
///
///   [ 1             0             0          0            ]
///   [ kappa C - h1  1+kappa eps-h2  h2 g^T   h2 mu^T grad g ]
///   [ 0             grad g mu     P          alpha        ]
///   [ 0             g             0          P            ]
///
/// with P = I + C grad g and alpha = (1/(T m1)) A^T Diag(p) A + C X Diag(X^T mu) Diag(q) X^T.
/// Both P and alpha are symmetric. Implicit mode keeps only the diagonal weights
/// and applies the blocks through the fold factors; explicit mode also holds P
/// and alpha as dense Tn x Tn matrices.
template <typename Scalar>
struct JacobianBlocks {
  const FoldedProblem<Scalar>* fp = nullptr;
  JacobianMode mode = JacobianMode::implicit;
  Scalar eps{}, C{}, kappa{};
  Scalar h1{}, h2{};
  Vec<Scalar> g;
  Vec<Scalar> dg_mu;
  Vec<Scalar> u;          // weights of grad g
  Vec<Scalar> p;          // weights of the validation curvature term
  Vec<Scalar> alpha_w;    // (X^T mu) .* q, weights of the training curvature term
  Vec<Scalar> e_hat;      // E-hat at this iterate
  Mat<Scalar> P_dense;    // explicit mode only
  Mat<Scalar> alpha_dense;

  Eigen::Index dim() const { return g.size(); }
  Eigen::Index reduced_size() const { return 2 * dim() + 1; }
  Eigen::Index full_size() const { return 2 * dim() + 2; }

  /// First-row coefficient of the reduced system, 1 + kappa eps - h2.
  Scalar corner() const { return Scalar(1) + kappa * eps - h2; }

  Vec<Scalar> apply_P(const Vec<Scalar>& d) const {
    if (mode == JacobianMode::explicit_) return P_dense * d;
    return d + C * apply_XDXt(*fp, u, d);
  }

  Vec<Scalar> apply_alpha(const Vec<Scalar>& d) const {
    if (mode == JacobianMode::explicit_) return alpha_dense * d;
    return fp->inv_Tm1() * apply_ADAt(*fp, p, d) + C * apply_XDXt(*fp, alpha_w, d);
  }

  Mat<Scalar> P_matrix() const {
    if (mode == JacobianMode::explicit_) return P_dense;
    Mat<Scalar> out = C * assemble_XDXt(*fp, u);
    out.diagonal().array() += Scalar(1);
    return out;
  }

  Mat<Scalar> alpha_matrix() const {
    if (mode == JacobianMode::explicit_) return alpha_dense;
    return fp->inv_Tm1() * assemble_ADAt(*fp, p) + C * assemble_XDXt(*fp, alpha_w);
  }

  /// M (dC, dmu, dw) for the (C, mu, w) rows and columns of the Jacobian.
  Vec<Scalar> apply_reduced(const Vec<Scalar>& x) const {
    const Eigen::Index m = dim();
    const Scalar dC = x(0);
    const Vec<Scalar> dmu = x.segment(1, m);
    const Vec<Scalar> dw = x.segment(1 + m, m);
    Vec<Scalar> out(reduced_size());
    out(0) = corner() * dC + h2 * g.dot(dmu) + h2 * dg_mu.dot(dw);
    out.segment(1, m) = dg_mu * dC + apply_P(dmu) + apply_alpha(dw);
    out.segment(1 + m, m) = g * dC + apply_P(dw);
    return out;
  }

  /// M^T x, using the symmetry of P and alpha.
  Vec<Scalar> apply_reduced_transpose(const Vec<Scalar>& x) const {
    const Eigen::Index m = dim();
    const Scalar x0 = x(0);
    const Vec<Scalar> x1 = x.segment(1, m);
    const Vec<Scalar> x2 = x.segment(1 + m, m);
    Vec<Scalar> out(reduced_size());
    out(0) = corner() * x0 + dg_mu.dot(x1) + g.dot(x2);
    out.segment(1, m) = h2 * g * x0 + apply_P(x1);
    out.segment(1 + m, m) = h2 * dg_mu * x0 + apply_alpha(x1) + apply_P(x2);
    return out;
  }

  Mat<Scalar> reduced_matrix() const {
    const Eigen::Index m = dim();
    const Mat<Scalar> P = P_matrix();
    Mat<Scalar> M = Mat<Scalar>::Zero(reduced_size(), reduced_size());
    M(0, 0) = corner();
    M.block(0, 1, 1, m) = h2 * g.transpose();
    M.block(0, 1 + m, 1, m) = h2 * dg_mu.transpose();
    M.block(1, 0, m, 1) = dg_mu;
    M.block(1, 1, m, m) = P;
    M.block(1, 1 + m, m, m) = alpha_matrix();
    M.block(1 + m, 0, m, 1) = g;
    M.block(1 + m, 1 + m, m, m) = P;
    return M;
  }

  /// Column of the Jacobian belonging to eps, rows 2.. (the E part).
  Scalar eps_coupling() const { return kappa * C - h1; }

  Mat<Scalar> full_matrix() const {
    Mat<Scalar> J = Mat<Scalar>::Zero(full_size(), full_size());
    J(0, 0) = Scalar(1);
    J(1, 0) = eps_coupling();
    J.bottomRightCorner(reduced_size(), reduced_size()) = reduced_matrix();
    return J;
  }
};

template <typename Scalar>
JacobianBlocks<Scalar> build_blocks(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it,
                                    const IterateEval<Scalar>& ev, Scalar kappa, JacobianMode mode) {
  JacobianBlocks<Scalar> b;
  b.fp = &fp;
  b.mode = mode;
  b.eps = it.eps;
  b.C = it.C;
  b.kappa = kappa;
  const auto hub = huber(it.eps, it.C - ev.mu_dot_g);
  b.h1 = hub.d_eps;
  b.h2 = hub.d_t;
  b.g = ev.g;
  b.dg_mu = ev.dg_mu;
  b.u = ev.model.u;
  b.p = ev.model.p;
  b.alpha_w = stacked_Xt(fp, it.mu).cwiseProduct(ev.model.q);
  b.e_hat = E_hat(fp, it, ev, kappa);
  if (mode == JacobianMode::explicit_) {
    b.mode = JacobianMode::implicit;  // assemble through the factored path once
    b.P_dense = b.P_matrix();
    b.alpha_dense = b.alpha_matrix();
    b.mode = JacobianMode::explicit_;
  }
  return b;
}

template <typename Scalar>
JacobianBlocks<Scalar> build_blocks(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it, Scalar kappa,
                                    JacobianMode mode) {
  return build_blocks(fp, it, evaluate_iterate(fp, it), kappa, mode);
}

/// J d for a full direction d = (d_eps, d_C, d_mu, d_w).
template <typename Scalar>
Vec<Scalar> apply_full_jacobian(const JacobianBlocks<Scalar>& b, const Vec<Scalar>& d) {
  if (d.size() != b.full_size())
    throw std::invalid_argument("direction has length " + std::to_string(d.size()) + ", expected " +
                                std::to_string(b.full_size()));
  Vec<Scalar> out(b.full_size());
  out(0) = d(0);
  out.tail(b.reduced_size()) = b.apply_reduced(d.tail(b.reduced_size()));
  out(1) += b.eps_coupling() * d(0);
  return out;
}

/// Newton equation with d_eps = -eps + zeta eps_hat eliminated.
template <typename Scalar>
struct ReducedSystem {
  Scalar d_eps{};
  Vec<Scalar> rhs;  // -(E + J_eps d_eps)
};

template <typename Scalar>
ReducedSystem<Scalar> reduced_system(const JacobianBlocks<Scalar>& b, const Iterate<Scalar>& it, Scalar zeta,
                                     Scalar eps_hat) {
  ReducedSystem<Scalar> sys;
  sys.d_eps = -it.eps + zeta * eps_hat;
  sys.rhs = -b.e_hat.tail(b.reduced_size());
  sys.rhs(0) -= b.eps_coupling() * sys.d_eps;
  return sys;
}

}  // namespace svcbilevel
