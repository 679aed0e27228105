#pragma once

#include <cmath>

#include "svcbilevel/folded_problem.hpp"

namespace svcbilevel {

/// Huber smoothing of max(0, t) with its partial derivatives.
template <typename Scalar>
struct HuberEval {
  Scalar value;
  Scalar d_eps;  // h1
  Scalar d_t;    // h2
};

/// h(eps, t): t - |eps|/2 above |eps|, t^2 / (2|eps|) on [0, |eps|], 0 below zero.
/// At eps = 0 this is max(0, t), and the derivatives are the selections
/// h2 = [t > 0], h1 = -1/2 for t > 0 and 0 otherwise.
template <typename Scalar>
HuberEval<Scalar> huber(Scalar eps, Scalar t) {
  const Scalar a = std::abs(eps);
  const Scalar sgn = eps > Scalar(0) ? Scalar(1) : (eps < Scalar(0) ? Scalar(-1) : Scalar(0));
  if (a == Scalar(0)) {
    if (t > Scalar(0)) return {t, Scalar(-0.5), Scalar(1)};
    return {Scalar(0), Scalar(0), Scalar(0)};
  }
  if (t > a) return {t - a / 2, -sgn / 2, Scalar(1)};
  if (t >= Scalar(0)) return {t * t / (2 * a), -sgn * t * t / (2 * a * a), t / a};
  return {Scalar(0), Scalar(0), Scalar(0)};
}

/// Smoothing Newton iterate (eps, C, mu, w); lambda = -mu^T g(w) is eliminated.
template <typename Scalar>
struct Iterate {
  Scalar eps{};
  Scalar C{};
  Vec<Scalar> mu;
  Vec<Scalar> w;

  Eigen::Index dim() const { return w.size(); }

  /// this + step * (d_eps, d_C, d_mu, d_w) with the full direction packed as one vector.
  Iterate moved(const Vec<Scalar>& delta, Scalar step) const {
    const Eigen::Index m = dim();
    Iterate out;
    out.eps = eps + step * delta(0);
    out.C = C + step * delta(1);
    out.mu = mu + step * delta.segment(2, m);
    out.w = w + step * delta.segment(2 + m, m);
    return out;
  }
};

template <typename Scalar>
Iterate<Scalar> initial_iterate(const FoldedProblem<Scalar>& fp, Scalar eps0, Scalar C0) {
  return {eps0, C0, Vec<Scalar>::Zero(fp.dim()), Vec<Scalar>::Zero(fp.dim())};
}

/// The model quantities one iterate needs; shared by residuals, Jacobian and diagnostics.
template <typename Scalar>
struct IterateEval {
  ModelEval<Scalar> model;
  Vec<Scalar> g;        // g(w)
  Vec<Scalar> grad_f;   // -A^T s
  Vec<Scalar> dg_mu;    // grad g(w) mu
  Scalar mu_dot_g{};    // mu^T g(w) = -lambda
};

template <typename Scalar>
IterateEval<Scalar> evaluate_iterate(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it) {
  IterateEval<Scalar> ev;
  ev.model = evaluate(fp, it.w);
  ev.g = eval_g(fp, ev.model);
  ev.grad_f = grad_f(fp, ev.model);
  ev.dg_mu = grad_g_apply(fp, ev.model, it.mu);
  ev.mu_dot_g = it.mu.dot(ev.g);
  return ev;
}

namespace detail {

// Shared tail [ (1/(T m1)) grad f + (I + C grad g) mu ; w + C g ].
template <typename Scalar, typename Out>
void fill_stationarity_blocks(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it,
                              const IterateEval<Scalar>& ev, Out&& out) {
  const Eigen::Index m = fp.dim();
  out.head(m) = fp.inv_Tm1() * ev.grad_f + it.mu + it.C * ev.dg_mu;
  out.tail(m) = it.w + it.C * ev.g;
}

}  // namespace detail

/// Nonsmooth KKT residual K(C, w, mu), length 2Tn + 1.
template <typename Scalar>
Vec<Scalar> residual_K(const FoldedProblem<Scalar>& fp, Scalar C, const Vec<Scalar>& mu, const Vec<Scalar>& w) {
  const Iterate<Scalar> it{Scalar(0), C, mu, w};
  const auto ev = evaluate_iterate(fp, it);
  Vec<Scalar> out(2 * fp.dim() + 1);
  out(0) = C - std::max(C - ev.mu_dot_g, Scalar(0));
  detail::fill_stationarity_blocks(fp, it, ev, out.tail(2 * fp.dim()));
  return out;
}

/// The smoothed system E-hat = [eps; (1 + kappa|eps|) C - h(eps, C - mu^T g); stationarity; w + C g].
template <typename Scalar>
Vec<Scalar> E_hat(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it, const IterateEval<Scalar>& ev,
                  Scalar kappa) {
  Vec<Scalar> out(2 * fp.dim() + 2);
  out(0) = it.eps;
  out(1) = (Scalar(1) + kappa * std::abs(it.eps)) * it.C - huber(it.eps, it.C - ev.mu_dot_g).value;
  detail::fill_stationarity_blocks(fp, it, ev, out.tail(2 * fp.dim()));
  return out;
}

template <typename Scalar>
Vec<Scalar> E_hat(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it, Scalar kappa) {
  return E_hat(fp, it, evaluate_iterate(fp, it), kappa);
}

/// psi = ||E-hat||^2
template <typename Scalar>
Scalar merit_psi(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it, Scalar kappa) {
  return E_hat(fp, it, kappa).squaredNorm();
}

}  // namespace svcbilevel
