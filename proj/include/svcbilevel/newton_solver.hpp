#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svcbilevel/bicg.hpp"
#include "svcbilevel/diagnostics.hpp"
#include "svcbilevel/jacobian.hpp"

namespace svcbilevel {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Knobs of the squared smoothing Newton method. Defaults are the published settings.
template <typename Scalar>
struct SolverConfig {
  Scalar eps_hat = Scalar(0.5);
  Scalar r = Scalar(0.6);
  Scalar r_hat = Scalar(0.6);
  Scalar eta_hat = Scalar(0.2);
  Scalar rho = Scalar(0.5);
  Scalar sigma = Scalar(1e-8);
  Scalar tau = Scalar(0.2);
  Scalar kappa = Scalar(1);
  Scalar eps0 = Scalar(1);
  Scalar C0 = Scalar(1);
  Scalar tol = Scalar(0.1);
  int max_outer = 200;
  int max_line_search = 60;
  int bicg_max_iters = 0;  // 0 means 10 * system size
  Scalar zero_tol = Scalar(1e-8);
  JacobianMode jacobian_mode = JacobianMode::implicit;

  /// delta = sqrt(2) max(r eps_hat, eta_hat); must stay below 1.
  Scalar delta() const { return std::sqrt(Scalar(2)) * std::max(r * eps_hat, eta_hat); }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(what);
    };
    require(eps_hat > 0, "eps_hat must be positive");
    require(r > 0 && r < 1, "r must lie in (0, 1)");
    require(r_hat > 0, "r_hat must be positive");
    require(eta_hat > 0, "eta_hat must be positive");
    require(rho > 0 && rho < 1, "rho must lie in (0, 1)");
    require(sigma > 0 && sigma < Scalar(0.5), "sigma must lie in (0, 1/2)");
    require(tau > 0 && tau <= 1, "tau must lie in (0, 1]");
    require(kappa > 0, "kappa must be positive");
    require(eps0 > 0, "eps0 must be positive");
    require(tol >= 0, "tol must be nonnegative");
    require(max_outer > 0, "max_outer must be positive");
    require(delta() < 1, "sqrt(2) max(r eps_hat, eta_hat) must be below 1");
  }
};

template <typename Scalar>
struct ForcingTerms {
  Scalar eta;
  Scalar zeta;
};

/// eta = min(1, r_hat ||E||^tau), zeta = r min(1, ||E||^{1+tau}).
template <typename Scalar>
ForcingTerms<Scalar> forcing_terms(Scalar e_hat_norm, const SolverConfig<Scalar>& cfg) {
  using std::pow;
  return {std::min(Scalar(1), cfg.r_hat * pow(e_hat_norm, cfg.tau)),
          cfg.r * std::min(Scalar(1), pow(e_hat_norm, Scalar(1) + cfg.tau))};
}

template <typename Scalar>
struct NewtonStep {
  Vec<Scalar> delta;  // (d_eps, d_C, d_mu, d_w)
  int bicg_iters = 0;
  Scalar r_norm{};              // true residual of the reduced Newton system
  Scalar r_target{};            // min(eta_k, eta_hat) ||E-hat||
  Scalar e_plus_grad_eps_norm{};  // ||E + d E / d eps||, recorded for reference
  ForcingTerms<Scalar> forcing{};
  bool dense_fallback = false;
};

/// One inexact Newton direction. d_eps is fixed analytically; the remaining
/// unknowns come from Bi-CG on the reduced system, accepted once its true
/// residual is within min(eta_k, eta_hat) ||E-hat||. If Bi-CG cannot reach
/// that, the reduced matrix is assembled and solved densely.
template <typename Scalar>
NewtonStep<Scalar> newton_step(const FoldedProblem<Scalar>&, const Iterate<Scalar>& it,
                               const JacobianBlocks<Scalar>& blocks, const SolverConfig<Scalar>& cfg) {
  NewtonStep<Scalar> step;
  const Scalar nrm = blocks.e_hat.norm();
  step.forcing = forcing_terms(nrm, cfg);
  const auto sys = reduced_system(blocks, it, step.forcing.zeta, cfg.eps_hat);
  step.r_target = std::min(step.forcing.eta, cfg.eta_hat) * nrm;
  {
    Vec<Scalar> e = blocks.e_hat.tail(blocks.reduced_size());
    e(0) += blocks.eps_coupling();
    step.e_plus_grad_eps_norm = e.norm();
  }

  KrylovConfig<Scalar> kcfg;
  kcfg.max_iters = cfg.bicg_max_iters;
  kcfg.rel_tol = Scalar(0);
  kcfg.abs_tol = step.r_target;
  const auto res = bicg_solve<Scalar>([&](const Vec<Scalar>& x) { return blocks.apply_reduced(x); },
                                      [&](const Vec<Scalar>& x) { return blocks.apply_reduced_transpose(x); },
                                      sys.rhs, kcfg);
  step.bicg_iters = res.iters;
  Vec<Scalar> sol = res.x;
  step.r_norm = res.residual_norm;

  if (!res.converged) {
    step.dense_fallback = true;
    const Mat<Scalar> M = blocks.reduced_matrix();
    Eigen::FullPivLU<Mat<Scalar>> lu(M);
    if (!lu.isInvertible())
      throw SolverError("reduced Newton matrix is singular at C = " + std::to_string(double(it.C)) +
                        ", eps = " + std::to_string(double(it.eps)) + " (z <= -kappa eps region)");
    sol = lu.solve(sys.rhs);
    step.r_norm = (sys.rhs - blocks.apply_reduced(sol)).norm();
    if (!sol.allFinite() || step.r_norm > std::max(step.r_target, Scalar(1e-8) * sys.rhs.norm()))
      throw SolverError("dense fallback failed to solve the reduced Newton system");
  }

  step.delta.resize(blocks.full_size());
  step.delta(0) = sys.d_eps;
  step.delta.tail(blocks.reduced_size()) = sol;
  return step;
}

template <typename Scalar>
NewtonStep<Scalar> newton_step(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it,
                               const SolverConfig<Scalar>& cfg) {
  return newton_step(fp, it, build_blocks(fp, it, cfg.kappa, cfg.jacobian_mode), cfg);
}

template <typename Scalar>
struct LineSearchResult {
  int ell = 0;
  Iterate<Scalar> next;
  Scalar psi{};
};

/// Smallest ell >= 0 with psi(x + rho^ell d) <= (1 - 2 sigma (1 - delta) rho^ell) psi(x).
/// The decrease must also survive rounding: a trial with psi == psi(x) is rejected.
template <typename Scalar>
LineSearchResult<Scalar> line_search(const FoldedProblem<Scalar>& fp, const Iterate<Scalar>& it,
                                     const Vec<Scalar>& delta, Scalar psi0, const SolverConfig<Scalar>& cfg) {
  const Scalar decrease = Scalar(2) * cfg.sigma * (Scalar(1) - cfg.delta());
  Scalar step(1);
  for (int ell = 0; ell <= cfg.max_line_search; ++ell, step *= cfg.rho) {
    Iterate<Scalar> trial = it.moved(delta, step);
    const Scalar psi = merit_psi(fp, trial, cfg.kappa);
    if (std::isfinite(psi) && psi <= (Scalar(1) - decrease * step) * psi0 && psi < psi0)
      return {ell, std::move(trial), psi};
  }
  throw SolverError("line search exhausted " + std::to_string(cfg.max_line_search) +
                    " backtracks; the Newton direction is not a descent direction");
}

template <typename Scalar>
struct TraceRow {
  int k = 0;
  Scalar eps{}, C{}, psi{}, e_hat_norm{}, E_norm{};
  int ell = 0;
  int bicg_iters = 0;
  Scalar r_norm{}, r_target{}, e_plus_grad_eps_norm{}, eta{}, zeta{};
  bool dense_fallback = false;
};

template <typename Scalar>
struct SolveReport {
  Iterate<Scalar> final;
  int outer_iters = 0;
  int total_bicg_iters = 0;
  int dense_fallbacks = 0;
  bool converged = false;
  std::vector<TraceRow<Scalar>> trace;  // one row per outer iteration, state before the step
  Scalar final_psi{}, final_e_hat_norm{}, final_eps_norm{}, final_E_norm{};
  SecondOrderReport<Scalar> diagnostics;
  double wall_time_seconds = 0.0;
};

namespace detail {

inline const char* e_hat_block_name(Eigen::Index i, Eigen::Index m) {
  if (i == 0) return "eps";
  if (i == 1) return "complementarity";
  if (i < 2 + m) return "stationarity";
  return "lower-level optimality";
}

template <typename Scalar>
void require_finite(const Vec<Scalar>& e, Eigen::Index m, int k) {
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (!std::isfinite(e(i)))
      throw SolverError("non-finite value in the " + std::string(e_hat_block_name(i, m)) +
                        " block of E-hat at iteration " + std::to_string(k));
}

}  // namespace detail

/// Squared smoothing Newton method on E-hat = 0, stopped at ||E-hat|| <= cfg.tol.
template <typename Scalar>
SolveReport<Scalar> solve(const FoldedProblem<Scalar>& fp, const SolverConfig<Scalar>& cfg,
                          std::optional<Iterate<Scalar>> start = std::nullopt) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport<Scalar> rep;
  Iterate<Scalar> it = start ? *start : initial_iterate(fp, cfg.eps0, cfg.C0);
  const Eigen::Index m = fp.dim();

  for (int k = 0;; ++k) {
    const auto ev = evaluate_iterate(fp, it);
    const auto blocks = build_blocks(fp, it, ev, cfg.kappa, cfg.jacobian_mode);
    detail::require_finite(blocks.e_hat, m, k);
    const Scalar nrm = blocks.e_hat.norm();
    if (nrm <= cfg.tol || k >= cfg.max_outer) {
      rep.converged = nrm <= cfg.tol;
      rep.final_psi = nrm * nrm;
      rep.final_e_hat_norm = nrm;
      rep.final_eps_norm = std::abs(it.eps);
      rep.final_E_norm = blocks.e_hat.tail(blocks.reduced_size()).norm();
      break;
    }
    const auto step = newton_step(fp, it, blocks, cfg);
    const auto ls = line_search(fp, it, step.delta, nrm * nrm, cfg);

    TraceRow<Scalar> row;
    row.k = k;
    row.eps = it.eps;
    row.C = it.C;
    row.psi = nrm * nrm;
    row.e_hat_norm = nrm;
    row.E_norm = blocks.e_hat.tail(blocks.reduced_size()).norm();
    row.ell = ls.ell;
    row.bicg_iters = step.bicg_iters;
    row.r_norm = step.r_norm;
    row.r_target = step.r_target;
    row.e_plus_grad_eps_norm = step.e_plus_grad_eps_norm;
    row.eta = step.forcing.eta;
    row.zeta = step.forcing.zeta;
    row.dense_fallback = step.dense_fallback;
    rep.trace.push_back(row);
    rep.total_bicg_iters += step.bicg_iters;
    rep.dense_fallbacks += step.dense_fallback ? 1 : 0;
    it = ls.next;
  }
  rep.outer_iters = static_cast<int>(rep.trace.size());
  rep.final = it;
  rep.diagnostics = classify(fp, it, cfg.kappa, cfg.zero_tol, cfg.jacobian_mode);
  rep.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace svcbilevel
