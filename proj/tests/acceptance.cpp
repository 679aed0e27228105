// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if all pass.
// Data directory: $SVCB_DATA_DIR, else the compiled-in default.
// An optional argument names a file that receives a copy of the report.

#include <cstdio>
#include <fstream>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "svcbilevel/report_io.hpp"
#include "fixtures.hpp"

using namespace svcb_test;

namespace {

// Tolerances.
constexpr double kFdRelTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr double kFdStepJacobian = 1e-6;
constexpr int kFdPoints = 100;
constexpr double kHuberContinuity = 1e-12;
constexpr double kBicgTol = 1e-8;
constexpr double kImplicitExplicitTol = 1e-10;
constexpr double kReducedVsFullTol = 1e-8;
constexpr double kSigmaMinFloor = 1e-10;
constexpr int kAdmissibleIterates = 200;
constexpr double kSuperlinearConst = 10.0;
constexpr double kEtTol = 3.0;
constexpr double kEcvTol = 0.05;
constexpr int kSeedsNeeded = 3;
constexpr int kMaxOuter = 100;
constexpr double kGridC = 0.075;
constexpr double kGridSlack = 0.05;
constexpr double kImExTol = 1e-3;
const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct Target {
  std::string name;
  std::size_t l1, l2;
  double E_t, E_CV;
};

const std::vector<Target> kTargets{{"fourclass", 735, 127, 33.858, 0.5373},
                                   {"heart", 162, 108, 15.741, 0.4291},
                                   {"diabetes", 540, 228, 20.175, 0.5094},
                                   {"breast-cancer", 540, 143, 0.000, 0.1284}};

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      if (!pass) detail << "; ";
      else detail.str("");
      pass = false;
      detail << why;
    }
  }
};

std::string data_dir() {
  if (const char* env = std::getenv("SVCB_DATA_DIR")) return env;
  return SVCB_DATA_DIR;
}

std::string g(double v) { return fmt6(v); }

// ---------------------------------------------------------------- 1
Verdict derivatives() {
  Verdict v;
  const auto fp = random_problem(3, 4, 6, 101);
  std::mt19937_64 gen(1001);
  double worst_f = 0, worst_lower = 0, worst_pq = 0, worst_J = 0;
  std::uniform_real_distribution<double> U(-6.0, 6.0);
  for (int i = 0; i < kFdPoints; ++i) {
    const Vec<double> w = random_vector(fp.dim(), gen), d = random_vector(fp.dim(), gen);
    const double fd = (eval_f(fp, Vec<double>(w + kFdStep * d)) - eval_f(fp, Vec<double>(w - kFdStep * d))) /
                      (2 * kFdStep);
    worst_f = std::max(worst_f, rel_err(fd, grad_f(fp, w).dot(d)));

    const Vec<double> wj = random_vector(fp.n, gen), dj = random_vector(fp.n, gen);
    const double C = 0.05 + 0.03 * i;
    const double fl = (lower_objective(fp, i % fp.T, Vec<double>(wj + kFdStep * dj), C) -
                       lower_objective(fp, i % fp.T, Vec<double>(wj - kFdStep * dj), C)) /
                      (2 * kFdStep);
    worst_lower = std::max(worst_lower, rel_err(fl, lower_gradient(fp, i % fp.T, wj, C).dot(dj)));

    const double t = U(gen);
    const double ds = (sigmoid(-(t + kFdStep)) - sigmoid(-(t - kFdStep))) / (2 * kFdStep);
    const double du = (logistic_curvature(t + kFdStep) - logistic_curvature(t - kFdStep)) / (2 * kFdStep);
    worst_pq = std::max({worst_pq, rel_err(-ds, logistic_curvature(t)),
                         std::abs(du) > 1e-6 ? rel_err(du, logistic_curvature_slope(t)) : 0.0});
  }
  int checked = 0;
  while (checked < kFdPoints) {
    const auto it = random_iterate(fp, gen);
    const auto ev = evaluate_iterate(fp, it);
    const double t = it.C - ev.mu_dot_g;
    if (std::abs(t) < 1e-3 || std::abs(t - std::abs(it.eps)) < 1e-3) continue;
    const auto b = build_blocks(fp, it, ev, 1.0, JacobianMode::implicit);
    const Vec<double> d = random_vector(b.full_size(), gen);
    const Vec<double> fd = (E_hat(fp, it.moved(d, kFdStepJacobian), 1.0) -
                            E_hat(fp, it.moved(d, -kFdStepJacobian), 1.0)) / (2 * kFdStepJacobian);
    worst_J = std::max(worst_J, rel_err(fd, apply_full_jacobian(b, d)));
    ++checked;
  }
  v.detail << "max rel err: grad f " << g(worst_f) << ", lower grad " << g(worst_lower) << ", p/q " << g(worst_pq)
           << ", J " << g(worst_J);
  v.require(worst_f <= kFdRelTol, "grad f rel err " + g(worst_f));
  v.require(worst_lower <= kFdRelTol, "lower grad rel err " + g(worst_lower));
  v.require(worst_pq <= kFdRelTol, "p/q rel err " + g(worst_pq));
  v.require(worst_J <= kFdRelTol, "Jacobian rel err " + g(worst_J));
  return v;
}

// ---------------------------------------------------------------- 2
Verdict huber_properties() {
  Verdict v;
  bool branches = huber(1.0, 2.0).value == 1.5 && huber(1.0, 0.5).value == 0.125 && huber(1.0, -0.5).value == 0.0 &&
                  huber(0.0, 3.0).value == 3.0 && huber(-2.0, 1.0).value == 0.25;
  v.require(branches, "branch values");
  double worst_gap = 0;
  bool negative_zero = true;
  for (int i = 0; i < 100; ++i)
    for (int k = 0; k < 100; ++k) {
      const double eps = -2.0 + 4.0 * i / 99.0, t = -3.0 + 6.0 * k / 99.0;
      const double h = huber(eps, t).value;
      worst_gap = std::max(worst_gap, std::abs(h - std::max(0.0, t)) - std::abs(eps) / 2);
      if (t < 0 && h != 0.0) negative_zero = false;
    }
  v.require(worst_gap <= 1e-15, "|h - max(0,t)| exceeds |eps|/2 by " + g(worst_gap));
  v.require(negative_zero, "h(eps, t) != 0 for some t < 0");
  double jump = 0;
  for (double eps : {1e-4, 0.01, 0.3, 1.0, 7.0, -0.5}) {
    const double a = std::abs(eps), tiny = 1e-14;
    jump = std::max({jump, std::abs(huber(eps, a + tiny).value - huber(eps, a - tiny).value),
                     std::abs(huber(eps, tiny).value - huber(eps, -tiny).value)});
  }
  v.require(jump <= kHuberContinuity, "branch jump " + g(jump));
  if (v.pass) v.detail << "10^4 grid, max excess over |eps|/2 " << g(worst_gap) << ", max branch jump " << g(jump);
  return v;
}

// ---------------------------------------------------------------- 3
Verdict linear_algebra() {
  Verdict v;
  std::mt19937_64 gen(303);
  std::normal_distribution<double> N(0.0, 1.0);
  double worst_bicg = 0;
  for (int s = 0; s < 50; ++s) {
    Mat<double> M = Mat<double>(20, 20).unaryExpr([&](double) { return N(gen); });
    M.diagonal().array() += 10.0;
    const Vec<double> b = random_vector(20, gen);
    const auto r = bicg_solve<double>([&](const Vec<double>& x) { return Vec<double>(M * x); },
                                      [&](const Vec<double>& x) { return Vec<double>(M.transpose() * x); }, b);
    const Vec<double> ref = M.fullPivLu().solve(b);
    worst_bicg = std::max(worst_bicg, (r.x - ref).norm() / std::max(1.0, ref.norm()));
  }
  double worst_ie = 0, worst_red = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto fp = random_problem(2, 3, 5, 3000 + s);
    const auto it = random_iterate(fp, gen);
    const auto im = build_blocks(fp, it, 1.0, JacobianMode::implicit);
    const auto ex = build_blocks(fp, it, 1.0, JacobianMode::explicit_);
    const Vec<double> x = random_vector(im.reduced_size(), gen);
    worst_ie = std::max({worst_ie, rel_err(im.apply_reduced(x), ex.apply_reduced(x)),
                         rel_err(im.apply_reduced_transpose(x), ex.apply_reduced_transpose(x))});
    const double zeta = 0.4, eps_hat = 0.5;
    const auto sys = reduced_system(ex, it, zeta, eps_hat);
    const Vec<double> red = ex.reduced_matrix().fullPivLu().solve(sys.rhs);
    Vec<double> target = -ex.e_hat;
    target(0) += zeta * eps_hat;
    const Vec<double> full = ex.full_matrix().fullPivLu().solve(target);
    Vec<double> assembled(ex.full_size());
    assembled << sys.d_eps, red;
    worst_red = std::max(worst_red, rel_err(assembled, full));
  }
  v.detail << "Bi-CG vs LU " << g(worst_bicg) << ", implicit vs explicit " << g(worst_ie) << ", reduced vs full "
           << g(worst_red);
  v.require(worst_bicg <= kBicgTol, "Bi-CG error " + g(worst_bicg));
  v.require(worst_ie <= kImplicitExplicitTol, "implicit/explicit mismatch " + g(worst_ie));
  v.require(worst_red <= kReducedVsFullTol, "reduced/full mismatch " + g(worst_red));
  return v;
}

// ---------------------------------------------------------------- 4
Verdict nonsingular_reduced_matrix() {
  Verdict v;
  std::mt19937_64 gen(404);
  int accepted = 0, drawn = 0;
  double smallest = std::numeric_limits<double>::infinity();
  while (accepted < kAdmissibleIterates && drawn < 100 * kAdmissibleIterates) {
    ++drawn;
    const auto fp = random_problem(2, 2 + drawn % 3, 4, 4000 + drawn);
    const auto it = random_iterate(fp, gen, 2.0);
    const auto b = build_blocks(fp, it, 1.0, JacobianMode::explicit_);
    if (!(compute_z(b) > -b.kappa * it.eps)) continue;
    ++accepted;
    smallest = std::min(smallest, Eigen::JacobiSVD<Mat<double>>(b.reduced_matrix()).singularValues().minCoeff());
  }
  v.detail << accepted << " iterates with z > -kappa eps (of " << drawn << " drawn), min singular value "
           << g(smallest);
  v.require(accepted == kAdmissibleIterates, "only " + std::to_string(accepted) + " admissible iterates");
  v.require(smallest > kSigmaMinFloor, "singular value " + g(smallest));
  return v;
}

// ---------------------------------------------------------------- runs shared by 5, 7-10
struct Run {
  std::string dataset;
  std::uint64_t seed;
  TuneResult im, ex, grid;
  std::string trace_csv;
};

struct RunSet {
  std::vector<Run> runs;
  std::vector<std::string> missing;
};

RunSet desk_runs() {
  RunSet rs;
  for (const auto& t : kTargets) {
    const auto path = std::filesystem::path(data_dir()) / (t.name + ".libsvm");
    if (!std::filesystem::exists(path)) {
      rs.missing.push_back(t.name);
      continue;
    }
    const Dataset ds = parse_libsvm(path);
    for (auto seed : kSeeds) {
      Run r;
      r.dataset = t.name;
      r.seed = seed;
      const auto plan = make_split(ds, 3, std::min(t.l1, ds.size()), seed);
      SolverConfig<double> cfg;
      r.im = run_sncv(ds, plan, cfg);
      cfg.jacobian_mode = JacobianMode::explicit_;
      r.ex = run_sncv(ds, plan, cfg);
      r.grid = run_grid(ds, plan, GridSpec::standard());
      std::ostringstream os;
      write_trace_csv(os, *r.im.solve_report);
      r.trace_csv = os.str();
      rs.runs.push_back(std::move(r));
    }
  }
  return rs;
}

std::string missing_note(const RunSet& rs) {
  std::string s;
  for (const auto& m : rs.missing) s += (s.empty() ? "" : ", ") + m + ".libsvm";
  return "missing data: " + s;
}

// ---------------------------------------------------------------- 5
Verdict monotone_merit(const RunSet& rs) {
  Verdict v;
  const SolverConfig<double> cfg;
  const double c = 2 * cfg.sigma * (1 - cfg.delta());
  std::vector<std::string> traces;
  for (const auto& r : rs.runs) traces.push_back(r.trace_csv);
  {
    std::ostringstream os;
    write_trace_csv(os, solve(random_problem(2, 2, 8, 2024, 1.0, 0.2), cfg));
    traces.push_back(os.str());
  }
  int steps = 0, violations = 0;
  for (const auto& text : traces) {
    std::istringstream in(text);
    const auto rows = read_trace_csv(in);
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
      ++steps;
      if (!(rows[k + 1].psi <= (1 - c * std::pow(cfg.rho, rows[k].ell)) * rows[k].psi)) ++violations;
    }
  }
  v.detail << steps << " logged steps from " << traces.size() << " traces, " << violations << " violations";
  v.require(violations == 0 && steps > 0, std::to_string(violations) + " of " + std::to_string(steps) +
                                              " logged steps violate the decrease test");
  return v;
}

// ---------------------------------------------------------------- 6
Verdict superlinear_tail() {
  Verdict v;
  SolverConfig<double> cfg;
  cfg.tol = 1e-10;
  const auto rep = solve(random_problem(2, 2, 8, 2024, 1.0, 0.2), cfg);
  std::vector<double> e;
  for (const auto& r : rep.trace) e.push_back(r.e_hat_norm);
  e.push_back(rep.final_e_hat_norm);
  v.require(rep.converged, "did not reach tol 1e-10");
  v.require(e.size() >= 4, "fewer than three iterations");
  if (!v.pass) return v;
  double worst = 0;
  for (std::size_t k = e.size() - 4; k + 1 < e.size(); ++k)
    worst = std::max(worst, e[k + 1] / std::pow(e[k], 1 + cfg.tau));
  v.detail << "last ratios ||E_k+1|| / ||E_k||^1.2 <= " << g(worst) << " over " << rep.outer_iters << " iterations";
  v.require(worst <= kSuperlinearConst, "ratio " + g(worst));
  return v;
}

// ---------------------------------------------------------------- 7
Verdict benchmark_errors(const RunSet& rs) {
  Verdict v;
  std::ostringstream detail;
  for (const auto& t : kTargets) {
    int hits = 0, total = 0;
    double sum_et = 0, sum_ecv = 0;
    for (const auto& r : rs.runs) {
      if (r.dataset != t.name) continue;
      ++total;
      sum_et += r.im.E_t;
      sum_ecv += r.im.E_CV;
      if (r.im.converged && std::abs(r.im.E_t - t.E_t) <= kEtTol && std::abs(r.im.E_CV - t.E_CV) <= kEcvTol) ++hits;
    }
    if (total == 0) {
      detail << t.name << " missing; ";
      v.require(false, t.name + " unavailable");
      continue;
    }
    detail << t.name << " " << hits << "/" << total << " seeds (mean E_t " << g(sum_et / total) << " vs "
           << g(t.E_t) << ", E_CV " << g(sum_ecv / total) << " vs " << g(t.E_CV) << "); ";
    v.require(hits >= kSeedsNeeded, t.name + " " + std::to_string(hits) + "/" + std::to_string(total) + " seeds");
  }
  v.detail.str("");
  v.detail << detail.str();
  return v;
}

// ---------------------------------------------------------------- 8
Verdict exit_diagnostics(const RunSet& rs) {
  Verdict v;
  int runs = 0, bad = 0, max_k = 0;
  double min_z = std::numeric_limits<double>::infinity();
  for (const auto& r : rs.runs)
    for (const auto* res : {&r.im, &r.ex}) {
      const auto& s = *res->solve_report;
      ++runs;
      max_k = std::max(max_k, s.outer_iters);
      min_z = std::min(min_z, s.diagnostics.z_star);
      if (!s.converged || s.outer_iters > kMaxOuter || !(s.diagnostics.z_star > 0) ||
          s.diagnostics.verdict() != "strict local minimizer (case i)")
        ++bad;
    }
  std::ostringstream d;
  d << runs << " exits on available data: max k " << max_k << ", min z " << g(min_z) << ", " << bad << " failing";
  v.require(bad == 0, std::to_string(bad) + " exits fail");
  if (!rs.missing.empty()) v.require(false, missing_note(rs));
  const std::string why = v.pass ? "" : v.detail.str() + "; ";
  v.detail.str("");
  v.detail << why << d.str();
  return v;
}

// ---------------------------------------------------------------- 9
Verdict grid_crosscheck(const RunSet& rs) {
  Verdict v;
  int heart_hits = 0, heart_total = 0, slack_bad = 0;
  std::map<double, int> heart_picks;
  for (const auto& r : rs.runs) {
    if (r.dataset == "heart") {
      ++heart_total;
      ++heart_picks[r.grid.C_star];
      if (std::abs(r.grid.C_star - kGridC) <= 1e-12) ++heart_hits;
    }
    if (!(r.im.E_CV <= r.grid.E_CV + kGridSlack)) ++slack_bad;
  }
  std::ostringstream d;
  d << "heart grid picks";
  for (const auto& [c, n] : heart_picks) d << " C=" << g(c) << " x" << n;
  d << "; SN E_CV within grid-best + " << kGridSlack << " on " << rs.runs.size() - slack_bad << "/" << rs.runs.size()
    << " runs";
  v.require(heart_hits >= kSeedsNeeded, "heart grid chose 0.075 in " + std::to_string(heart_hits) + "/" +
                                            std::to_string(heart_total) + " seeds");
  v.require(slack_bad == 0, std::to_string(slack_bad) + " runs exceed the E_CV slack");
  if (!rs.missing.empty()) v.require(false, missing_note(rs));
  const std::string why = v.pass ? "" : v.detail.str() + "; ";
  v.detail.str("");
  v.detail << why << d.str();
  return v;
}

// ---------------------------------------------------------------- 10
Verdict im_ex_agreement(const RunSet& rs) {
  Verdict v;
  double worst = 0;
  for (const auto& r : rs.runs) worst = std::max(worst, std::abs(r.im.C_star - r.ex.C_star));
  v.require(worst <= kImExTol, "max |C_im - C_ex| " + g(worst));
  if (!rs.missing.empty()) v.require(false, missing_note(rs));
  const std::string why = v.pass ? "" : v.detail.str() + "; ";
  v.detail.str("");
  v.detail << why << "max |C_im - C_ex| = " << g(worst) << " over " << rs.runs.size() << " runs";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"derivative correctness", derivatives},
      {"Huber properties", huber_properties},
      {"linear-algebra oracles", linear_algebra},
      {"reduced matrix nonsingular when z > -kappa eps", nonsingular_reduced_matrix},
  };
  std::ostringstream report;
  report << "data directory: " << data_dir() << '\n';
  const RunSet rs = desk_runs();
  criteria.emplace_back("monotone merit", [&] { return monotone_merit(rs); });
  criteria.emplace_back("superlinear tail", superlinear_tail);
  criteria.emplace_back("benchmark test and CV errors", [&] { return benchmark_errors(rs); });
  criteria.emplace_back("converged exits are strict local minimizers", [&] { return exit_diagnostics(rs); });
  criteria.emplace_back("grid baseline cross-check", [&] { return grid_crosscheck(rs); });
  criteria.emplace_back("imSN/exSN agreement", [&] { return im_ex_agreement(rs); });

  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail.str(std::string("exception: ") + e.what());
    }
    passed += v.pass ? 1 : 0;
    report << "criterion " << i + 1 << ": " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
           << v.detail.str() << '\n';
  }
  report << "acceptance summary: " << passed << '/' << criteria.size() << " criteria passed\n";
  std::fputs(report.str().c_str(), stdout);
  if (argc > 1) std::ofstream(argv[1]) << report.str();
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
