// svcbilevel: tune the logistic SVC penalty C by bilevel cross-validation.
//
//   svcbilevel tune  --data heart.libsvm --folds 3 --train-size 162 --out runs/heart
//   svcbilevel grid  --data heart.libsvm --folds 3 --train-size 162 --grid-default
//   svcbilevel eval  --classifier runs/heart/classifier.json --data heart_test.libsvm
//   svcbilevel trace --data heart.libsvm --folds 3 --train-size 162 --tol 1e-8
//   svcbilevel replay runs/heart/manifest.json
//
// Exit status: 0 success, 1 input error, 2 solver did not converge.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "svcbilevel/report_io.hpp"

namespace fs = std::filesystem;
using namespace svcbilevel;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

Dataset load(const RunManifest& m) {
  Dataset ds = parse_libsvm(m.data);
  if (m.train_size == 0) throw DataError("--train-size is required");
  return ds;
}

void prepare_out(const RunManifest& m) {
  if (m.out_dir.empty()) return;
  fs::create_directories(m.out_dir);
  write_text(fs::path(m.out_dir) / "manifest.json", manifest_json(m).dump(2) + "\n");
}

Classifier make_classifier(const RunManifest& m, const TuneResult& r) {
  Classifier c;
  c.C_hat = r.C_hat;
  c.w_hat = r.w_hat;
  c.metadata = {{"dataset", dataset_name(m.data)}, {"method", r.method}, {"C_star", r.C_star},
                {"folds", m.folds},                {"train_size", m.train_size}, {"seed", m.seed},
                {"E_t", r.E_t},                    {"E_CV", r.E_CV}};
  return c;
}

void emit_result(const RunManifest& m, const TuneResult& r) {
  const std::string name = dataset_name(m.data);
  const std::string summary = summary_header() + "\n" + summary_row(name, r, m.timing) + "\n";
  const auto report = tune_result_json(name, r, m.timing);
  if (!m.out_dir.empty()) {
    const fs::path dir(m.out_dir);
    write_text(dir / "summary.csv", summary);
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "classifier.json", classifier_json(make_classifier(m, r)).dump(2) + "\n");
    if (r.solve_report) {
      std::ostringstream trace;
      write_trace_csv(trace, *r.solve_report);
      write_text(dir / "trace.csv", trace.str());
    }
    if (r.grid) {
      std::ostringstream g;
      g << "C,E_CV,best\n";
      for (std::size_t i = 0; i < r.grid->table.size(); ++i)
        g << fmt6(r.grid->table[i].C) << ',' << fmt6(r.grid->table[i].E_CV) << ','
          << (i == r.grid->best_index ? 1 : 0) << '\n';
      write_text(dir / "grid.csv", g.str());
    }
  }

  if (m.format == "json") {
    std::cout << report.dump(2) << '\n';
    return;
  }
  if (r.grid) {
    std::cout << "C,E_CV,best\n";
    for (std::size_t i = 0; i < r.grid->table.size(); ++i)
      std::cout << fmt6(r.grid->table[i].C) << ',' << fmt6(r.grid->table[i].E_CV)
                << (i == r.grid->best_index ? ",*" : ",") << '\n';
    std::cout << '\n';
  }
  std::cout << summary;
  if (r.solve_report) {
    const auto& s = *r.solve_report;
    std::cout << "# k=" << s.outer_iters << " iter=" << s.total_bicg_iters << " z=" << fmt6(s.diagnostics.z_star)
              << " E_hat_norm=" << fmt6(s.final_e_hat_norm) << " verdict=" << s.diagnostics.verdict() << '\n';
  }
}

int run_tune(const RunManifest& m) {
  const Dataset ds = load(m);
  const auto plan = make_split(ds, m.folds, m.train_size, m.seed);
  prepare_out(m);
  const TuneResult r = run_sncv(ds, plan, m.solver);
  emit_result(m, r);
  if (!r.converged)
    throw NotConverged("stopped after " + std::to_string(r.solve_report->outer_iters) +
                       " outer iterations with ||E_hat|| = " + fmt6(r.solve_report->final_e_hat_norm));
  return kOk;
}

int run_grid_cmd(const RunManifest& m) {
  const Dataset ds = load(m);
  const auto plan = make_split(ds, m.folds, m.train_size, m.seed);
  GridSpec grid{m.grid};
  if (grid.values.empty()) grid = GridSpec::standard();
  prepare_out(m);
  emit_result(m, run_grid(ds, plan, grid));
  return kOk;
}

int run_trace(const RunManifest& m) {
  const Dataset ds = load(m);
  const auto fp = assemble(ds, make_split(ds, m.folds, m.train_size, m.seed));
  prepare_out(m);
  const auto rep = solve(fp, m.solver);
  std::ostringstream trace;
  write_trace_csv(trace, rep);
  if (!m.out_dir.empty()) write_text(fs::path(m.out_dir) / "trace.csv", trace.str());
  if (m.format == "json")
    std::cout << solve_report_json(rep, m.timing).dump(2) << '\n';
  else
    std::cout << trace.str();
  if (!rep.converged) throw NotConverged("trace stopped before reaching tol");
  return kOk;
}

int dispatch(const RunManifest& m) {
  m.solver.validate();
  if (m.format != "csv" && m.format != "json") throw std::invalid_argument("--format must be csv or json");
  if (m.command == "tune") return run_tune(m);
  if (m.command == "grid") return run_grid_cmd(m);
  if (m.command == "trace") return run_trace(m);
  throw std::invalid_argument("manifest command '" + m.command + "' cannot be replayed");
}

int run_eval(const std::string& classifier_path, const std::string& data_path, const std::string& format) {
  const Classifier c = read_classifier(classifier_path);
  const Dataset ds = parse_libsvm(data_path, static_cast<int>(c.w_hat.size()));
  if (ds.n_features != c.w_hat.size())
    throw DataError(data_path + " has " + std::to_string(ds.n_features) + " features, classifier has " +
                    std::to_string(c.w_hat.size()));
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double e = test_error(c.w_hat, ds, all);
  if (format == "json")
    std::cout << nlohmann::json{{"E_t", e}, {"n_test", ds.size()}, {"C_hat", c.C_hat}}.dump(2) << '\n';
  else
    std::cout << "E_t," << fmt6(e) << '\n';
  return kOk;
}

void add_split_options(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--data", m.data, "LIBSVM file")->required();
  cmd->add_option("--folds", m.folds, "number of folds T")->check(CLI::Range(2, 1000));
  cmd->add_option("--train-size", m.train_size, "size l1 of the cross-validation pool")->required();
  cmd->add_option("--seed", m.seed, "split seed");
  cmd->add_option("--out", m.out_dir, "output directory");
  cmd->add_option("--format", m.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_flag("!--no-timing", m.timing, "write t = 0 so reruns are byte-identical");
}

void add_solver_options(CLI::App* cmd, RunManifest& m, std::string& jacobian) {
  cmd->add_option("--tol", m.solver.tol, "stop at ||E_hat|| <= tol");
  cmd->add_option("--max-outer", m.solver.max_outer, "outer iteration cap");
  cmd->add_option("--jacobian", jacobian, "implicit or explicit")->check(CLI::IsMember({"implicit", "explicit"}));
  cmd->add_option("--kappa", m.solver.kappa, "complementarity weight");
  cmd->add_option("--tau", m.solver.tau, "forcing exponent");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel cross-validation for the logistic support vector classifier"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  RunManifest m;
  std::string jacobian = "implicit";

  auto* tune = app.add_subcommand("tune", "select C by the smoothing Newton method and retrain");
  add_split_options(tune, m);
  add_solver_options(tune, m, jacobian);

  auto* trace = app.add_subcommand("trace", "per-iteration convergence data of one solve");
  add_split_options(trace, m);
  add_solver_options(trace, m, jacobian);

  auto* grid = app.add_subcommand("grid", "select C by grid search");
  add_split_options(grid, m);
  bool grid_default = false;
  auto* grid_opt = grid->add_option("--grid", m.grid, "comma separated C values")->delimiter(',');
  grid->add_flag("--grid-default", grid_default, "0.5e-4, 1e-4, ..., 0.5e4, 1e4 (the default)")->excludes(grid_opt);

  std::string classifier_path, eval_data, eval_format = "csv";
  auto* eval = app.add_subcommand("eval", "hold-out error of a saved classifier");
  eval->add_option("--classifier", classifier_path, "classifier JSON")->required();
  eval->add_option("--data", eval_data, "LIBSVM test file")->required();
  eval->add_option("--format", eval_format)->check(CLI::IsMember({"csv", "json"}));

  std::string manifest_path, replay_out;
  auto* replay = app.add_subcommand("replay", "rerun a saved manifest");
  replay->add_option("manifest", manifest_path, "manifest.json")->required();
  replay->add_option("--out", replay_out, "write outputs here instead of the recorded directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*eval) return run_eval(classifier_path, eval_data, eval_format);
    if (*replay) {
      RunManifest r = manifest_from_json(read_json(manifest_path));
      if (!replay_out.empty()) r.out_dir = replay_out;
      return dispatch(r);
    }
    m.solver.jacobian_mode = parse_jacobian_mode(jacobian);
    m.command = app.get_subcommands().front()->get_name();
    if (m.command == "grid" && m.grid.empty()) m.grid = GridSpec::standard().values;
    return dispatch(m);
  } catch (const NotConverged& e) {
    std::cerr << "svcbilevel: not converged: " << e.what() << '\n';
    return kNotConverged;
  } catch (const SolverError& e) {
    std::cerr << "svcbilevel: solver failure: " << e.what() << '\n';
    return kNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "svcbilevel: " << e.what() << '\n';
    return kInputError;
  }
}
