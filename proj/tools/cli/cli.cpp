#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "freemesh/bench.hpp"
#include "freemesh/error.hpp"
#include "freemesh/kernel.hpp"
#include "freemesh/parallel.hpp"
#include "freemesh/transform.hpp"
#include "freemesh/tree_io.hpp"
#include "point_csv.hpp"

namespace freemesh::cli {

namespace {

PointTable load_points(const std::string& path, bool with_values) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path, 0);
  return read_point_csv(in, with_values);
}

struct FitOptions {
  std::string input;
  std::string output;
  int lmax = 8;
  double tau = 1e-8;
};

int cmd_fit(const FitOptions& opt, int verbosity, std::ostream& out, std::ostream& err) {
  const MomentBasis basis(opt.lmax);
  PointTable table = load_points(opt.input, true);
  if (table.points.size() < basis.rank()) {
    throw PreconditionError(std::to_string(table.points.size()) + " points are fewer than rank " +
                            std::to_string(basis.rank()) + " of lmax " + std::to_string(opt.lmax));
  }
  const FmtTree tree = mesh_to_tree(table.points, table.values, basis, opt.tau);
  write_tree_file(opt.output, tree);

  double sum_sq = 0.0;
  for (double r : table.values) sum_sq += r * r;
  const double rms = std::sqrt(sum_sq / static_cast<double>(table.values.size()));
  out << "node_count=" << tree.node_count << '\n';
  out << "max_depth=" << tree.max_depth << '\n';
  out << "residual_rms=" << bench::format_double(rms) << '\n';
  if (verbosity > 0) {
    err << "fit " << table.points.size() << " points, rank " << basis.rank() << ", tau "
        << bench::format_double(opt.tau) << '\n';
  }
  return kOk;
}

struct EvalOptions {
  std::string tree;
  std::string query;
  std::string output;
};

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  const FmtTree tree = read_tree_file(opt.tree);
  const PointTable query = load_points(opt.query, false);
  const Evaluation result = evaluate(tree, query.points);

  std::ofstream file;
  if (!opt.output.empty()) {
    file.open(opt.output, std::ios::trunc);
    if (!file) throw Error("cannot open " + opt.output + " for writing");
  }
  std::ostream& csv = opt.output.empty() ? out : file;
  csv << "x1,x2,x3,f_interp\n";
  for (std::size_t i = 0; i < query.points.size(); ++i) {
    const Point3& p = query.points[i];
    csv << bench::format_double(p[0]) << ',' << bench::format_double(p[1]) << ','
        << bench::format_double(p[2]) << ',' << bench::format_double(result.values[i]) << '\n';
  }
  // Keep stdout pure CSV when it carries the values.
  (opt.output.empty() ? err : out) << "extrapolated=" << result.extrapolated << '\n';
  return kOk;
}

struct BenchOptions {
  std::string function = "franke3d";
  std::vector<std::size_t> n_p{4096};
  std::optional<std::size_t> n_q;
  std::vector<int> lmax{8};
  std::vector<double> tau{1e-8};
  std::uint64_t seed_p = 1;
  std::uint64_t seed_q = 2;
  std::string csv;
  bool allow_large = false;
};

int exit_code_of(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const FormatError&) {
    return kFormat;
  } catch (const VersionError&) {
    return kVersion;
  } catch (const NumericalError&) {
    return kNumerical;
  } catch (const PreconditionError&) {
    return kPrecondition;
  } catch (const Error&) {
    return kFormat;
  } catch (...) {
    return kNumerical;
  }
}

void print_summary(std::ostream& out, const bench::ExperimentResult& r) {
  const auto& c = r.config;
  out << "n_p=" << c.n_p << " n_q=" << c.n_q << " lmax=" << c.lmax
      << " tau=" << bench::format_double(c.tau) << " function=" << c.function.name;
  if (!r.ok) {
    out << " failed: " << r.error << '\n';
    return;
  }
  out << " node_count=" << r.node_count << " max_depth=" << r.max_depth
      << " e_rms=" << bench::format_double(r.e_rms) << " e_inf=" << bench::format_double(r.e_inf)
      << " fit_seconds=" << bench::format_double(r.fit_seconds)
      << " eval_seconds=" << bench::format_double(r.eval_seconds) << '\n';
}

// bench and sweep share everything but the list handling, which CLI11 enforces.
int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err) {
  bench::ExperimentConfig base;
  base.function = bench::function_by_name(opt.function);
  base.seed_p = opt.seed_p;
  base.seed_q = opt.seed_q;
  base.allow_large = opt.allow_large;
  auto configs = bench::sweep_configs(base, opt.lmax, opt.tau, opt.n_p);
  for (auto& c : configs) {
    if (opt.n_q) c.n_q = *opt.n_q;
    bench::validate(c);
  }

  std::ofstream csv;
  if (!opt.csv.empty()) {
    csv.open(opt.csv, std::ios::trunc);
    if (!csv) throw Error("cannot open " + opt.csv + " for writing");
    csv << bench::kCsvHeader << '\n';
  }

  int status = kOk;
  for (const auto& config : configs) {
    bench::ExperimentResult result;
    try {
      result = bench::run_experiment(config);
    } catch (const std::exception& e) {
      result.config = config;
      result.error = e.what();
      result.e_rms = result.e_inf = result.fit_seconds = result.eval_seconds = std::nan("");
      if (status == kOk) status = exit_code_of(std::current_exception());
      err << "error: " << e.what() << '\n';
    }
    print_summary(out, result);
    if (csv.is_open()) csv << bench::csv_row(result) << '\n' << std::flush;
  }
  return status;
}

struct KernelOptions {
  std::optional<std::size_t> n;
  double eps = 0.5;
  int lmax = 3;
  std::uint64_t seed = 2;
};

int cmd_kernel_validate(const KernelOptions& opt, std::ostream& out) {
  const MomentBasis basis(opt.lmax);
  const kernel::ShapeParameter shape(opt.eps);
  const std::size_t n = opt.n.value_or(basis.rank());
  if (n < 1) throw PreconditionError("need at least one point");
  const bench::Box box{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};
  const auto points = bench::random_grid(n, opt.seed, box);

  const kernel::ValidationReport report = kernel::validate_kernel(points, shape, basis);
  auto optional_value = [](const std::optional<double>& v) {
    return v ? bench::format_double(*v) : std::string("skipped");
  };
  out << "factored_deviation=" << bench::format_double(report.factored_deviation) << '\n';
  out << "inverse_residual=" << optional_value(report.inverse_residual) << '\n';
  out << "consistency=" << optional_value(report.consistency) << '\n';
  out << "vandermonde_condition=" << optional_value(report.vandermonde_condition) << '\n';
  out << "tolerances: inverse_residual<=" << bench::format_double(kernel::kInverseTolerance)
      << " consistency<=" << bench::format_double(kernel::kConsistencyTolerance) << '\n';
  out << "status=" << (report.passed() ? "pass" : "fail") << '\n';
  return report.passed() ? kOk : kNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Free mesh transform: octree polynomial fitting of scattered data", "freemesh"};
  app.require_subcommand(1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an octree to x1,x2,x3,f samples");
  fit_cmd->add_option("--input", fit.input, "Sample CSV")->required();
  fit_cmd->add_option("-l,--lmax", fit.lmax, "Expansion order")->capture_default_str();
  fit_cmd->add_option("-t,--tau", fit.tau, "Residual RMS threshold")->capture_default_str();
  fit_cmd->add_option("--output", fit.output, "Tree file to write")->required();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a tree at x1,x2,x3 query points");
  eval_cmd->add_option("--tree", ev.tree, "Tree file")->required();
  eval_cmd->add_option("--query", ev.query, "Query CSV")->required();
  eval_cmd->add_option("--output", ev.output, "Value CSV (default: stdout)");

  BenchOptions bench_opt;
  BenchOptions sweep_opt;
  std::size_t n_q_bench = 0;
  std::size_t n_q_sweep = 0;
  CLI::Option* n_q_bench_opt = nullptr;
  CLI::Option* n_q_sweep_opt = nullptr;
  auto add_bench_flags = [](CLI::App* cmd, BenchOptions& o, std::size_t& n_q, bool lists) {
    cmd->add_option("--function", o.function, "franke3d or polynomial:<degree>")->capture_default_str();
    auto* np = cmd->add_option("-n,--np", o.n_p, "Fit grid size");
    auto* lm = cmd->add_option("-l,--lmax", o.lmax, "Expansion order");
    auto* ta = cmd->add_option("-t,--tau", o.tau, "Residual RMS threshold");
    if (lists) {
      for (auto* opt : {np, lm, ta}) opt->delimiter(',');
    } else {
      for (auto* opt : {np, lm, ta}) opt->expected(1);
    }
    cmd->add_option("--seed-p", o.seed_p, "Fit grid seed")->capture_default_str();
    cmd->add_option("--seed-q", o.seed_q, "Query grid seed")->capture_default_str();
    cmd->add_option("--csv", o.csv, "CSV file to write");
    cmd->add_flag("--allow-large", o.allow_large, "Permit grids above 8^6 points");
    return cmd->add_option("--nq", n_q, "Query grid size (default: the fit grid size)");
  };
  auto* bench_cmd = app.add_subcommand("bench", "One benchmark run");
  n_q_bench_opt = add_bench_flags(bench_cmd, bench_opt, n_q_bench, false);
  auto* sweep_cmd = app.add_subcommand("sweep", "Benchmark over comma-separated --np, --lmax, --tau");
  n_q_sweep_opt = add_bench_flags(sweep_cmd, sweep_opt, n_q_sweep, true);

  KernelOptions kv;
  std::size_t kv_n = 0;
  auto* kv_cmd = app.add_subcommand("kernel-validate", "Check the factored Gaussian kernel");
  auto* kv_n_opt = kv_cmd->add_option("-n,--n", kv_n, "Point count (default: rank)");
  kv_cmd->add_option("--eps", kv.eps, "Shape parameter")->capture_default_str();
  kv_cmd->add_option("-l,--lmax", kv.lmax, "Expansion order")->capture_default_str();
  kv_cmd->add_option("--seed", kv.seed, "Point seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kPrecondition;
  }

  try {
    const ThreadLimit threads(threads_from_environment());
    if (app.got_subcommand(fit_cmd)) return cmd_fit(fit, verbosity, out, err);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(ev, out, err);
    if (app.got_subcommand(bench_cmd)) {
      if (*n_q_bench_opt) bench_opt.n_q = n_q_bench;
      return cmd_bench(bench_opt, out, err);
    }
    if (app.got_subcommand(sweep_cmd)) {
      if (*n_q_sweep_opt) sweep_opt.n_q = n_q_sweep;
      return cmd_bench(sweep_opt, out, err);
    }
    if (*kv_n_opt) kv.n = kv_n;
    return cmd_kernel_validate(kv, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_of(std::current_exception());
  }
}

}  // namespace freemesh::cli
