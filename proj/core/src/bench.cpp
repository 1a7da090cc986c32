#include "freemesh/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>

#include "freemesh/error.hpp"
#include "freemesh/random.hpp"
#include "freemesh/transform.hpp"

namespace freemesh::bench {

double franke3d(double x, double y, double z) noexcept {
  const double a = 9.0 * x;
  const double b = 9.0 * y;
  const double c = 9.0 * z;
  const double t1 = std::exp(-0.25 * ((a - 2) * (a - 2) + (b - 2) * (b - 2) + (c - 2) * (c - 2)));
  const double t2 =
      std::exp(-(a + 1) * (a + 1) / 49.0 - (b + 1) * (b + 1) / 10.0 - (c + 1) * (c + 1) / 10.0);
  const double t3 = std::exp(-0.25 * ((a - 7) * (a - 7) + (b - 3) * (b - 3) + (c - 5) * (c - 5)));
  const double t4 = std::exp(-(a - 4) * (a - 4) - (b - 7) * (b - 7) - (c - 5) * (c - 5));
  return 0.75 * (t1 + t2) + 0.5 * t3 - 0.2 * t4;
}

std::vector<Point3> random_grid(std::size_t n, std::uint64_t seed, const Box& domain) {
  Xoshiro256 rng(seed);
  std::vector<Point3> points(n);
  for (Point3& p : points)
    for (int d = 0; d < 3; ++d) p[d] = rng.uniform(domain.lo[d], domain.hi[d]);
  return points;
}

ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw PreconditionError("metric vectors differ in length");
  if (predicted.empty()) throw PreconditionError("metrics need at least one value");
  ErrorMetrics m;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - truth[i];
    sum_sq += e * e;
    m.e_inf = std::max(m.e_inf, std::fabs(e));
  }
  m.e_rms = std::sqrt(sum_sq / static_cast<double>(predicted.size()));
  // sqrt(mean) can exceed the max by an ulp when all errors are equal.
  m.e_rms = std::min(m.e_rms, m.e_inf);
  return m;
}

TestFunction franke3d_function() {
  return {"franke3d", [](const Point3& p) { return franke3d(p[0], p[1], p[2]); }};
}

TestFunction polynomial_function(int degree) {
  const MomentBasis basis(degree);
  Xoshiro256 rng(0x5eedull ^ static_cast<std::uint64_t>(degree));
  std::vector<double> coeffs(basis.rank());
  for (double& c : coeffs) c = rng.uniform(-1.0, 1.0);
  return {"polynomial:" + std::to_string(degree), [basis, coeffs](const Point3& p) {
            const auto row = moment_row(p, basis);
            double s = 0.0;
            for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * coeffs[c];
            return s;
          }};
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, TestFunction>& registry() {
  static std::map<std::string, TestFunction> r;
  return r;
}

}  // namespace

void register_function(TestFunction function) {
  if (function.name.empty() || !function.eval) throw PreconditionError("custom function needs a name and body");
  std::lock_guard lock(registry_mutex());
  registry()[function.name] = std::move(function);
}

TestFunction function_by_name(const std::string& name) {
  if (name == "franke3d") return franke3d_function();
  constexpr std::string_view kPoly = "polynomial:";
  if (name.starts_with(kPoly)) {
    int degree = -1;
    const char* first = name.data() + kPoly.size();
    const char* last = name.data() + name.size();
    const auto [ptr, ec] = std::from_chars(first, last, degree);
    if (ec != std::errc{} || ptr != last || degree < 0 || degree > kMaxOrder) {
      throw PreconditionError("bad polynomial degree in '" + name + "'");
    }
    return polynomial_function(degree);
  }
  std::lock_guard lock(registry_mutex());
  const auto it = registry().find(name);
  if (it == registry().end()) throw PreconditionError("unknown test function '" + name + "'");
  return it->second;
}

void validate(const ExperimentConfig& config) {
  if (config.lmax < 0 || config.lmax > kMaxOrder) {
    throw PreconditionError("lmax " + std::to_string(config.lmax) + " outside [0, " +
                            std::to_string(kMaxOrder) + "]");
  }
  if (!(config.tau > 0.0)) throw PreconditionError("tau must be positive");
  if (config.n_q < 1) throw PreconditionError("n_q must be at least 1");
  const auto rank = static_cast<std::size_t>(rank_stride(config.lmax + 1));
  if (config.n_p < rank) {
    throw PreconditionError("n_p = " + std::to_string(config.n_p) + " is below the rank " +
                            std::to_string(rank) + " of lmax = " + std::to_string(config.lmax));
  }
  if (!config.allow_large && std::max(config.n_p, config.n_q) > kDeskScaleLimit) {
    throw PreconditionError("grids above 8^6 points need allow_large");
  }
  if (!config.function.eval) throw PreconditionError("experiment has no test function");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  using Clock = std::chrono::steady_clock;
  ExperimentResult result;
  result.config = config;

  auto points = random_grid(config.n_p, config.seed_p, config.domain);
  std::vector<double> samples(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) samples[i] = config.function.eval(points[i]);

  const MomentBasis basis(config.lmax);
  const auto fit_start = Clock::now();
  const FmtTree tree = mesh_to_tree(points, samples, basis, config.tau);
  result.fit_seconds = std::chrono::duration<double>(Clock::now() - fit_start).count();
  result.node_count = tree.node_count;
  result.max_depth = tree.max_depth;

  const auto query = random_grid(config.n_q, config.seed_q, config.domain);
  const auto eval_start = Clock::now();
  const Evaluation predicted = evaluate(tree, query);
  result.eval_seconds = std::chrono::duration<double>(Clock::now() - eval_start).count();

  std::vector<double> truth(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) truth[i] = config.function.eval(query[i]);
  const ErrorMetrics m = error_metrics(predicted.values, truth);
  result.e_rms = m.e_rms;
  result.e_inf = m.e_inf;
  result.ok = true;
  return result;
}

std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base,
                                            std::span<const int> lmax_list,
                                            std::span<const double> tau_list,
                                            std::span<const std::size_t> n_list) {
  std::vector<ExperimentConfig> configs;
  for (std::size_t n : n_list) {
    for (int lmax : lmax_list) {
      for (double tau : tau_list) {
        ExperimentConfig c = base;
        c.n_p = c.n_q = n;
        c.lmax = lmax;
        c.tau = tau;
        configs.push_back(std::move(c));
      }
    }
  }
  return configs;
}

std::vector<ExperimentResult> sweep(const ExperimentConfig& base, std::span<const int> lmax_list,
                                    std::span<const double> tau_list,
                                    std::span<const std::size_t> n_list) {
  std::vector<ExperimentResult> results;
  for (const ExperimentConfig& config : sweep_configs(base, lmax_list, tau_list, n_list)) {
    try {
      results.push_back(run_experiment(config));
    } catch (const Error& e) {
      ExperimentResult failed;
      failed.config = config;
      failed.error = e.what();
      const double nan = std::nan("");
      failed.e_rms = failed.e_inf = failed.fit_seconds = failed.eval_seconds = nan;
      results.push_back(std::move(failed));
    }
  }
  return results;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

std::string csv_row(const ExperimentResult& r) {
  const ExperimentConfig& c = r.config;
  std::string row;
  row += std::to_string(c.n_p) + ',' + std::to_string(c.n_q) + ',' + std::to_string(c.lmax) + ',';
  row += format_double(c.tau) + ',' + std::to_string(c.seed_p) + ',' + std::to_string(c.seed_q) + ',';
  row += c.function.name + ',' + std::to_string(r.node_count) + ',' + std::to_string(r.max_depth) + ',';
  row += format_double(r.e_rms) + ',' + format_double(r.e_inf) + ',';
  row += format_double(r.fit_seconds) + ',' + format_double(r.eval_seconds);
  return row;
}

void write_csv(std::ostream& out, std::span<const ExperimentResult> results) {
  out << kCsvHeader << '\n';
  for (const auto& r : results) out << csv_row(r) << '\n';
}

}  // namespace freemesh::bench
