#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "freemesh/multiindex.hpp"

namespace freemesh::bench {

// Largest grid accepted without ExperimentConfig::allow_large (8^6).
inline constexpr std::size_t kDeskScaleLimit = 262144;

// Three-dimensional Franke function on the unit cube.
double franke3d(double x, double y, double z) noexcept;

struct Box {
  Point3 lo{0.0, 0.0, 0.0};
  Point3 hi{1.0, 1.0, 1.0};
};

// n points uniform in `domain`. Point i takes three consecutive draws
// u of Xoshiro256(seed) as lo + (hi - lo) * u, in x, y, z order.
std::vector<Point3> random_grid(std::size_t n, std::uint64_t seed, const Box& domain = {});

struct ErrorMetrics {
  double e_rms = 0.0;
  double e_inf = 0.0;
};

ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> truth);

// Named scalar test function; the name goes into the CSV `function` column.
struct TestFunction {
  std::string name;
  std::function<double(const Point3&)> eval;
};

TestFunction franke3d_function();

// Σ_{l+m+n <= degree} c_lmn x^l y^m z^n / (l! m! n!), with c_lmn uniform in
// [-1, 1] drawn from Xoshiro256(0x5eed ^ degree) in basis column order.
TestFunction polynomial_function(int degree);

// Custom functions are looked up by name from the CLI.
void register_function(TestFunction function);
// "franke3d", "polynomial:<d>" or a registered name; throws PreconditionError.
TestFunction function_by_name(const std::string& name);

struct ExperimentConfig {
  std::size_t n_p = 4096;
  std::size_t n_q = 4096;
  int lmax = 8;
  double tau = 1e-8;
  std::uint64_t seed_p = 1;
  std::uint64_t seed_q = 2;
  TestFunction function = franke3d_function();
  Box domain{};
  bool allow_large = false;
};

// Throws PreconditionError when the configuration cannot run.
void validate(const ExperimentConfig& config);

struct ExperimentResult {
  ExperimentConfig config;
  bool ok = false;
  std::string error;
  std::size_t node_count = 0;
  std::size_t max_depth = 0;
  double e_rms = 0.0;
  double e_inf = 0.0;
  double fit_seconds = 0.0;
  double eval_seconds = 0.0;
};

// Fits a tree on grid p, evaluates it on grid q and compares against the
// function itself. Errors propagate.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Cartesian product n (outer) x lmax x tau (inner); n sets both n_p and n_q.
// An empty list on any axis yields no runs. Failed runs come back with
// ok = false and the sweep continues.
std::vector<ExperimentResult> sweep(const ExperimentConfig& base, std::span<const int> lmax_list,
                                    std::span<const double> tau_list,
                                    std::span<const std::size_t> n_list);

std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base,
                                            std::span<const int> lmax_list,
                                            std::span<const double> tau_list,
                                            std::span<const std::size_t> n_list);

// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

inline constexpr const char* kCsvHeader =
    "n_p,n_q,lmax,tau,seed_p,seed_q,function,node_count,max_depth,e_rms,e_inf,fit_seconds,"
    "eval_seconds";

std::string csv_row(const ExperimentResult& result);
void write_csv(std::ostream& out, std::span<const ExperimentResult> results);

}  // namespace freemesh::bench
