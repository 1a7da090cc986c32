#include "freemesh/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "double_double.hpp"
#include "freemesh/error.hpp"
#include "freemesh/transform.hpp"

namespace freemesh::kernel {

namespace {

// Basis columns sorted by total degree, so products sum the large low-order
// terms first.
std::vector<std::size_t> degree_order(const MomentBasis& basis) {
  std::vector<std::size_t> order(basis.rank());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto idx = basis.indices();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return idx[a].degree() < idx[b].degree(); });
  return order;
}

void check_conditioning(const std::vector<double>& eps_diag) {
  const auto [lo, hi] = std::minmax_element(eps_diag.begin(), eps_diag.end());
  if (!(*lo > kPivotThreshold * *hi)) {
    throw NumericalError("flat-limit ill-conditioning: eps powers span " +
                         std::to_string(*hi / *lo) + ", the Gramian is numerically singular");
  }
}

// max |phi G phi - phi| with both products accumulated in double-double.
// Plain double products carry an error of order u cond(phi) ||phi||, which
// for near-flat kernels swamps the quality of G itself.
double inverse_residual(const DenseMatrix& phi, const DenseMatrix& g) {
  using detail::DoubleDouble;
  const std::size_t n = phi.rows();
  std::vector<DoubleDouble> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < n; ++l) {
      DoubleDouble s;
      for (std::size_t j = 0; j < n; ++j) s = detail::add(s, detail::two_prod(phi(i, j), g(j, l)));
      a[i * n + l] = s;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < n; ++l) {
      DoubleDouble s{-phi(i, l), 0.0};
      for (std::size_t k = 0; k < n; ++k) s = detail::add(s, detail::mul(a[i * n + k], phi(k, l)));
      worst = std::max(worst, std::fabs(s.hi + s.lo));
    }
  }
  return worst;
}

double equilibrated_condition(const DenseMatrix& lambda) {
  const std::size_t n = lambda.rows();
  const std::size_t k = lambda.cols();
  DenseMatrix scaled = lambda;
  for (std::size_t c = 0; c < k; ++c) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += scaled(i, c) * scaled(i, c);
    const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
    for (std::size_t i = 0; i < n; ++i) scaled(i, c) *= inv;
  }
  const auto qr = linalg::qr_factor(scaled);
  // Singular values of Λ are those of R.
  const auto eig = linalg::symmetric_eig(qr.r.transposed() * qr.r);
  const double hi = eig.values.front();
  const double lo = eig.values.back();
  return lo > 0.0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
}

}  // namespace

ShapeParameter::ShapeParameter(double eps) : eps_(eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw PreconditionError("shape parameter must be positive and finite");
  }
}

double gaussian_rbf(const Point3& a, const Point3& b, ShapeParameter shape) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  const double eps = shape.eps();
  return std::exp(-eps * eps * (dx * dx + dy * dy + dz * dz));
}

double hermite_number(int alpha) {
  if (alpha < 0) throw PreconditionError("Hermite number index must be non-negative");
  if (alpha % 2 != 0) return 0.0;
  // h_{a+2} = -(a+1) h_a, h_0 = 1
  double h = 1.0;
  for (int a = 0; a < alpha; a += 2) h *= -(a + 1.0);
  return h;
}

DenseMatrix t_matrix(const MomentBasis& basis) {
  const std::size_t k = basis.rank();
  const int top = 2 * basis.lmax();
  std::vector<double> h(static_cast<std::size_t>(top) + 1);
  for (int a = 0; a <= top; ++a) h[a] = hermite_number(a);
  const auto idx = basis.indices();
  DenseMatrix t(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    const MultiIndex& a = idx[i];
    const double sign = a.degree() % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < k; ++j) {
      const MultiIndex& b = idx[j];
      t(i, j) = sign * h[a.l + b.l] * h[a.m + b.m] * h[a.n + b.n];
    }
  }
  return t;
}

std::vector<double> eps_diagonal(const MomentBasis& basis, ShapeParameter shape) {
  const double s = std::sqrt(2.0) * shape.eps();
  std::vector<double> d;
  d.reserve(basis.rank());
  for (const MultiIndex& a : basis.indices()) d.push_back(std::pow(s, a.degree()));
  return d;
}

DenseMatrix kernel_direct(std::span<const Point3> points, ShapeParameter shape) {
  const std::size_t n = points.size();
  DenseMatrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) k(i, j) = k(j, i) = gaussian_rbf(points[i], points[j], shape);
  }
  return k;
}

DenseMatrix kernel_factored(std::span<const Point3> points, ShapeParameter shape,
                            const MomentBasis& basis) {
  const std::size_t n = points.size();
  const std::size_t k = basis.rank();
  const auto d = eps_diagonal(basis, shape);
  const auto order = degree_order(basis);
  const DenseMatrix t = t_matrix(basis);

  // W = Λ E
  DenseMatrix w = vandermonde(points, basis);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) w(i, c) *= d[c];

  // M = W T
  DenseMatrix m(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t r : order) s += w(i, r) * t(r, c);
      m(i, c) = s;
    }
  }

  DenseMatrix phi(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c : order) s += m(i, c) * w(j, c);
      phi(i, j) = phi(j, i) = s;
    }
  }
  return phi;
}

KernelFactorization factorize_kernel(std::span<const Point3> points, ShapeParameter shape,
                                     const MomentBasis& basis) {
  const std::size_t n = points.size();
  const std::size_t k = basis.rank();
  if (n < k) {
    throw PreconditionError("factored kernel needs N >= rank (N = " + std::to_string(n) +
                            ", rank = " + std::to_string(k) + ")");
  }
  KernelFactorization f{basis, shape, {}, eps_diagonal(basis, shape), t_matrix(basis), {}, {}, {}};

  check_conditioning(f.eps_diag);

  f.lambda = vandermonde(points, basis);
  f.qr = linalg::qr_factor(f.lambda);
  auto eig = linalg::symmetric_eig(f.t);
  f.v = std::move(eig.vectors);
  f.e = std::move(eig.values);
  return f;
}

DenseMatrix kernel_inverse_factored(const KernelFactorization& fact) {
  const std::size_t k = fact.basis.rank();
  const std::size_t n = fact.lambda.rows();
  if (fact.qr.effective_rank != k) {
    throw PreconditionError("points are not unisolvent: effective rank " +
                            std::to_string(fact.qr.effective_rank) + " < " + std::to_string(k));
  }
  double e_max = 0.0;
  for (double e : fact.e) e_max = std::max(e_max, std::fabs(e));
  for (double e : fact.e) {
    if (!(std::fabs(e) > kPivotThreshold * e_max)) {
      throw NumericalError("eigenvalue of T below the pivot threshold");
    }
  }

  // B = E^-1 R^-1 Q^T, built one column of Q^T at a time.
  DenseMatrix b(k, n);
  std::vector<double> column(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) column[r] = fact.qr.q(i, r);
    const auto x = linalg::solve_upper_triangular(fact.qr.r, column);
    for (std::size_t r = 0; r < k; ++r) b(r, i) = x[r] / fact.eps_diag[r];
  }
  // H = V^T B, then G = H^T e^-1 H
  const DenseMatrix h = fact.v.transposed() * b;
  DenseMatrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) s += h(r, i) * h(r, j) / fact.e[r];
      g(i, j) = g(j, i) = s;
    }
  }
  return g;
}

std::vector<double> mesh_transfer(std::span<const Point3> x_p, std::span<const double> f_p,
                                  std::span<const Point3> x_q, const MomentBasis& basis) {
  std::vector<double> residual(f_p.begin(), f_p.end());
  const MomentFit fit = fit_moments_in_place(x_p, residual, basis);
  std::vector<double> out(x_q.size());
  std::vector<double> row(basis.rank());
  for (std::size_t i = 0; i < x_q.size(); ++i) {
    basis.moment_row(x_q[i], row);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * fit.coeffs[c];
    out[i] = s;
  }
  return out;
}

double transfer_consistency(std::span<const Point3> points, const MomentBasis& basis) {
  const DenseMatrix lambda = vandermonde(points, basis);
  const auto qr = linalg::qr_factor(lambda);
  const double scale = max_abs(lambda);
  return max_abs_diff(qr.q * qr.r, lambda) / (scale > 0.0 ? scale : 1.0);
}

ValidationReport validate_kernel(std::span<const Point3> points, ShapeParameter shape,
                                 const MomentBasis& basis) {
  check_conditioning(eps_diagonal(basis, shape));
  ValidationReport report;
  const DenseMatrix phi = kernel_factored(points, shape, basis);
  report.factored_deviation = max_abs_diff(phi, kernel_direct(points, shape));
  if (points.size() < basis.rank()) return report;

  const KernelFactorization fact = factorize_kernel(points, shape, basis);
  const DenseMatrix g = kernel_inverse_factored(fact);
  const double scale = max_abs(phi);
  report.inverse_residual = inverse_residual(phi, g) / (scale > 0.0 ? scale : 1.0);
  const double lambda_scale = max_abs(fact.lambda);
  report.consistency =
      max_abs_diff(fact.qr.q * fact.qr.r, fact.lambda) / (lambda_scale > 0.0 ? lambda_scale : 1.0);
  report.vandermonde_condition = equilibrated_condition(fact.lambda);
  return report;
}

}  // namespace freemesh::kernel
