#pragma once

#include <optional>
#include <span>
#include <vector>

#include "freemesh/dense_matrix.hpp"
#include "freemesh/linalg.hpp"
#include "freemesh/multiindex.hpp"

// Checks of the flat-limit Taylor factorization of the Gaussian RBF kernel
// phi = Λ·E·T·E·Λ^T against the direct Gramian, and the shape-free
// mesh-to-mesh transfer that falls out of it.
namespace freemesh::kernel {

// Smallest allowed min/max ratio of the ε-diagonal and of |eigenvalues of T|
// before the factored inverse is declared ill-conditioned.
inline constexpr double kPivotThreshold = 1e-14;

class ShapeParameter {
 public:
  // Throws PreconditionError unless eps is positive and finite.
  explicit ShapeParameter(double eps);
  double eps() const noexcept { return eps_; }

 private:
  double eps_;
};

// exp(-eps^2 |a - b|^2)
double gaussian_rbf(const Point3& a, const Point3& b, ShapeParameter shape);

// h_alpha(0): 0 for odd alpha, (-1)^(alpha/2) (alpha-1)!! for even alpha.
double hermite_number(int alpha);

// T[lmn, l'm'n'] = (-1)^(l+m+n) h_{l+l'}(0) h_{m+m'}(0) h_{n+n'}(0)
DenseMatrix t_matrix(const MomentBasis& basis);

// Diagonal E in basis order: (sqrt(2) eps)^(l+m+n). The sqrt(2) matches the
// (alpha-1)!! Hermite normalization of T to exp(-eps^2 r^2).
std::vector<double> eps_diagonal(const MomentBasis& basis, ShapeParameter shape);

DenseMatrix kernel_direct(std::span<const Point3> points, ShapeParameter shape);

DenseMatrix kernel_factored(std::span<const Point3> points, ShapeParameter shape,
                            const MomentBasis& basis);

struct KernelFactorization {
  MomentBasis basis;
  ShapeParameter shape{1.0};
  DenseMatrix lambda;  // N x rank Vandermonde
  std::vector<double> eps_diag;
  DenseMatrix t;
  linalg::QrFactors qr;  // of lambda
  DenseMatrix v;         // eigenvectors of t
  std::vector<double> e;  // eigenvalues of t, descending
};

// Requires N >= rank. Throws NumericalError when the ε-diagonal spans more
// than 1/kPivotThreshold (the flat limit).
KernelFactorization factorize_kernel(std::span<const Point3> points, ShapeParameter shape,
                                     const MomentBasis& basis);

// G = Q R^-T E^-1 V e^-1 V^T E^-1 R^-1 Q^T. Requires full effective rank;
// throws NumericalError when an eigenvalue of T falls below the threshold.
DenseMatrix kernel_inverse_factored(const KernelFactorization& fact);

// f_q = Λ_q · R^-1 Q^T f_p, independent of any shape parameter.
std::vector<double> mesh_transfer(std::span<const Point3> x_p, std::span<const double> f_p,
                                  std::span<const Point3> x_q, const MomentBasis& basis);

// max |Q'R' - Λ'| / max |Λ'| for the Vandermonde matrix of `points`.
double transfer_consistency(std::span<const Point3> points, const MomentBasis& basis);

inline constexpr double kInverseTolerance = 1e-8;
inline constexpr double kConsistencyTolerance = 1e-12;

struct ValidationReport {
  double factored_deviation = 0.0;  // max |phi_factored - phi_direct|
  // ||phi G phi - phi||max / ||phi||max on the factored kernel; absent when N < rank.
  std::optional<double> inverse_residual;
  std::optional<double> consistency;  // transfer_consistency; absent when N < rank
  // 2-norm condition of Λ with unit columns; absent when N < rank. The
  // inverse residual grows roughly with its square.
  std::optional<double> vandermonde_condition;
  bool passed() const noexcept {
    return (!inverse_residual || *inverse_residual <= kInverseTolerance) &&
           (!consistency || *consistency <= kConsistencyTolerance);
  }
};

// Throws NumericalError in the flat limit before doing any factorization.
ValidationReport validate_kernel(std::span<const Point3> points, ShapeParameter shape,
                                 const MomentBasis& basis);

}  // namespace freemesh::kernel
