#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "freemesh/dense_matrix.hpp"

namespace freemesh {

using Point3 = std::array<double, 3>;

// Highest truncation order accepted anywhere in the library (rank 2925).
inline constexpr int kMaxOrder = 24;

struct MultiIndex {
  int l = 0;
  int m = 0;
  int n = 0;

  int degree() const noexcept { return l + m + n; }
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

// ℓ³_i = i(i+1)(i+2)/6: the number of 3-D multi-indices of total degree < i.
constexpr std::int64_t rank_stride(std::int64_t i) noexcept {
  return i * (i + 1) * (i + 2) / 6;
}

// Degree-truncated basis of geometric moments x^l y^m z^n / (l! m! n!).
//
// Column order is the Mesh_to_Moments triple loop: l outermost (0..L),
// m middle (0..L-l), n innermost (0..L-l-m). That order is part of the tree
// file contract.
class MomentBasis {
 public:
  MomentBasis() : MomentBasis(0) {}
  explicit MomentBasis(int lmax);

  int lmax() const noexcept { return lmax_; }
  std::size_t rank() const noexcept { return indices_.size(); }
  std::span<const MultiIndex> indices() const noexcept { return indices_; }
  std::span<const double> inv_factorials() const noexcept { return inv_factorials_; }

  // Column of (l, m, n); requires l + m + n <= lmax.
  std::size_t column(int l, int m, int n) const noexcept;

  // Writes the moment row of `x` into `out` (length rank()).
  void moment_row(const Point3& x, std::span<double> out) const;

  friend bool operator==(const MomentBasis& a, const MomentBasis& b) noexcept {
    return a.lmax_ == b.lmax_;
  }

 private:
  int lmax_;
  std::vector<MultiIndex> indices_;
  std::vector<double> inv_factorials_;
  std::vector<std::size_t> l_offsets_;  // first column of each l block
};

// Throws PreconditionError unless 0 <= lmax <= kMaxOrder.
MomentBasis build_basis(int lmax);

std::vector<double> moment_row(const Point3& x, const MomentBasis& basis);

// N x rank matrix whose row i is moment_row(points[i]).
DenseMatrix vandermonde(std::span<const Point3> points, const MomentBasis& basis);

}  // namespace freemesh
