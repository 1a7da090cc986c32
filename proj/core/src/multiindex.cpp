#include "freemesh/multiindex.hpp"

#include <cmath>
#include <string>

#include "double_double.hpp"
#include "freemesh/error.hpp"

namespace freemesh {

using detail::DoubleDouble;
using detail::mul;
using detail::two_prod;

MomentBasis::MomentBasis(int lmax) : lmax_(lmax) {
  if (lmax < 0 || lmax > kMaxOrder) {
    throw PreconditionError("moment order " + std::to_string(lmax) + " outside [0, " +
                            std::to_string(kMaxOrder) + "]");
  }
  std::vector<double> factorial(static_cast<std::size_t>(lmax) + 1, 1.0);
  for (int i = 1; i <= lmax; ++i) factorial[i] = factorial[i - 1] * i;

  const auto rank = static_cast<std::size_t>(rank_stride(lmax + 1));
  indices_.reserve(rank);
  inv_factorials_.reserve(rank);
  l_offsets_.reserve(static_cast<std::size_t>(lmax) + 1);
  for (int l = 0; l <= lmax; ++l) {
    l_offsets_.push_back(indices_.size());
    for (int m = 0; m <= lmax - l; ++m) {
      for (int n = 0; n <= lmax - l - m; ++n) {
        indices_.push_back({l, m, n});
        inv_factorials_.push_back(1.0 / (factorial[l] * factorial[m] * factorial[n]));
      }
    }
  }
}

std::size_t MomentBasis::column(int l, int m, int n) const noexcept {
  const std::size_t rest = static_cast<std::size_t>(lmax_ - l);
  const auto mm = static_cast<std::size_t>(m);
  return l_offsets_[static_cast<std::size_t>(l)] + mm * (rest + 1) - mm * (mm - 1) / 2 +
         static_cast<std::size_t>(n);
}

void MomentBasis::moment_row(const Point3& x, std::span<double> out) const {
  // Per-axis powers in double-double, so each entry is rounded only once.
  constexpr std::size_t kMaxPowers = kMaxOrder + 1;
  std::array<std::array<DoubleDouble, kMaxPowers>, 3> powers;
  for (std::size_t d = 0; d < 3; ++d) {
    powers[d][0] = {1.0, 0.0};
    for (int i = 1; i <= lmax_; ++i) powers[d][i] = mul(powers[d][i - 1], x[d]);
  }
  std::size_t col = 0;
  for (int l = 0; l <= lmax_; ++l) {
    for (int m = 0; m <= lmax_ - l; ++m) {
      const DoubleDouble xy = mul(powers[0][l], powers[1][m]);
      for (int n = 0; n <= lmax_ - l - m; ++n, ++col) {
        const DoubleDouble v = mul(xy, powers[2][n]);
        out[col] = (v.hi + v.lo) * inv_factorials_[col];
      }
    }
  }
}

MomentBasis build_basis(int lmax) { return MomentBasis(lmax); }

std::vector<double> moment_row(const Point3& x, const MomentBasis& basis) {
  std::vector<double> row(basis.rank());
  basis.moment_row(x, row);
  return row;
}

DenseMatrix vandermonde(std::span<const Point3> points, const MomentBasis& basis) {
  DenseMatrix v(points.size(), basis.rank());
  for (std::size_t i = 0; i < points.size(); ++i) basis.moment_row(points[i], v.row(i));
  return v;
}

}  // namespace freemesh
