#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "freemesh/dense_matrix.hpp"

namespace freemesh::linalg {

// Relative pivot tolerance of the rank guard. A column j counts toward the
// effective rank when |R_jj| > kRankTolerance * ||a_j||, i.e. the test is made
// on the column-equilibrated factor. ||a_j|| equals ||R[:, j]||.
inline constexpr double kRankTolerance = 1e-12;

struct QrFactors {
  DenseMatrix q;  // N x k, orthonormal columns
  DenseMatrix r;  // k x k, upper triangular, non-negative diagonal
  std::size_t effective_rank = 0;
};

// Economy Householder QR of an N x k matrix (N >= k, all entries finite).
QrFactors qr_factor(const DenseMatrix& a);

// Number of pivots of upper-triangular `r` that pass the rank guard.
std::size_t effective_rank(const DenseMatrix& r, double rtol = kRankTolerance);

// Back-substitution r x = b. Components whose pivot fails the rank guard are
// set to zero and their equations dropped.
std::vector<double> solve_upper_triangular(const DenseMatrix& r, std::span<const double> b,
                                           double rtol = kRankTolerance);

struct SymmetricEigen {
  DenseMatrix vectors;         // columns are eigenvectors
  std::vector<double> values;  // descending
};

// Cyclic Jacobi with threshold sweeps.
SymmetricEigen symmetric_eig(const DenseMatrix& s);

// Householder QR of a column-major block, kept in compact (LAPACK geqr2) form:
// reflector vectors below the diagonal, R on and above it.
class HouseholderQr {
 public:
  HouseholderQr() = default;
  HouseholderQr(std::size_t rows, std::size_t cols, std::vector<double> column_major);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  // y <- Q^T y over the full height (length rows()).
  void apply_qt(std::span<double> y) const;
  // y <- Q y over the full height.
  void apply_q(std::span<double> y) const;

  double r(std::size_t i, std::size_t j) const noexcept { return a_[j * rows_ + i]; }
  DenseMatrix r() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
  std::vector<double> tau_;
};

// Tall-skinny QR: rows are split into blocks that are factored independently,
// their R factors are stacked and factored again until one block remains.
// The block layout depends only on (rows, cols), so the factors do not depend
// on how many threads ran the blocks.
class TallSkinnyQr {
 public:
  // fill(begin, end, out) writes rows [begin, end) into `out`, column-major
  // with leading dimension end - begin.
  using BlockFill =
      std::function<void(std::size_t begin, std::size_t end, std::span<double> column_major)>;

  TallSkinnyQr(std::size_t rows, std::size_t cols, const BlockFill& fill);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  // The leading cols() entries of Q^T y.
  std::vector<double> project(std::span<const double> y) const;

  // Final k x k triangular factor (diagonal signs unnormalized).
  const DenseMatrix& r() const noexcept { return r_; }

  // Row offsets of the blocks at one level; offsets.back() == level height.
  static std::vector<std::size_t> block_offsets(std::size_t rows, std::size_t cols);

 private:
  struct Level {
    std::vector<std::size_t> offsets;
    std::vector<HouseholderQr> blocks;
  };

  std::size_t rows_;
  std::size_t cols_;
  std::vector<Level> levels_;
  DenseMatrix r_;
};

}  // namespace freemesh::linalg
