#include "freemesh/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "freemesh/error.hpp"
#include "freemesh/parallel.hpp"

namespace freemesh::linalg {

namespace {

// Fixed-order dot product with eight independent partial sums.
inline double dot(const double* x, const double* y, std::size_t n) noexcept {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
    s4 += x[i + 4] * y[i + 4];
    s5 += x[i + 5] * y[i + 5];
    s6 += x[i + 6] * y[i + 6];
    s7 += x[i + 7] * y[i + 7];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] -= alpha * x[i];
}

// Applies H = I - tau v v^T (v[0] == 1 implicit) to a column segment y.
inline void apply_reflector(const double* v_tail, double tau, double* y, std::size_t n) noexcept {
  if (tau == 0.0) return;
  const double w = tau * (y[0] + dot(v_tail, y + 1, n - 1));
  y[0] -= w;
  axpy(w, v_tail, y + 1, n - 1);
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

HouseholderQr::HouseholderQr(std::size_t rows, std::size_t cols, std::vector<double> column_major)
    : rows_(rows), cols_(cols), a_(std::move(column_major)), tau_(cols, 0.0) {
  if (rows < cols || cols == 0) {
    throw PreconditionError("QR needs rows >= cols >= 1, got " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  }
  if (a_.size() != rows * cols) throw PreconditionError("QR block has the wrong size");

  for (std::size_t j = 0; j < cols_; ++j) {
    double* col = a_.data() + j * rows_;
    const std::size_t len = rows_ - j;
    double* x = col + j;
    const double alpha = x[0];
    const double sigma = dot(x + 1, x + 1, len - 1);
    if (sigma == 0.0) {
      tau_[j] = 0.0;
    } else {
      const double norm = std::sqrt(alpha * alpha + sigma);
      const double beta = alpha >= 0.0 ? -norm : norm;
      tau_[j] = (beta - alpha) / beta;
      const double scale = 1.0 / (alpha - beta);
      for (std::size_t i = 1; i < len; ++i) x[i] *= scale;
      x[0] = beta;
    }
    if (tau_[j] == 0.0) continue;

    const double tau = tau_[j];
    const double* v_tail = x + 1;
    const std::size_t trailing = cols_ - j - 1;
    auto update = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t c = lo; c < hi; ++c) apply_reflector(v_tail, tau, a_.data() + c * rows_ + j, len);
    };
    // Columns are updated independently, so splitting them keeps bits identical.
    const std::size_t grain = std::max<std::size_t>(8, (1u << 16) / std::max<std::size_t>(len, 1));
    if (trailing * len > (1u << 18)) {
      parallel_for(j + 1, cols_, grain, update);
    } else {
      update(j + 1, cols_);
    }
  }
}

void HouseholderQr::apply_qt(std::span<double> y) const {
  for (std::size_t j = 0; j < cols_; ++j)
    apply_reflector(a_.data() + j * rows_ + j + 1, tau_[j], y.data() + j, rows_ - j);
}

void HouseholderQr::apply_q(std::span<double> y) const {
  for (std::size_t j = cols_; j-- > 0;)
    apply_reflector(a_.data() + j * rows_ + j + 1, tau_[j], y.data() + j, rows_ - j);
}

DenseMatrix HouseholderQr::r() const {
  DenseMatrix out(cols_, cols_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i <= j; ++i) out(i, j) = r(i, j);
  return out;
}

std::vector<std::size_t> TallSkinnyQr::block_offsets(std::size_t rows, std::size_t cols) {
  const std::size_t target = std::max<std::size_t>(4 * cols, 256);
  const std::size_t blocks = rows < 2 * target ? 1 : rows / target;
  std::vector<std::size_t> offsets(blocks + 1);
  for (std::size_t b = 0; b <= blocks; ++b) offsets[b] = b * rows / blocks;
  return offsets;
}

TallSkinnyQr::TallSkinnyQr(std::size_t rows, std::size_t cols, const BlockFill& fill)
    : rows_(rows), cols_(cols) {
  if (rows < cols || cols == 0) {
    throw PreconditionError("least-squares system needs rows >= cols >= 1, got " +
                            std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::size_t height = rows;
  BlockFill level_fill = fill;
  std::vector<double> stacked;  // previous level's R factors, block after block
  while (true) {
    Level level;
    level.offsets = block_offsets(height, cols);
    const std::size_t nblocks = level.offsets.size() - 1;
    level.blocks.resize(nblocks);
    parallel_for(0, nblocks, 1, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t b = lo; b < hi; ++b) {
        const std::size_t begin = level.offsets[b];
        const std::size_t end = level.offsets[b + 1];
        std::vector<double> block((end - begin) * cols);
        level_fill(begin, end, block);
        if (!all_finite(block)) throw PreconditionError("non-finite entry in least-squares matrix");
        level.blocks[b] = HouseholderQr(end - begin, cols, std::move(block));
      }
    });
    levels_.push_back(std::move(level));
    const Level& done = levels_.back();
    if (nblocks == 1) break;

    // Next level: the R factors stacked vertically, cols rows per block.
    height = nblocks * cols;
    stacked.assign(height * cols, 0.0);
    for (std::size_t b = 0; b < nblocks; ++b) {
      for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i <= j; ++i) stacked[j * height + b * cols + i] = done.blocks[b].r(i, j);
    }
    level_fill = [&stacked, height, cols](std::size_t begin, std::size_t end, std::span<double> out) {
      const std::size_t n = end - begin;
      for (std::size_t j = 0; j < cols; ++j)
        std::copy_n(stacked.data() + j * height + begin, n, out.data() + j * n);
    };
  }
  r_ = levels_.back().blocks.front().r();
}

std::vector<double> TallSkinnyQr::project(std::span<const double> y) const {
  if (y.size() != rows_) throw PreconditionError("projection vector has the wrong length");
  std::vector<double> current(y.begin(), y.end());
  for (const Level& level : levels_) {
    const std::size_t nblocks = level.blocks.size();
    std::vector<double> next(nblocks * cols_);
    for (std::size_t b = 0; b < nblocks; ++b) {
      std::span<double> segment(current.data() + level.offsets[b],
                                level.offsets[b + 1] - level.offsets[b]);
      level.blocks[b].apply_qt(segment);
      std::copy_n(segment.data(), cols_, next.data() + b * cols_);
    }
    current = std::move(next);
  }
  return current;
}

QrFactors qr_factor(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  if (n < k || k == 0) {
    throw PreconditionError("qr_factor needs rows >= cols >= 1, got " + std::to_string(n) + "x" +
                            std::to_string(k));
  }
  if (!all_finite(a.data())) throw PreconditionError("qr_factor: non-finite input");

  std::vector<double> column_major(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) column_major[j * n + i] = a(i, j);
  const HouseholderQr house(n, k, std::move(column_major));

  QrFactors out;
  out.r = house.r();
  out.q = DenseMatrix(n, k);
  std::vector<double> e(n);
  for (std::size_t j = 0; j < k; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    house.apply_q(e);
    for (std::size_t i = 0; i < n; ++i) out.q(i, j) = e[i];
  }
  // Non-negative diagonal: flip row j of R together with column j of Q.
  for (std::size_t j = 0; j < k; ++j) {
    if (std::signbit(out.r(j, j))) {
      for (std::size_t c = j; c < k; ++c) out.r(j, c) = -out.r(j, c);
      for (std::size_t i = 0; i < n; ++i) out.q(i, j) = -out.q(i, j);
    }
  }
  out.effective_rank = effective_rank(out.r);
  return out;
}

namespace {

std::vector<bool> pivot_mask(const DenseMatrix& r, double rtol) {
  const std::size_t k = r.rows();
  std::vector<bool> keep(k, false);
  for (std::size_t j = 0; j < k; ++j) {
    double column_sq = 0.0;
    for (std::size_t i = 0; i <= j; ++i) column_sq += r(i, j) * r(i, j);
    keep[j] = std::fabs(r(j, j)) > rtol * std::sqrt(column_sq);
  }
  return keep;
}

}  // namespace

std::size_t effective_rank(const DenseMatrix& r, double rtol) {
  const auto keep = pivot_mask(r, rtol);
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

std::vector<double> solve_upper_triangular(const DenseMatrix& r, std::span<const double> b,
                                           double rtol) {
  const std::size_t k = r.rows();
  if (r.cols() != k || b.size() != k) throw PreconditionError("triangular solve shape mismatch");
  const auto keep = pivot_mask(r, rtol);
  std::vector<double> x(k, 0.0);
  for (std::size_t j = k; j-- > 0;) {
    if (!keep[j]) continue;
    double s = b[j];
    for (std::size_t c = j + 1; c < k; ++c) s -= r(j, c) * x[c];
    x[j] = s / r(j, j);
    if (!std::isfinite(x[j])) {
      throw NumericalError("triangular solve: pivot " + std::to_string(j) + " underflows");
    }
  }
  return x;
}

SymmetricEigen symmetric_eig(const DenseMatrix& s) {
  const std::size_t k = s.rows();
  if (s.cols() != k) throw PreconditionError("symmetric_eig needs a square matrix");
  const double scale = max_abs(s);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (std::fabs(s(i, j) - s(j, i)) > 1e-12 * scale)
        throw PreconditionError("symmetric_eig: input is not symmetric");

  DenseMatrix a = s;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) a(i, j) = a(j, i) = 0.5 * (s(i, j) + s(j, i));
  DenseMatrix v = DenseMatrix::identity(k);

  auto off_norm_sq = [&] {
    double off = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) off += a(i, j) * a(i, j);
    return off;
  };

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const double off = off_norm_sq();
    if (off == 0.0) break;
    // Early sweeps skip small elements; later ones rotate everything.
    const double threshold = sweep < 3 ? 0.2 * std::sqrt(off) / static_cast<double>(k * k) : 0.0;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = a(p, q);
        const double g = 100.0 * std::fabs(apq);
        if (sweep > 3 && std::fabs(a(p, p)) + g == std::fabs(a(p, p)) &&
            std::fabs(a(q, q)) + g == std::fabs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        if (std::fabs(apq) <= threshold || apq == 0.0) continue;

        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        const double tau = sn / (1.0 + c);

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = arp - sn * (arq + arp * tau);
          a(r, q) = a(q, r) = arq + sn * (arp - arq * tau);
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = vrp - sn * (vrq + vrp * tau);
          v(r, q) = vrq + sn * (vrp - vrq * tau);
        }
      }
    }
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{DenseMatrix(k, k), std::vector<double>(k)};
  for (std::size_t c = 0; c < k; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < k; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

}  // namespace freemesh::linalg
