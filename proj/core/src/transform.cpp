#include "freemesh/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <tbb/task_group.h>

#include "freemesh/error.hpp"
#include "freemesh/linalg.hpp"
#include "freemesh/parallel.hpp"

namespace freemesh {

namespace {

double row_dot(std::span<const double> row, std::span<const double> coeffs) noexcept {
  double s = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * coeffs[c];
  return s;
}

double max_abs(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

// Stable counting sort by octant; returns the permutation (new -> old).
std::vector<std::size_t> octant_permutation(std::span<const Point3> local, OctantCounts& counts) {
  counts.fill(0);
  std::vector<std::uint8_t> octant(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) {
    octant[i] = static_cast<std::uint8_t>(octant_of(local[i]) - 1);
    ++counts[octant[i]];
  }
  std::array<std::size_t, 8> next{};
  for (std::size_t o = 1; o < 8; ++o) next[o] = next[o - 1] + counts[o - 1];
  std::vector<std::size_t> perm(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) perm[next[octant[i]]++] = i;
  return perm;
}

template <typename T>
void apply_permutation(std::span<T> values, const std::vector<std::size_t>& perm) {
  if (values.empty()) return;
  std::vector<T> tmp(values.size());
  for (std::size_t i = 0; i < perm.size(); ++i) tmp[i] = values[perm[i]];
  std::copy(tmp.begin(), tmp.end(), values.begin());
}

struct BuildContext {
  const MomentBasis& basis;
  double tau;
};

std::unique_ptr<OctreeNode> build_node(const BuildContext& ctx, const NodeFrame& frame,
                                       std::span<Point3> points, std::span<double> f,
                                       std::span<std::size_t> labels) {
  auto node = std::make_unique<OctreeNode>();
  node->frame = frame;
  node->point_count = points.size();

  OctantCounts counts;
  {
    std::vector<Point3> local(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) local[i] = frame.to_local(points[i]);

    MomentFit fit = fit_moments_in_place(local, f, ctx.basis);
    node->coeffs = std::move(fit.coeffs);
    node->effective_rank = fit.effective_rank;
    node->annihilation = fit.annihilation;
    double sum_sq = 0.0;
    for (double r : f) sum_sq += r * r;
    node->residual_rms = std::sqrt(sum_sq / static_cast<double>(f.size()));

    const auto perm = octant_permutation(local, counts);
    apply_permutation(points, perm);
    apply_permutation(f, perm);
    apply_permutation(labels, perm);
  }

  // Block of octant o is [start, start + n_o); the next one starts right after.
  const std::size_t rank = ctx.basis.rank();
  tbb::task_group children;
  std::size_t start = 0;
  for (std::size_t o = 0; o < 8; ++o) {
    const std::size_t n_o = counts[o];
    if (n_o > 0) {
      double sum_sq = 0.0;
      for (std::size_t i = start; i < start + n_o; ++i) sum_sq += f[i] * f[i];
      const double e_rms = std::sqrt(sum_sq / static_cast<double>(n_o));
      if (e_rms > ctx.tau && n_o >= rank) {
        auto sub_points = points.subspan(start, n_o);
        auto sub_f = f.subspan(start, n_o);
        auto sub_labels = labels.empty() ? labels : labels.subspan(start, n_o);
        const NodeFrame child = new_octant(static_cast<int>(o) + 1, frame);
        OctreeNode* parent = node.get();
        children.run([&ctx, parent, o, child, sub_points, sub_f, sub_labels] {
          parent->children[o] = build_node(ctx, child, sub_points, sub_f, sub_labels);
        });
      }
    }
    start += n_o;
  }
  children.wait();
  return node;
}

}  // namespace

MomentFit fit_moments_in_place(std::span<const Point3> points_local, std::span<double> f,
                               const MomentBasis& basis) {
  const std::size_t n = points_local.size();
  const std::size_t k = basis.rank();
  if (f.size() != n) throw PreconditionError("point and value counts differ");
  if (n < k) {
    throw PreconditionError("moment fit needs at least rank = " + std::to_string(k) +
                            " points, got " + std::to_string(n));
  }

  const linalg::TallSkinnyQr qr(
      n, k, [&](std::size_t begin, std::size_t end, std::span<double> out) {
        const std::size_t rows = end - begin;
        std::vector<double> row(k);
        for (std::size_t i = begin; i < end; ++i) {
          basis.moment_row(points_local[i], row);
          for (std::size_t c = 0; c < k; ++c) out[c * rows + (i - begin)] = row[c];
        }
      });

  MomentFit fit;
  const double f_norm = max_abs(f);
  fit.coeffs = linalg::solve_upper_triangular(qr.r(), qr.project(f));
  fit.effective_rank = linalg::effective_rank(qr.r());

  parallel_for(0, n, 4096, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> row(k);
    for (std::size_t i = lo; i < hi; ++i) {
      basis.moment_row(points_local[i], row);
      f[i] -= row_dot(row, fit.coeffs);
    }
  });

  const auto projected = qr.project(f);
  fit.annihilation = f_norm > 0.0 ? max_abs(projected) / f_norm : max_abs(projected);
  return fit;
}

MomentsAndResidual mesh_to_moments(std::span<const Point3> points_local, std::span<const double> f,
                                   const MomentBasis& basis) {
  MomentsAndResidual out;
  out.residual.assign(f.begin(), f.end());
  out.coeffs = fit_moments_in_place(points_local, out.residual, basis).coeffs;
  return out;
}

OctantCounts order_by_octant(std::span<Point3> points_local, std::span<double> f) {
  if (f.size() != points_local.size()) throw PreconditionError("point and value counts differ");
  OctantCounts counts;
  const auto perm = octant_permutation(points_local, counts);
  apply_permutation(points_local, perm);
  apply_permutation(f, perm);
  return counts;
}

NodeFrame new_octant(int octant, const NodeFrame& parent) {
  if (octant < 1 || octant > 8) throw PreconditionError("octant must be in 1..8");
  const int bits = octant - 1;
  NodeFrame child;
  child.half_width = 0.5 * parent.half_width;
  for (int d = 0; d < 3; ++d) {
    const double sign = (bits >> d) & 1 ? 1.0 : -1.0;
    child.center[d] = parent.center[d] + sign * child.half_width;
  }
  return child;
}

NodeFrame bounding_frame(std::span<const Point3> points, Point3& lo, Point3& hi) {
  if (points.empty()) throw PreconditionError("bounding frame of an empty point set");
  lo = hi = points.front();
  for (const Point3& p : points) {
    for (int d = 0; d < 3; ++d) {
      if (!std::isfinite(p[d])) throw PreconditionError("non-finite point coordinate");
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  NodeFrame frame;
  double side = 0.0;
  for (int d = 0; d < 3; ++d) {
    frame.center[d] = 0.5 * (lo[d] + hi[d]);
    side = std::max(side, hi[d] - lo[d]);
  }
  frame.half_width = side > 0.0 ? 0.5 * side : 1.0;
  return frame;
}

FmtTree mesh_to_tree(std::span<Point3> points, std::span<double> f, const MomentBasis& basis,
                     double tau, std::span<std::size_t> labels) {
  if (!(tau > 0.0)) throw PreconditionError("threshold tau must be positive");
  if (f.size() != points.size()) throw PreconditionError("point and value counts differ");
  if (!labels.empty() && labels.size() != points.size())
    throw PreconditionError("label count differs from point count");
  if (points.size() < basis.rank()) {
    throw PreconditionError("mesh_to_tree needs N >= rank = " + std::to_string(basis.rank()) +
                            ", got N = " + std::to_string(points.size()));
  }
  for (double v : f)
    if (!std::isfinite(v)) throw PreconditionError("non-finite sample value");

  FmtTree tree;
  tree.basis = basis;
  tree.tau = tau;
  const NodeFrame root = bounding_frame(points, tree.domain_lo, tree.domain_hi);
  const BuildContext ctx{basis, tau};
  tree.root = build_node(ctx, root, points, f, labels);

  for_each_node(*tree.root, [&](const OctreeNode&, std::size_t depth) {
    ++tree.node_count;
    tree.max_depth = std::max(tree.max_depth, depth);
  });
  return tree;
}

namespace {

double evaluate_with(const FmtTree& tree, const Point3& x, std::span<double> row, bool& outside) {
  const OctreeNode* node = tree.root.get();
  Point3 local = node->frame.to_local(x);
  outside = std::max({std::fabs(local[0]), std::fabs(local[1]), std::fabs(local[2])}) >
            1.0 + kFrameSlack;
  double value = 0.0;
  while (true) {
    tree.basis.moment_row(local, row);
    value += row_dot(row, node->coeffs);
    const OctreeNode* child = node->children[octant_of(local) - 1].get();
    if (child == nullptr) break;
    node = child;
    local = node->frame.to_local(x);
  }
  return value;
}

}  // namespace

Evaluation evaluate(const FmtTree& tree, std::span<const Point3> query) {
  if (!tree.root) throw PreconditionError("evaluate on an empty tree");
  Evaluation out;
  out.values.resize(query.size());
  std::vector<std::uint8_t> outside(query.size(), 0);
  parallel_for(0, query.size(), 1024, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> row(tree.basis.rank());
    for (std::size_t i = lo; i < hi; ++i) {
      bool out_of_box = false;
      out.values[i] = evaluate_with(tree, query[i], row, out_of_box);
      outside[i] = out_of_box ? 1 : 0;
    }
  });
  out.extrapolated = static_cast<std::size_t>(std::count(outside.begin(), outside.end(), 1));
  return out;
}

double evaluate_point(const FmtTree& tree, const Point3& x) {
  if (!tree.root) throw PreconditionError("evaluate on an empty tree");
  std::vector<double> row(tree.basis.rank());
  bool outside = false;
  return evaluate_with(tree, x, row, outside);
}

}  // namespace freemesh
