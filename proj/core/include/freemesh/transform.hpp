#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "freemesh/multiindex.hpp"

namespace freemesh {

// Slack allowed on |x_local| <= 1 for points assigned to a node.
inline constexpr double kFrameSlack = 1e-12;

// Axis-aligned cube in global coordinates. Local coordinates are
// (x - center) / half_width, so the cube maps onto [-1, 1]^3.
struct NodeFrame {
  Point3 center{0.0, 0.0, 0.0};
  double half_width = 1.0;

  Point3 to_local(const Point3& x) const noexcept {
    return {(x[0] - center[0]) / half_width, (x[1] - center[1]) / half_width,
            (x[2] - center[2]) / half_width};
  }

  friend bool operator==(const NodeFrame&, const NodeFrame&) = default;
};

struct OctreeNode {
  NodeFrame frame;
  std::vector<double> coeffs;  // local residual polynomial, basis column order
  std::array<std::unique_ptr<OctreeNode>, 8> children;  // slot o-1 holds octant o
  std::uint64_t point_count = 0;
  double residual_rms = 0.0;  // RMS of this node's residual right after its fit

  // Build diagnostics; not part of the tree file.
  std::size_t effective_rank = 0;
  double annihilation = 0.0;  // ||Q^T residual||_inf / ||f_node||_inf
};

struct FmtTree {
  MomentBasis basis;
  double tau = 0.0;
  std::unique_ptr<OctreeNode> root;
  Point3 domain_lo{0.0, 0.0, 0.0};
  Point3 domain_hi{0.0, 0.0, 0.0};
  std::size_t node_count = 0;
  std::size_t max_depth = 0;  // root has depth 0
};

struct MomentFit {
  std::vector<double> coeffs;
  std::size_t effective_rank = 0;
  double annihilation = 0.0;
};

// Least-squares fit of the moment basis to samples `f` at local points,
// replacing `f` by the residual f - Λ·coeffs. Rank-deficient point sets are
// fitted in the reduced column space.
MomentFit fit_moments_in_place(std::span<const Point3> points_local, std::span<double> f,
                               const MomentBasis& basis);

struct MomentsAndResidual {
  std::vector<double> coeffs;
  std::vector<double> residual;
};

MomentsAndResidual mesh_to_moments(std::span<const Point3> points_local, std::span<const double> f,
                                   const MomentBasis& basis);

// 1 + [x1 >= 0] + 2 [x2 >= 0] + 4 [x3 >= 0]
inline int octant_of(const Point3& local) noexcept {
  return 1 + (local[0] >= 0.0 ? 1 : 0) + (local[1] >= 0.0 ? 2 : 0) + (local[2] >= 0.0 ? 4 : 0);
}

using OctantCounts = std::array<std::size_t, 8>;

// Stable reorder of points and values into contiguous octant blocks 1..8.
OctantCounts order_by_octant(std::span<Point3> points_local, std::span<double> f);

// Frame of child octant o (1..8) of `parent`.
NodeFrame new_octant(int octant, const NodeFrame& parent);

// Isotropic frame mapping the bounding box of `points` onto [-1, 1]^3.
NodeFrame bounding_frame(std::span<const Point3> points, Point3& lo, Point3& hi);

// Recursive octree decomposition of the residual.
//
// Consumes its inputs: on return `points`, `f` (and `labels`, when given) are
// permuted into octree order and `f` holds the final residuals.
FmtTree mesh_to_tree(std::span<Point3> points, std::span<double> f, const MomentBasis& basis,
                     double tau, std::span<std::size_t> labels = {});

struct Evaluation {
  std::vector<double> values;
  std::size_t extrapolated = 0;  // queries outside the root box
};

// Sums the local polynomials along each query's root-to-deepest path.
Evaluation evaluate(const FmtTree& tree, std::span<const Point3> query);

double evaluate_point(const FmtTree& tree, const Point3& x);

// Depth-first visit of every node with its depth.
template <typename Visitor>
void for_each_node(const OctreeNode& node, Visitor&& visit, std::size_t depth = 0) {
  visit(node, depth);
  for (const auto& child : node.children)
    if (child) for_each_node(*child, visit, depth + 1);
}

}  // namespace freemesh
