#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "freemesh/bench.hpp"
#include "freemesh/error.hpp"
#include "freemesh/linalg.hpp"
#include "freemesh/parallel.hpp"
#include "freemesh/transform.hpp"
#include "freemesh/tree_io.hpp"
#include "test_support.hpp"

namespace freemesh {
namespace {

std::vector<double> random_poly(const MomentBasis& basis, test::Gen& gen) {
  std::vector<double> c(basis.rank());
  for (double& v : c) v = gen.uniform(-1.0, 1.0);
  return c;
}

double eval_poly(const Point3& x, std::span<const double> c, const MomentBasis& basis) {
  const auto row = moment_row(x, basis);
  double s = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) s += row[i] * c[i];
  return s;
}

std::vector<double> franke_at(std::span<const Point3> points) {
  std::vector<double> f;
  for (const auto& p : points) f.push_back(bench::franke3d(p[0], p[1], p[2]));
  return f;
}

TEST(MeshToMoments, ZeroSamples) {
  test::Gen gen(51);
  const auto points = gen.points(50);
  const std::vector<double> f(50, 0.0);
  const auto r = mesh_to_moments(points, f, MomentBasis(3));
  for (double c : r.coeffs) EXPECT_EQ(c, 0.0);
  for (double v : r.residual) EXPECT_EQ(v, 0.0);
}

TEST(MeshToMoments, RecoversKnownCoefficients) {
  test::Gen gen(52);
  for (int lmax : {1, 4, 7}) {
    const MomentBasis basis(lmax);
    const auto c = random_poly(basis, gen);
    const auto points = gen.points(4 * basis.rank());
    std::vector<double> f;
    for (const auto& x : points) f.push_back(eval_poly(x, c, basis));
    const auto r = mesh_to_moments(points, f, basis);
    double c_max = 0.0;
    for (double v : c) c_max = std::max(c_max, std::fabs(v));
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(r.coeffs[i], c[i], 1e-10 * c_max);
    for (double v : r.residual) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(MeshToMoments, ConstantFitIsTheMean) {
  test::Gen gen(53);
  const auto points = gen.points(100);
  std::vector<double> f(100);
  for (double& v : f) v = gen.uniform(-1.0, 1.0);
  const auto r = mesh_to_moments(points, f, MomentBasis(0));
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / 100.0;
  EXPECT_NEAR(r.coeffs[0], mean, 1e-14);
  EXPECT_NEAR(std::accumulate(r.residual.begin(), r.residual.end(), 0.0), 0.0, 1e-10);
}

TEST(MeshToMoments, MatchesEigenLeastSquares) {
  test::Gen gen(54);
  const MomentBasis basis(5);
  const auto points = gen.points(900);
  std::vector<double> f(points.size());
  for (double& v : f) v = gen.uniform(-1.0, 1.0);
  const auto r = mesh_to_moments(points, f, basis);
  const Eigen::VectorXd fe = Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
  const Eigen::VectorXd ref = test::to_eigen(vandermonde(points, basis)).colPivHouseholderQr().solve(fe);
  for (std::size_t i = 0; i < basis.rank(); ++i) EXPECT_NEAR(r.coeffs[i], ref(i), 1e-9 * std::max(1.0, std::fabs(ref(i))));
}

TEST(MeshToMoments, ResidualIsAnnihilated) {
  test::Gen gen(55);
  for (int trial = 0; trial < 10; ++trial) {
    const MomentBasis basis(gen.integer(0, 8));
    const auto points = gen.points(basis.rank() + gen.integer(0, 500));
    std::vector<double> f(points.size());
    for (double& v : f) v = gen.uniform(-2.0, 2.0);
    const auto r = mesh_to_moments(points, f, basis);
    const auto qr = linalg::qr_factor(vandermonde(points, basis));
    const auto qtr = qr.q.transposed() * std::span<const double>(r.residual);
    double f_max = 0.0;
    for (double v : f) f_max = std::max(f_max, std::fabs(v));
    for (double v : qtr) ASSERT_LE(std::fabs(v), 1e-10 * f_max);
  }
}

TEST(OrderByOctant, AllNegative) {
  test::Gen gen(56);
  auto points = gen.points(40, -1.0, -0.01);
  std::vector<double> f(40, 1.0);
  const auto counts = order_by_octant(points, f);
  EXPECT_EQ(counts, (OctantCounts{40, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(OrderByOctant, OnePerOctant) {
  std::vector<Point3> points;
  for (double z : {0.5, -0.5})
    for (double y : {-0.5, 0.5})
      for (double x : {0.5, -0.5}) points.push_back({x, y, z});
  std::vector<double> f(points.size());
  std::iota(f.begin(), f.end(), 0.0);
  const auto counts = order_by_octant(points, f);
  for (std::size_t c : counts) EXPECT_EQ(c, 1u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(octant_of(points[i]), static_cast<int>(i) + 1);
}

TEST(OrderByOctant, ZeroGoesToThePositiveSide) {
  EXPECT_EQ(octant_of({0.0, -0.5, -0.5}), 2);
  EXPECT_EQ(octant_of({-0.5, 0.0, -0.5}), 3);
  EXPECT_EQ(octant_of({-0.5, -0.5, 0.0}), 5);
  EXPECT_EQ(octant_of({0.0, 0.0, 0.0}), 8);
}

TEST(OrderByOctant, StablePermutationKeepsPairs) {
  test::Gen gen(57);
  auto points = gen.points(500);
  std::vector<double> f(points.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = points[i][0] * 7.0 + points[i][1] * 3.0 - points[i][2];
  const auto original = points;
  const auto counts = order_by_octant(points, f);
  EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), 500u);
  std::size_t at = 0;
  for (int o = 1; o <= 8; ++o) {
    for (std::size_t i = 0; i < counts[o - 1]; ++i, ++at) {
      EXPECT_EQ(octant_of(points[at]), o);
      EXPECT_EQ(f[at], points[at][0] * 7.0 + points[at][1] * 3.0 - points[at][2]);
    }
  }
  // Stability: within an octant the original relative order is kept.
  std::vector<std::size_t> expected;
  for (int o = 1; o <= 8; ++o)
    for (std::size_t i = 0; i < original.size(); ++i)
      if (octant_of(original[i]) == o) expected.push_back(i);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(points[i], original[expected[i]]);
}

TEST(NewOctant, Examples) {
  const NodeFrame unit{{0, 0, 0}, 1.0};
  const NodeFrame ppp = new_octant(8, unit);
  EXPECT_EQ(ppp.center, (Point3{0.5, 0.5, 0.5}));
  EXPECT_EQ(ppp.half_width, 0.5);

  const NodeFrame parent{{0.5, 0.5, 0.5}, 0.5};
  const NodeFrame mmm = new_octant(1, parent);
  EXPECT_EQ(mmm.center, (Point3{0.25, 0.25, 0.25}));
  EXPECT_EQ(mmm.half_width, 0.25);
}

TEST(NewOctant, RoutedPointsLieInsideTheChild) {
  test::Gen gen(58);
  for (int trial = 0; trial < 20; ++trial) {
    const NodeFrame parent{gen.point(-5.0, 5.0), gen.uniform(0.01, 3.0)};
    std::vector<Point3> local(300);
    for (auto& p : local) p = gen.point();
    std::vector<double> f(local.size(), 0.0);
    const auto counts = order_by_octant(local, f);
    std::size_t at = 0;
    for (int o = 1; o <= 8; ++o) {
      const NodeFrame child = new_octant(o, parent);
      for (std::size_t i = 0; i < counts[o - 1]; ++i, ++at) {
        const Point3& u = local[at];
        const Point3 global{parent.center[0] + parent.half_width * u[0], parent.center[1] + parent.half_width * u[1],
                            parent.center[2] + parent.half_width * u[2]};
        const Point3 c = child.to_local(global);
        for (double v : c) ASSERT_LE(std::fabs(v), 1.0 + kFrameSlack);
      }
    }
  }
}

TEST(MeshToTree, PolynomialGivesOneNode) {
  test::Gen gen(59);
  for (int lmax : {0, 3, 6}) {
    const MomentBasis basis(lmax);
    const auto c = random_poly(basis, gen);
    auto points = gen.points(5 * basis.rank() + 10, 0.0, 1.0);
    std::vector<double> f;
    for (const auto& x : points) f.push_back(eval_poly(x, c, basis));
    for (double tau : {1e-10, 1e-6}) {
      auto p = points;
      auto v = f;
      const FmtTree tree = mesh_to_tree(p, v, basis, tau);
      EXPECT_EQ(tree.node_count, 1u) << "lmax " << lmax;
      EXPECT_EQ(tree.max_depth, 0u);
    }
  }
}

TEST(MeshToTree, HugeTauGivesOneNode) {
  auto points = bench::random_grid(2000, 3);
  auto f = franke_at(points);
  const FmtTree tree = mesh_to_tree(points, f, MomentBasis(2), 1e30);
  EXPECT_EQ(tree.node_count, 1u);
}

TEST(MeshToTree, Preconditions) {
  auto points = bench::random_grid(9, 3);
  auto f = franke_at(points);
  EXPECT_THROW(mesh_to_tree(points, f, MomentBasis(2), 1e-8), PreconditionError);
  EXPECT_THROW(mesh_to_tree(points, f, MomentBasis(0), 0.0), PreconditionError);
  std::vector<double> short_f(5, 0.0);
  EXPECT_THROW(mesh_to_tree(points, short_f, MomentBasis(0), 1.0), PreconditionError);
  f[3] = std::nan("");
  EXPECT_THROW(mesh_to_tree(points, f, MomentBasis(0), 1.0), PreconditionError);
}

struct Build {
  FmtTree tree;
  std::vector<Point3> points;    // octree order
  std::vector<double> original;  // octree order
  std::vector<double> residual;  // octree order
};

Build build_franke(std::size_t n, int lmax, double tau, std::uint64_t seed = 1) {
  Build b;
  b.points = bench::random_grid(n, seed);
  const auto f = franke_at(b.points);
  b.residual = f;
  std::vector<std::size_t> labels(n);
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  b.tree = mesh_to_tree(b.points, b.residual, MomentBasis(lmax), tau, labels);
  for (std::size_t i = 0; i < n; ++i) b.original.push_back(f[labels[i]]);
  // Labels must follow the points.
  const auto fresh = bench::random_grid(n, seed);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(b.points[i], fresh[labels[i]]);
  return b;
}

TEST(MeshToTree, EvaluationTelescopesAtFitPoints) {
  for (int lmax : {2, 5}) {
    const Build b = build_franke(4096, lmax, 1e-6);
    ASSERT_GT(b.tree.node_count, 1u);
    const Evaluation e = evaluate(b.tree, b.points);
    EXPECT_EQ(e.extrapolated, 0u);
    for (std::size_t i = 0; i < b.points.size(); ++i)
      ASSERT_NEAR(e.values[i] + b.residual[i], b.original[i], 1e-10);
  }
}

TEST(MeshToTree, EveryNodeAnnihilatesItsResidual) {
  const Build b = build_franke(4096, 4, 1e-8);
  std::size_t visited = 0;
  for_each_node(*b.tree.root, [&](const OctreeNode& node, std::size_t) {
    ++visited;
    EXPECT_LE(node.annihilation, 1e-10);
  });
  EXPECT_EQ(visited, b.tree.node_count);
}

TEST(MeshToTree, PartitionIsExact) {
  const Build b = build_franke(4096, 3, 1e-8);
  for_each_node(*b.tree.root, [&](const OctreeNode& node, std::size_t) {
    std::uint64_t child_points = 0;
    bool has_child = false;
    for (const auto& c : node.children) {
      if (!c) continue;
      has_child = true;
      child_points += c->point_count;
      EXPECT_LE(c->frame.half_width, node.frame.half_width * 0.5);
    }
    // Octants with fewer points than the rank become leaves without a node,
    // so children account for at most the parent's points.
    if (has_child) EXPECT_LE(child_points, node.point_count);
    EXPECT_GE(node.point_count, b.tree.basis.rank());
  });
  EXPECT_EQ(b.tree.root->point_count, 4096u);
  EXPECT_LE(b.tree.node_count, 4096u);
}

TEST(MeshToTree, NodeCountGrowsAsTauShrinks) {
  std::size_t previous = 0;
  for (double tau : {1e-2, 1e-3, 1e-4, 1e-6, 1e-8}) {
    const Build b = build_franke(4096, 3, tau);
    EXPECT_GE(b.tree.node_count, previous) << "tau " << tau;
    previous = b.tree.node_count;
  }
}

TEST(MeshToTree, TighterTauNeverCoarsensTheTree) {
  // Nodes present at a looser threshold keep the same fit at a tighter one.
  const Build loose = build_franke(4096, 3, 1e-3);
  const Build tight = build_franke(4096, 3, 1e-6);
  std::function<void(const OctreeNode&, const OctreeNode&)> walk = [&](const OctreeNode& a, const OctreeNode& b) {
    EXPECT_EQ(a.frame, b.frame);
    EXPECT_EQ(a.coeffs, b.coeffs);
    EXPECT_EQ(a.residual_rms, b.residual_rms);
    for (std::size_t o = 0; o < 8; ++o) {
      if (a.children[o]) {
        ASSERT_TRUE(b.children[o]);
        walk(*a.children[o], *b.children[o]);
      }
    }
  };
  walk(*loose.tree.root, *tight.tree.root);
}

TEST(MeshToTree, DeterministicAcrossThreadCounts) {
  std::vector<std::uint8_t> one, many;
  {
    ThreadLimit limit(1);
    one = serialize(build_franke(4096, 6, 1e-8).tree);
  }
  {
    ThreadLimit limit(std::max<std::size_t>(4, threads_from_environment()));
    many = serialize(build_franke(4096, 6, 1e-8).tree);
  }
  EXPECT_EQ(one, many);
  EXPECT_EQ(serialize(build_franke(4096, 6, 1e-8).tree), one);
}

TEST(Evaluate, CenterOfSingleNodeIsTheConstant) {
  test::Gen gen(60);
  auto points = gen.points(300, 0.0, 1.0);
  std::vector<double> f(points.size());
  for (double& v : f) v = gen.uniform(-1.0, 1.0);
  const FmtTree tree = mesh_to_tree(points, f, MomentBasis(3), 1e30);
  EXPECT_EQ(evaluate_point(tree, tree.root->frame.center), tree.root->coeffs[0]);
}

TEST(Evaluate, PolynomialTreeMatchesDirectEvaluation) {
  test::Gen gen(61);
  const MomentBasis basis(5);
  const auto c = random_poly(basis, gen);
  auto points = gen.points(600, 0.0, 1.0);
  std::vector<double> f;
  for (const auto& x : points) f.push_back(eval_poly(x, c, basis));
  const FmtTree tree = mesh_to_tree(points, f, basis, 1e-10);
  const auto query = gen.points(400, 0.0, 1.0);
  const Evaluation e = evaluate(tree, query);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const double truth = eval_poly(query[i], c, basis);
    ASSERT_NEAR(e.values[i], truth, 1e-9 * std::max(1.0, std::fabs(truth)));
  }
}

TEST(Evaluate, CountsExtrapolatedQueries) {
  auto points = bench::random_grid(500, 4);
  auto f = franke_at(points);
  const FmtTree tree = mesh_to_tree(points, f, MomentBasis(2), 1e-3);
  const std::vector<Point3> query{{0.5, 0.5, 0.5}, {100.0, 100.0, 100.0}, {-0.5, 0.5, 0.5}};
  const Evaluation e = evaluate(tree, query);
  EXPECT_EQ(e.extrapolated, 2u);
  for (double v : e.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(TreeIo, RoundTripIsBitExact) {
  const Build b = build_franke(4096, 5, 1e-7);
  const auto bytes = serialize(b.tree);
  const FmtTree back = deserialize(bytes);
  EXPECT_EQ(serialize(back), bytes);
  EXPECT_EQ(back.node_count, b.tree.node_count);
  EXPECT_EQ(back.max_depth, b.tree.max_depth);
  const auto query = bench::random_grid(2000, 9);
  const auto a = evaluate(b.tree, query);
  const auto c = evaluate(back, query);
  EXPECT_EQ(a.values, c.values);
  EXPECT_EQ(a.extrapolated, c.extrapolated);
}

TEST(TreeIo, SingleNodeLayout) {
  auto points = bench::random_grid(20, 5);
  auto f = franke_at(points);
  const FmtTree tree = mesh_to_tree(points, f, MomentBasis(0), 1e30);
  const auto bytes = serialize(tree);
  const std::size_t header = 4 + 4 + 4 + 8 + 24 + 24 + 8;
  const std::size_t node = 24 + 8 + 1 + 8 + 8 + 8 * 1;
  ASSERT_EQ(bytes.size(), header + node);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FMT1");
  std::uint64_t count = 0;
  std::memcpy(&count, bytes.data() + header - 8, 8);
  EXPECT_EQ(count, 1u);
  double coeff = 0.0;
  std::memcpy(&coeff, bytes.data() + bytes.size() - 8, 8);
  EXPECT_EQ(coeff, tree.root->coeffs[0]);
}

TEST(TreeIo, RejectsMalformedInput) {
  const Build b = build_franke(1000, 2, 1e-4);
  const auto good = serialize(b.tree);

  EXPECT_THROW(deserialize(std::span<const std::uint8_t>()), FormatError);
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_THROW(deserialize(truncated), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(deserialize(trailing), FormatError);
  auto magic = good;
  magic[0] = 'X';
  EXPECT_THROW(deserialize(magic), FormatError);
  auto version = good;
  version[3] = '2';
  EXPECT_THROW(deserialize(version), VersionError);
  auto lmax = good;
  lmax[4] = 200;
  EXPECT_THROW(deserialize(lmax), FormatError);
  auto rank = good;
  rank[8] ^= 1;
  EXPECT_THROW(deserialize(rank), FormatError);

  // Every prefix fails cleanly.
  for (std::size_t len = 0; len < good.size(); len += 7) {
    std::vector<std::uint8_t> prefix(good.begin(), good.begin() + len);
    EXPECT_THROW(deserialize(prefix), Error) << "length " << len;
  }
}

TEST(TreeIo, FormatErrorCarriesOffset) {
  std::vector<std::uint8_t> bytes{'F', 'M', 'T', '1', 0, 0};
  try {
    deserialize(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_LE(e.position(), bytes.size());
  }
}

}  // namespace
}  // namespace freemesh
