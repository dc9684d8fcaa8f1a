#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "graphheat/graph.hpp"

namespace {

using namespace graphheat;

VertexId origin(int n) { return VertexId::lattice(std::vector<std::int64_t>(static_cast<std::size_t>(n), 0)); }
VertexId root() { return VertexId::radial(0, 0); }

std::set<VertexId> neighbor_set(const WeightedGraph& g, const VertexId& x) {
  std::set<VertexId> s;
  for (const auto& nb : g.neighbors(x)) s.insert(nb.vertex);
  return s;
}

TEST(Lattice, Z2OriginHasFourUnitNeighbors) {
  const auto g = make_lattice(2);
  const auto nbs = g.neighbors(origin(2));
  ASSERT_EQ(nbs.size(), 4u);
  for (const auto& nb : nbs) EXPECT_EQ(nb.weight, 1.0);
  EXPECT_EQ(neighbor_set(g, origin(2)), (std::set<VertexId>{VertexId::lattice({1, 0}), VertexId::lattice({-1, 0}),
                                                             VertexId::lattice({0, 1}), VertexId::lattice({0, -1})}));
  EXPECT_EQ(g.measure(origin(2)), 4.0);
}

TEST(Lattice, Z1NeighborsOfFive) {
  const auto g = make_lattice(1);
  EXPECT_EQ(neighbor_set(g, VertexId::lattice({5})), (std::set<VertexId>{VertexId::lattice({4}), VertexId::lattice({6})}));
}

TEST(Lattice, Z3DegreesAndNormalizedDegree) {
  const auto g = make_lattice(3);
  const auto x = VertexId::lattice({7, -3, 12});
  EXPECT_EQ(g.degree(x), 6.0);
  EXPECT_EQ(g.normalized_degree(x), 1.0);
}

TEST(Lattice, RejectsDimensionZero) { EXPECT_THROW(make_lattice(0), PreconditionError); }

TEST(Lattice, RejectsVertexOfWrongDimension) {
  const auto g = make_lattice(2);
  EXPECT_THROW(g.neighbors(VertexId::lattice({1, 2, 3})), PreconditionError);
}

TEST(Tree, BinaryShellCardinalities) {
  const auto g = make_tree(IntRule::constant(2), 12);
  const auto p = extract_radial_profile(g, {root()}, 8);
  for (std::size_t m = 0; m <= 8; ++m) EXPECT_EQ(p.shell_card[m], std::ldexp(1.0, static_cast<int>(m)));
  const auto closed = family_radial_profile(g, 8);
  EXPECT_EQ(closed.shell_card, p.shell_card);
  EXPECT_EQ(closed.d_plus, p.d_plus);
  EXPECT_EQ(closed.d_minus, p.d_minus);
}

TEST(Tree, UnaryBranchingIsAHalfLine) {
  const auto g = make_tree(IntRule::constant(1), 20);
  for (std::int64_t m = 0; m < 20; ++m) EXPECT_LE(g.neighbors(VertexId::radial(m, 0)).size(), 2u);
  EXPECT_EQ(g.neighbors(root()).size(), 1u);
}

TEST(Tree, OuterInnerDegreeInShellThree) {
  const auto g = make_tree(IntRule::constant(2), 10);
  const auto [dp, dm] = outer_inner_degree(g, {root()}, VertexId::radial(3, 5));
  EXPECT_EQ(dp, 2.0);
  EXPECT_EQ(dm, 1.0);
}

TEST(Tree, RejectsZeroBranching) {
  EXPECT_THROW(make_tree(IntRule::list({2, 2, 0}), 5), PreconditionError);
  EXPECT_THROW(make_tree(IntRule::constant(2), 0), PreconditionError);
}

TEST(Tree, RefusesVerticesBeyondDepth) {
  const auto g = make_tree(IntRule::constant(2), 4);
  EXPECT_NO_THROW(g.neighbors(VertexId::radial(4, 0)));
  EXPECT_THROW(g.neighbors(VertexId::radial(5, 0)), PreconditionError);
  EXPECT_THROW(g.neighbors(VertexId::radial(2, 4)), PreconditionError);
}

TEST(Antitree, ConventionBDegreesInShellTwo) {
  const auto g = make_antitree(IntRule::affine(1, 1), AntitreeConvention::B, 10);
  const auto [dp, dm] = outer_inner_degree(g, {root()}, VertexId::radial(2, 1));
  EXPECT_DOUBLE_EQ(dp, 4.0);
  EXPECT_DOUBLE_EQ(dm, 2.0);
  EXPECT_EQ(g.measure(VertexId::radial(2, 1)), 1.0);
}

TEST(Antitree, ConventionADegreesInShellTwo) {
  const auto g = make_antitree(IntRule::affine(1, 1), AntitreeConvention::A, 10);
  const auto [dp, dm] = outer_inner_degree(g, {root()}, VertexId::radial(2, 0));
  EXPECT_DOUBLE_EQ(dp, 2.0);
  EXPECT_DOUBLE_EQ(dm, 4.0);
  // unit weights cannot give both degrees, so w(m, m+1) = (s0 s1 / (s(m) s(m+1)))^2 and mu(m) = s(m+1) w(m, m+1) / s(m-1)
  const double w23 = std::pow(2.0 / (3.0 * 4.0), 2);
  EXPECT_DOUBLE_EQ(g.measure(VertexId::radial(2, 0)), 4.0 * w23 / 2.0);
}

TEST(Antitree, ConstantSphereIsAPathInBothConventions) {
  for (auto conv : {AntitreeConvention::A, AntitreeConvention::B}) {
    const auto g = make_antitree(IntRule::constant(1), conv, 10);
    for (std::int64_t m = 1; m < 8; ++m) {
      const auto [dp, dm] = outer_inner_degree(g, {root()}, VertexId::radial(m, 0));
      EXPECT_DOUBLE_EQ(dp, 1.0);
      EXPECT_DOUBLE_EQ(dm, 1.0);
    }
  }
}

TEST(Antitree, FullBipartiteBetweenConsecutiveShells) {
  const auto g = make_antitree(IntRule::affine(1, 1), AntitreeConvention::B, 10);
  const auto nbs = neighbor_set(g, VertexId::radial(3, 2));
  EXPECT_EQ(nbs.size(), 3u + 5u);
  for (std::int64_t k = 0; k < 5; ++k) EXPECT_TRUE(nbs.contains(VertexId::radial(4, k)));
}

TEST(Antitree, RejectsBadSphereSizes) {
  EXPECT_THROW(make_antitree(IntRule::constant(2), AntitreeConvention::A, 5), PreconditionError);
  EXPECT_THROW(make_antitree(IntRule::list({1, 2, 0}), AntitreeConvention::B, 5), PreconditionError);
}

TEST(Distance, Z2LatticePoint) {
  const auto g = make_lattice(2);
  EXPECT_EQ(combinatorial_distance(g, VertexId::lattice({2, -1}), {origin(2)}), 3);
}

TEST(Distance, SeedVerticesAreAtZero) {
  const auto g = make_lattice(2);
  const std::vector<VertexId> seed{origin(2), VertexId::lattice({4, 4})};
  for (const auto& s : seed) EXPECT_EQ(combinatorial_distance(g, s, seed), 0);
  EXPECT_EQ(combinatorial_distance(g, VertexId::lattice({4, 6}), seed), 2);
}

TEST(Distance, TreeShellIndex) {
  const auto g = make_tree(IntRule::constant(2), 10);
  EXPECT_EQ(combinatorial_distance(g, VertexId::radial(4, 7), {root()}), 4);
  EXPECT_EQ(canonical_radius(g, VertexId::radial(4, 7)), 4);
}

TEST(Distance, BudgetGivesNotReached) {
  const auto g = make_lattice(2);
  EXPECT_FALSE(combinatorial_distance(g, VertexId::lattice({50, 50}), {origin(2)}, 200).has_value());
}

TEST(Distance, LatticeBfsEqualsL1Norm) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> c(-4, 4);
  for (int n = 1; n <= 3; ++n) {
    const auto g = make_lattice(n);
    for (int k = 0; k < 20; ++k) {
      std::vector<std::int64_t> x(static_cast<std::size_t>(n));
      std::int64_t l1 = 0;
      for (auto& v : x) l1 += std::llabs(v = c(rng));
      EXPECT_EQ(combinatorial_distance(g, VertexId::lattice(x), {origin(n)}), l1);
      EXPECT_EQ(canonical_radius(g, VertexId::lattice(x)), l1);
    }
  }
}

TEST(Ball, PathBallStrictInequality) {
  const auto r = materialize_ball(make_lattice(1), {origin(1)}, 3, Metric::combinatorial);
  std::vector<VertexId> interior(r.interior().begin(), r.interior().end());
  std::vector<VertexId> expect;
  for (std::int64_t x = -2; x <= 2; ++x) expect.push_back(VertexId::lattice({x}));
  EXPECT_EQ(interior, expect);
  EXPECT_EQ(std::vector<VertexId>(r.boundary().begin(), r.boundary().end()),
            (std::vector<VertexId>{VertexId::lattice({-3}), VertexId::lattice({3})}));
}

TEST(Ball, EuclideanZ2RadiusTwoHasNinePoints) {
  const auto r = materialize_ball(make_lattice(2), {origin(2)}, 2, Metric::euclidean);
  EXPECT_EQ(r.interior_size(), 9u);
  for (const auto& x : r.interior()) EXPECT_LT(squared_norm(x), 4);
}

TEST(Ball, BinaryTreeRadiusThree) {
  const auto r = materialize_ball(make_tree(IntRule::constant(2), 10), {root()}, 3, Metric::combinatorial);
  EXPECT_EQ(r.interior_size(), 7u);
  EXPECT_EQ(r.boundary_size(), 8u);
}

TEST(Ball, EuclideanRefusedOffLattice) {
  EXPECT_THROW(materialize_ball(make_tree(IntRule::constant(2), 10), {root()}, 3, Metric::euclidean),
               PreconditionError);
}

TEST(Ball, RadiusBelowOneRefused) {
  EXPECT_THROW(materialize_ball(make_lattice(2), {origin(2)}, 0.5, Metric::combinatorial), PreconditionError);
}

TEST(Ball, BudgetExceeded) {
  EXPECT_THROW(materialize_ball(make_lattice(3), {origin(3)}, 40, Metric::combinatorial, 1000), BudgetExceededError);
}

TEST(Ball, DeterministicOrderingAndClosureInvariants) {
  const auto g = make_lattice(3);
  const auto a = materialize_ball(g, {origin(3)}, 4.5, Metric::euclidean);
  const auto b = materialize_ball(g, {origin(3)}, 4.5, Metric::euclidean);
  ASSERT_EQ(a.closure_size(), b.closure_size());
  for (std::size_t k = 0; k < a.closure_size(); ++k) EXPECT_EQ(a.vertex(k), b.vertex(k));
  EXPECT_TRUE(std::is_sorted(a.interior().begin(), a.interior().end()));
  EXPECT_TRUE(std::is_sorted(a.boundary().begin(), a.boundary().end()));

  std::set<VertexId> interior(a.interior().begin(), a.interior().end());
  std::set<VertexId> reached;
  for (std::size_t i = 0; i < a.interior_size(); ++i)
    for (const auto& nb : g.neighbors(a.vertex(i)))
      if (!interior.contains(nb.vertex)) reached.insert(nb.vertex);
  EXPECT_EQ(reached, std::set<VertexId>(a.boundary().begin(), a.boundary().end()));
  for (const auto& y : a.boundary()) EXPECT_FALSE(interior.contains(y));
}

TEST(Ball, InteriorIsConnected) {
  const auto g = make_lattice(2);
  const auto r = materialize_ball(g, {origin(2)}, 5.5, Metric::euclidean);
  std::set<VertexId> interior(r.interior().begin(), r.interior().end()), seen{origin(2)};
  std::vector<VertexId> stack{origin(2)};
  while (!stack.empty()) {
    const auto x = stack.back();
    stack.pop_back();
    for (const auto& nb : g.neighbors(x))
      if (interior.contains(nb.vertex) && seen.insert(nb.vertex).second) stack.push_back(nb.vertex);
  }
  EXPECT_EQ(seen.size(), interior.size());
}

TEST(OuterInner, Z2AxisNeighbor) {
  const auto [dp, dm] = outer_inner_degree(make_lattice(2), {origin(2)}, VertexId::lattice({1, 0}));
  EXPECT_DOUBLE_EQ(dp, 0.75);
  EXPECT_DOUBLE_EQ(dm, 0.25);
}

TEST(OuterInner, TreeWithBranchingFive) {
  const auto g = make_tree(IntRule::constant(5), 6);
  for (std::int64_t m = 1; m < 5; ++m) {
    const auto [dp, dm] = outer_inner_degree(g, {root()}, VertexId::radial(m, 0));
    EXPECT_EQ(dp, 5.0);
    EXPECT_EQ(dm, 1.0);
  }
}

TEST(OuterInner, SumsToNormalizedDegreeOnShellFamilies) {
  const auto t = make_tree(IntRule::affine(1, 1), 8);
  const auto a = make_antitree(IntRule::affine(1, 2), AntitreeConvention::A, 8);
  for (const auto* g : {&t, &a})
    for (std::int64_t m = 1; m < 6; ++m) {
      const auto x = VertexId::radial(m, 0);
      const auto [dp, dm] = outer_inner_degree(*g, {root()}, x);
      EXPECT_NEAR(dp + dm, g->normalized_degree(x), 1e-12);
    }
}

TEST(Profile, BinaryTree) {
  const auto p = extract_radial_profile(make_tree(IntRule::constant(2), 10), {root()}, 6);
  EXPECT_EQ(p.d_minus[0], 0.0);
  for (std::size_t m = 0; m <= 6; ++m) {
    EXPECT_EQ(p.d_plus[m], 2.0);
    if (m >= 1) {
      EXPECT_EQ(p.d_minus[m], 1.0);
    }
  }
}

TEST(Profile, Z2IsNotWeaklySymmetricAtShellTwo) {
  try {
    extract_radial_profile(make_lattice(2), {origin(2)}, 2);
    FAIL() << "expected NotWeaklySymmetricError";
  } catch (const NotWeaklySymmetricError& e) {
    EXPECT_EQ(e.shell(), 2u);
  }
}

TEST(Profile, AntitreePassesWithDetailedBalance) {
  for (auto conv : {AntitreeConvention::A, AntitreeConvention::B}) {
    const auto g = make_antitree(IntRule::affine(1, 1), conv, 12);
    const auto p = extract_radial_profile(g, {root()}, 8);
    EXPECT_LE(p.detailed_balance_residual(), 1e-12);
    const auto q = family_radial_profile(g, 8);
    for (std::size_t m = 0; m <= 8; ++m) {
      EXPECT_NEAR(p.d_plus[m], q.d_plus[m], 1e-12);
      EXPECT_NEAR(p.d_minus[m], q.d_minus[m], 1e-12);
      EXPECT_NEAR(p.shell_measure[m], q.shell_measure[m], 1e-12 * q.shell_measure[m]);
    }
  }
}

TEST(Profile, DetailedBalanceOnAllBuiltInFamilies) {
  EXPECT_LE(family_radial_profile(make_tree(IntRule::constant(3), 200), 200).detailed_balance_residual(), 1e-12);
  EXPECT_LE(family_radial_profile(make_tree(IntRule::affine(1, 1), 60), 60).detailed_balance_residual(), 1e-12);
  EXPECT_LE(family_radial_profile(make_antitree(IntRule::affine(1, 1), AntitreeConvention::A, 200), 200)
                .detailed_balance_residual(),
            1e-12);
  EXPECT_LE(family_radial_profile(make_antitree(IntRule::affine(1, 3), AntitreeConvention::B, 200), 200)
                .detailed_balance_residual(),
            1e-12);
}

TEST(Invariants, SymmetryAuditOnRandomEdges) {
  std::mt19937_64 rng(5);
  const auto lat = make_lattice(3);
  const auto tree = make_tree(IntRule::affine(1, 1), 12);
  const auto anti = make_antitree(IntRule::affine(1, 1), AntitreeConvention::A, 12);
  std::vector<VertexId> xs;
  std::uniform_int_distribution<std::int64_t> c(-50, 50);
  for (int k = 0; k < 400; ++k) xs.push_back(VertexId::lattice({c(rng), c(rng), c(rng)}));
  auto audit = audit_edges(lat, xs);
  EXPECT_TRUE(audit.ok());
  EXPECT_GE(audit.edges_checked, 1000u);

  for (const auto* g : {&tree, &anti}) {
    const auto ball = materialize_ball(*g, {root()}, 6, Metric::combinatorial);
    const auto a = audit_edges(*g, ball.interior());
    EXPECT_TRUE(a.ok()) << g->family().describe();
  }
}

TEST(Invariants, FaultInjectionBreaksSymmetry) {
  const auto g = with_asymmetric_fault(make_lattice(2));
  const auto a = audit_edges(g, std::vector<VertexId>{origin(2)});
  EXPECT_FALSE(a.ok());
  EXPECT_DOUBLE_EQ(a.max_asymmetry, 0.5);
  ASSERT_TRUE(a.worst.has_value());
}

TEST(Invariants, SpherePartitionAndUnitJumps) {
  const auto g = make_antitree(IntRule::affine(1, 1), AntitreeConvention::B, 10);
  const auto r = materialize_ball(g, {root()}, 6, Metric::combinatorial);
  LayeredBfs bfs(g, {root()});
  bfs.advance_to(7);
  for (std::size_t i = 0; i < r.interior_size(); ++i) {
    const auto x = r.vertex(i);
    const auto d = bfs.distance(x);
    ASSERT_TRUE(d.has_value());
    EXPECT_EQ(*d, x.shell());
    for (const auto& e : r.edges(i)) EXPECT_LE(std::llabs(r.vertex(e.target).shell() - x.shell()), 1);
  }
}

TEST(Custom, SymmetricByConstruction) {
  const auto a = VertexId::custom(0), b = VertexId::custom(1), c = VertexId::custom(2);
  const auto g = make_custom({{a, b, 2.0}, {b, c, 0.5}}, {{a, 1.0}, {b, 2.0}, {c, 1.0}});
  EXPECT_TRUE(audit_edges(g, std::vector<VertexId>{a, b, c}).ok());
  EXPECT_DOUBLE_EQ(g.normalized_degree(b), 1.25);
  EXPECT_THROW(make_custom({{a, a, 1.0}}, {{a, 1.0}}), PreconditionError);
  EXPECT_THROW(make_custom({{a, b, -1.0}}, {{a, 1.0}, {b, 1.0}}), DomainError);
  EXPECT_THROW(make_custom({{a, b, 1.0}}, {{a, 1.0}}), PreconditionError);
}

TEST(Rules, ParseAndDescribe) {
  EXPECT_EQ(IntRule::parse("const:2")(7), 2);
  EXPECT_EQ(IntRule::parse("affine:1,1")(4), 5);
  EXPECT_EQ(IntRule::parse("list:1,3,5")(9), 5);
  EXPECT_EQ(IntRule::parse("affine:1,2").descriptor(), "affine:1,2");
  EXPECT_THROW(IntRule::parse("const"), PreconditionError);
  EXPECT_THROW(IntRule::parse("cubic:1"), PreconditionError);
  EXPECT_THROW(IntRule::parse("const:x"), PreconditionError);
}

}  // namespace
