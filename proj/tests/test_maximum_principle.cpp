#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "graphheat/maximum_principle.hpp"

namespace {

using namespace graphheat;

std::shared_ptr<const FiniteRegion> z2_ball(double r) {
  return std::make_shared<const FiniteRegion>(
      materialize_ball(make_lattice(2), {VertexId::lattice({0, 0})}, r, Metric::euclidean));
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

HeatProblem nonpositive_problem(std::shared_ptr<const FiniteRegion> region, std::mt19937_64& rng) {
  HeatProblem p;
  p.region = std::move(region);
  p.rho = random_vector(p.n(), rng, 0.2, 3.0);
  p.u0 = random_vector(p.n(), rng, -1.0, 0.0);
  p.boundary = TimeSeriesData::constant(random_vector(p.b(), rng, -1.0, 0.0));
  p.t1 = 0.0;
  p.t2 = 1.0;
  return p;
}

SpaceTimeGrid constant_grid(std::shared_ptr<const FiniteRegion> region, double c, std::vector<double> times) {
  SpaceTimeGrid g;
  g.values.assign(times.size(), ClosureVector::Constant(static_cast<Eigen::Index>(region->closure_size()), c));
  g.region = std::move(region);
  g.times = std::move(times);
  return g;
}

TEST(Wmp, ZeroHasNoViolation) {
  const auto r = z2_ball(3);
  const auto rep = verify_wmp(constant_grid(r, 0.0, {0.0, 0.5, 1.0}), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(r->interior_size())));
  EXPECT_TRUE(rep.hypotheses_hold());
  EXPECT_EQ(rep.max_violation, 0.0);
  EXPECT_FALSE(rep.location);
}

TEST(Wmp, SolverOutputWithNonpositiveData) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = z2_ball(2.5 + trial * 0.5);
    const auto p = nonpositive_problem(r, rng);
    const auto spec = solve_spectral(p, nullptr, uniform_times(0.0, 1.0, 20));
    const auto rs = verify_wmp(to_grid(spec, r, spec.times()), p.rho);
    EXPECT_TRUE(rs.hypotheses_hold()) << to_string(rs.failed) << " excess " << rs.hypothesis_excess;
    EXPECT_LE(rs.max_violation, 1e-10);
    const auto euler = solve_backward_euler(p, 0.01, 1);
    const auto re = verify_wmp(to_grid(euler, r, euler.times()), p.rho);
    EXPECT_TRUE(re.hypotheses_hold()) << to_string(re.failed) << " excess " << re.hypothesis_excess;
    EXPECT_LE(re.max_violation, 1e-10);
  }
}

TEST(Wmp, NegativeFirstModeAndSignFlip) {
  const auto r = z2_ball(4);
  const Eigen::VectorXd rho = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(r->interior_size()));
  const auto basis = dirichlet_spectrum(r, rho);
  const double lambda = basis.eigenvalues()[0];
  const Eigen::VectorXd phi = basis.eigenvectors().col(0);
  ASSERT_GT(phi.minCoeff(), 0.0);
  SpaceTimeGrid g;
  g.region = r;
  for (double t : uniform_times(0.0, 1.0, 10)) {
    ClosureVector v = ClosureVector::Zero(static_cast<Eigen::Index>(r->closure_size()));
    v.head(phi.size()) = -std::exp(-lambda * t) * phi;
    g.times.push_back(t);
    g.values.push_back(v);
    g.dudt.push_back(lambda * std::exp(-lambda * t) * phi);
  }
  const auto rep = verify_wmp(g, rho);
  EXPECT_TRUE(rep.hypotheses_hold());
  EXPECT_EQ(rep.max_violation, 0.0);

  for (auto& v : g.values) v = -v;
  for (auto& d : g.dudt) d = -d;
  const auto lower = verify_wmp_lower(g, rho);
  EXPECT_TRUE(lower.hypotheses_hold());
  EXPECT_EQ(lower.max_violation, 0.0);
  const auto bad = verify_wmp(g, rho);
  EXPECT_EQ(bad.failed, WmpHypothesis::initial);
  EXPECT_GT(bad.max_violation, bad.tolerance);
}

TEST(Wmp, BoundaryHypothesisLabelled) {
  std::mt19937_64 rng(12);
  const auto r = z2_ball(3);
  auto p = nonpositive_problem(r, rng);
  p.boundary = TimeSeriesData::constant(Eigen::VectorXd::Constant(p.b(), 0.5));
  const auto sol = solve_spectral(p, nullptr, uniform_times(0.0, 1.0, 10));
  const auto rep = verify_wmp(to_grid(sol, r, sol.times()), p.rho);
  EXPECT_EQ(rep.failed, WmpHypothesis::boundary);
  ASSERT_TRUE(rep.hypothesis_location);
  EXPECT_FALSE(r->is_interior(r->index_of(*rep.hypothesis_location).value()));
}

TEST(Wmp, SubsolutionHypothesisLabelled) {
  const auto r = z2_ball(3);
  HeatProblem p;
  p.region = r;
  p.rho = Eigen::VectorXd::Ones(p.n());
  p.u0 = Eigen::VectorXd::Zero(p.n());
  p.source = TimeSeriesData::constant(Eigen::VectorXd::Ones(p.n()));
  p.t2 = 1.0;
  const auto sol = solve_spectral(p, nullptr, uniform_times(0.0, 1.0, 10));
  const auto rep = verify_wmp(to_grid(sol, r, sol.times()), p.rho);
  EXPECT_EQ(rep.failed, WmpHypothesis::subsolution);
  EXPECT_GT(rep.max_violation, rep.tolerance);
}

TEST(Wmp, PlateauPathReachesBoundary) {
  const auto r = std::make_shared<const FiniteRegion>(
      materialize_ball(make_tree(IntRule::constant(2), 8), {VertexId::radial(0, 0)}, 4, Metric::combinatorial));
  // constant 1: residual 0, positive interior max attained everywhere
  const auto g = constant_grid(r, 1.0, {0.0, 0.25, 0.5});
  const auto rep = verify_wmp(g, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(r->interior_size())));
  EXPECT_FALSE(rep.conclusion_holds());
  ASSERT_GE(rep.plateau_path.size(), 2u);
  EXPECT_EQ(rep.plateau_path.front(), *rep.location);
  EXPECT_FALSE(r->is_interior(r->index_of(rep.plateau_path.back()).value()));
  for (std::size_t k = 1; k < rep.plateau_path.size(); ++k) {
    const auto nb = r->graph().neighbors(rep.plateau_path[k - 1]);
    EXPECT_TRUE(std::any_of(nb.begin(), nb.end(), [&](const Neighbor& e) { return e.vertex == rep.plateau_path[k]; }));
  }
}

TEST(Wmp, PlateauPathAbsentWhenMaxIsIsolated) {
  const auto r = z2_ball(3);
  ClosureVector u = ClosureVector::Zero(static_cast<Eigen::Index>(r->closure_size()));
  u[0] = 1.0;
  EXPECT_TRUE(plateau_path(*r, u, 0, 1.0, 1e-12).empty());
}

TEST(Wmp, GridValidation) {
  const auto r = z2_ball(2);
  const Eigen::VectorXd rho = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(r->interior_size()));
  EXPECT_THROW(verify_wmp(constant_grid(r, 0.0, {0.0, 0.0}), rho), PreconditionError);
  auto g = constant_grid(r, 0.0, {0.0, 1.0});
  g.values[1] = ClosureVector::Zero(3);
  EXPECT_THROW(verify_wmp(g, rho), PreconditionError);
  EXPECT_THROW(verify_wmp(constant_grid(r, 0.0, {0.0, 1.0}), Eigen::VectorXd::Ones(2)), PreconditionError);
}

// Z^1 ball of radius 41 with a certified lattice barrier.
struct PlFixture {
  std::shared_ptr<const FiniteRegion> region;
  BarrierSpec z;
  ParabolicCertificate cert;
  double T = 0.0;
};

const PlFixture& pl_fixture() {
  static const PlFixture f = [] {
    PlFixture out;
    out.region = std::make_shared<const FiniteRegion>(
        materialize_ball(make_lattice(1), {VertexId::lattice({0})}, 41, Metric::euclidean));
    const auto rho = DensitySpec::constant(1.0);
    const auto q = search_q([](double Q) { return barrier_lattice(0.0, 0.5, Q); }, rho, *out.region, 1.0);
    out.z = barrier_lattice(0.0, 0.5, *q.q_full);
    out.cert = q.certificate;
    out.T = 1.0 / *q.q_full;
    return out;
  }();
  return f;
}

SpaceTimeGrid grid_of(const PlFixture& f, const std::function<double(const VertexId&, double)>& u) {
  SpaceTimeGrid g;
  g.region = f.region;
  for (double t : uniform_times(0.0, f.T, 8)) {
    ClosureVector v(static_cast<Eigen::Index>(f.region->closure_size()));
    for (std::size_t k = 0; k < f.region->closure_size(); ++k) v[static_cast<Eigen::Index>(k)] = u(f.region->vertex(k), t);
    g.times.push_back(t);
    g.values.push_back(v);
  }
  return g;
}

TEST(PhragmenLindelof, ZeroHoldsForEveryEpsilon) {
  const auto& f = pl_fixture();
  ASSERT_TRUE(f.cert.pass);
  const auto rep = phragmen_lindelof_check(grid_of(f, [](const VertexId&, double) { return 0.0; }), f.z, f.cert,
                                           {10, 20, 40}, {1e-6, 1e-3, 1.0});
  ASSERT_EQ(rep.cases.size(), 9u);
  for (const auto& c : rep.cases) EXPECT_TRUE(c.boundary_ok && c.inside_ok);
  EXPECT_TRUE(rep.consistent);
  for (const auto& [R, eps] : rep.smallest_epsilon) EXPECT_EQ(eps, 1e-6);
}

TEST(PhragmenLindelof, HalfBarrierReportsMargin) {
  const auto& f = pl_fixture();
  const double eps = 0.01;
  const auto& g = f.region->graph();
  const auto u = grid_of(f, [&](const VertexId& x, double t) { return eps * f.z.value(g, x, t) / 2.0; });
  const auto rep = phragmen_lindelof_check(u, f.z, f.cert, {20}, {eps});
  ASSERT_EQ(rep.cases.size(), 1u);
  const auto& c = rep.cases.front();
  EXPECT_TRUE(c.boundary_ok && c.inside_ok);
  ASSERT_TRUE(c.argmin);
  double expect = std::numeric_limits<double>::infinity();
  for (double t : u.times)
    for (std::size_t i = 0; i < f.region->interior_size(); ++i)
      if (euclidean_norm(f.region->vertex(i)) < 20) expect = std::min(expect, eps * f.z.value(g, f.region->vertex(i), t) / 2);
  EXPECT_NEAR(c.margin, expect, 1e-12 * expect);
}

TEST(PhragmenLindelof, RefusesUncertifiedBarrier) {
  const auto& f = pl_fixture();
  auto bad = f.cert;
  bad.pass = false;
  EXPECT_THROW(phragmen_lindelof_check(grid_of(f, [](const VertexId&, double) { return 0.0; }), f.z, bad, {10}, {1.0}),
               PreconditionError);
}

// u0 = 0 and g = 1 on the boundary of the Z^1 ball of radius R
std::pair<std::shared_ptr<const FiniteRegion>, HeatSolution> boundary_driven(const PlFixture& f, double R) {
  HeatProblem p;
  p.region = std::make_shared<const FiniteRegion>(
      materialize_ball(make_lattice(1), {VertexId::lattice({0})}, R, Metric::euclidean));
  p.rho = Eigen::VectorXd::Ones(p.n());
  p.u0 = Eigen::VectorXd::Zero(p.n());
  p.boundary = TimeSeriesData::constant(Eigen::VectorXd::Ones(p.b()));
  p.t2 = f.T;
  return {p.region, solve_spectral(p, nullptr, uniform_times(0.0, f.T, 8))};
}

std::vector<double> epsilon_grid() {
  std::vector<double> eps;
  for (int k = -80; k <= 0; ++k) eps.push_back(std::pow(10.0, k / 4.0));
  return eps;
}

TEST(PhragmenLindelof, MonotoneInEpsilon) {
  const auto& f = pl_fixture();
  for (double R : {10.0, 20.0, 40.0}) {
    const auto [region, sol] = boundary_driven(f, R);
    const auto rep = phragmen_lindelof_check(to_grid(sol, region, sol.times()), f.z, f.cert, {R + 0.5}, epsilon_grid());
    EXPECT_TRUE(rep.consistent);
    bool seen = false;
    for (const auto& c : rep.cases) {
      const bool ok = c.boundary_ok && c.inside_ok;
      if (seen) {
        EXPECT_TRUE(ok) << "R " << R << " eps " << c.epsilon;
      }
      seen = seen || ok;
    }
    EXPECT_TRUE(seen);
  }
}

TEST(PhragmenLindelof, AchievedEpsilonShrinksWithRadius) {
  const auto& f = pl_fixture();
  std::vector<double> achieved;
  for (double R : {10.0, 20.0, 40.0}) {
    const auto [region, sol] = boundary_driven(f, R);
    const auto rep = phragmen_lindelof_check(to_grid(sol, region, sol.times()), f.z, f.cert, {R + 0.5}, epsilon_grid());
    const auto e = rep.smallest_epsilon.at(R + 0.5);
    ASSERT_TRUE(e);
    achieved.push_back(*e);
  }
  EXPECT_GT(achieved[0], achieved[1]);
  EXPECT_GT(achieved[1], achieved[2]);
}

}  // namespace
