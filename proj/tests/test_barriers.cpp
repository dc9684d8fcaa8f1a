#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "graphheat/barriers.hpp"
#include "graphheat/spectral.hpp"

namespace {

using namespace graphheat;

const VertexId kRoot = VertexId::radial(0, 0);

std::vector<double> radial_values(const std::vector<double>& per_shell, const FiniteRegion& region) {
  std::vector<double> v(region.closure_size());
  for (std::size_t k = 0; k < region.closure_size(); ++k)
    v[k] = per_shell.at(static_cast<std::size_t>(region.vertex(k).shell()));
  return v;
}

ClosureVector to_closure(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// binary tree shells 0..J-1 as a chain region
std::shared_ptr<const FiniteRegion> binary_chain(std::size_t J) {
  return shell_chain_ball(family_radial_profile(make_tree(IntRule::constant(2), static_cast<std::int64_t>(J) + 8),
                                                static_cast<std::int64_t>(J) + 4),
                          J);
}

TEST(Thm34, ThresholdFormula) {
  EXPECT_NEAR(thm34_threshold(1.0, 1.0), std::exp(2.0) - 1.0, 1e-12);
  EXPECT_NEAR(thm34_threshold(1.0, 1.0), 6.389056, 1e-6);
  for (double c : {0.5, 3.0, 10.0}) EXPECT_NEAR(thm34_threshold(0.7, c), thm34_threshold(0.7, 1.0) / c, 1e-12);
  EXPECT_THROW(thm34_threshold(0.0, 1.0), PreconditionError);
  EXPECT_THROW(barrier_thm34(1.0, -1.0), PreconditionError);
}

TEST(Thm34, ValuesAndGrowthClass) {
  const auto g = make_tree(IntRule::constant(2), 20);
  const auto z = barrier_thm34(1.3, 5.0);
  EXPECT_NEAR(z.value(g, kRoot, 0.0), std::exp(1.3), 1e-12);
  for (std::int64_t r : {0, 3, 17}) EXPECT_NEAR(z.log_value(g, VertexId::radial(r, 0), 0.0) / (r + 1.0), 1.3, 1e-14);
}

TEST(Thm34, CertifiesAtThresholdOnBinaryTree) {
  const auto region = binary_chain(61);
  const auto rho = DensitySpec::outer_degree_scaled(1.0);
  const double Q = thm34_threshold(1.0, 1.0);
  const auto cert = certify_parabolic(barrier_thm34(1.0, Q), rho, *region, barrier_time_grid(Q));
  EXPECT_TRUE(cert.far.pass) << cert.far.min_value;
  const auto half = certify_parabolic(barrier_thm34(1.0, Q / 2), rho, *region, barrier_time_grid(Q / 2));
  EXPECT_FALSE(half.far.pass);
  ASSERT_TRUE(half.far.argmin);
  EXPECT_GE(half.far.argmin_radius, 1.0);
}

TEST(Thm34, SearchAgreesWithThreshold) {
  const auto region = binary_chain(40);
  const auto rho = DensitySpec::outer_degree_scaled(1.0);
  const auto res = search_q([](double Q) { return barrier_thm34(1.0, Q); }, rho, *region, 0.25, 1.0, 9, 1.25);
  ASSERT_TRUE(res.q_far);
  const double thr = thm34_threshold(1.0, 1.0);
  EXPECT_LE(*res.q_far, thr * 1.25);
  EXPECT_GE(*res.q_far, thr / 1.25);
  ASSERT_TRUE(res.q_full);
  EXPECT_TRUE(res.certificate.pass);
}

TEST(Thm35, ConstraintsAndSeedValue) {
  const auto g = make_tree(IntRule::constant(2), 20);
  const auto z = barrier_thm35(0.5, 3.0, 0.5, 1.0);
  EXPECT_EQ(z.value(g, kRoot, 0.0), 1.0);
  EXPECT_EQ(z.value(g, kRoot, 0.3), 1.0);
  EXPECT_NO_THROW(barrier_thm35(0.5, 1.0, 1.0, 1.0));
  EXPECT_THROW(barrier_thm35(0.51, 1.0, 1.0, 1.0), PreconditionError);
  EXPECT_THROW(barrier_thm35(0.5, 1.0, 0.0, 1.0), PreconditionError);
  EXPECT_THROW(barrier_thm35(0.5, 1.0, 1.5, 1.0), PreconditionError);
  EXPECT_THROW(barrier_thm35(0.5, 1.0, 0.5, 1.0, 0.5), PreconditionError);
}

TEST(Thm35, GrowthClassRatioBounded) {
  const auto g = make_tree(IntRule::constant(1), 2000);
  const auto z = barrier_thm35(0.5, 3.0, 0.7, 1.0);
  for (std::int64_t r : {10, 100, 1000}) {
    const double ratio = z.log_value(g, VertexId::radial(r, 0), 0.0) / ((r + 1.0) * std::pow(std::log(r + 2.0), 0.7));
    EXPECT_GT(ratio, 0.0);
    EXPECT_LE(ratio, 0.5);
  }
}

// The seed sphere: Z(o, t) = 1 for every t, so rho d_t Z = 0 while Delta Z(o) > 0.
TEST(Thm35, CoreCertifiesWithSearchedQ) {
  const auto region = binary_chain(40);
  const auto rho = DensitySpec::log_power(1.0, 0.5);
  const auto res = search_q([](double Q) { return barrier_thm35(0.5, Q, 0.5, 1.0); }, rho, *region, 1.0);
  ASSERT_TRUE(res.q_far);
  EXPECT_TRUE(res.q_full) << "core residual " << res.certificate.core.min_value;
}

TEST(Thm35, ShiftedLogCertifiesCore) {
  const auto region = binary_chain(40);
  const auto rho = DensitySpec::log_power(1.0, 0.5);
  const auto res = search_q([](double Q) { return barrier_thm35(0.5, Q, 0.5, 1.0, 2.0); }, rho, *region, 1.0);
  ASSERT_TRUE(res.q_full);
  EXPECT_TRUE(res.certificate.pass);
}

TEST(Lattice, BetaBound) {
  EXPECT_DOUBLE_EQ(lattice_beta_bound(1.0), 0.5);
  EXPECT_DOUBLE_EQ(lattice_beta_bound(0.0), 0.5);
  EXPECT_DOUBLE_EQ(lattice_beta_bound(1.5), 0.25);
  EXPECT_THROW(lattice_beta_bound(2.5), PreconditionError);
  EXPECT_THROW(lattice_beta_bound(-0.1), PreconditionError);
  EXPECT_THROW(barrier_lattice(1.0, 1.0, 1.0, 0.6), PreconditionError);
  EXPECT_THROW(barrier_lattice(2.0, 1.0, 1.0, 0.1), PreconditionError);
}

TEST(Lattice, Values) {
  const auto g = make_lattice(3);
  const auto o = VertexId::lattice({0, 0, 0});
  EXPECT_NEAR(barrier_lattice(2.0, 0.8, 1.0).value(g, o, 0.0), std::exp(0.8 * std::pow(std::log(2.0), 2)), 1e-14);
  const auto z = barrier_lattice(1.0, 1.0, 1.0);
  const auto x = VertexId::lattice({30, 40, 0});
  EXPECT_NEAR(z.log_value(g, x, 0.0), std::sqrt(2501.0), 1e-12);
  EXPECT_EQ(z.family, BarrierFamily::lattice_sub2);
  EXPECT_EQ(barrier_lattice(2.0, 1.0, 1.0).family, BarrierFamily::lattice_crit);
}

TEST(Lattice, CertifiedOnZ3BallOfRadius30) {
  const auto g = make_lattice(3);
  const auto region = materialize_ball(g, {VertexId::lattice({0, 0, 0})}, 30, Metric::euclidean);
  for (double alpha : {0.0, 1.0, 2.0}) {
    const auto rho = DensitySpec::power_decay(1.0, alpha, Metric::euclidean, BoundSide::lower);
    const auto res = search_q([alpha](double Q) { return barrier_lattice(alpha, 0.5, Q); }, rho, region, 1.0);
    ASSERT_TRUE(res.q_full) << "alpha " << alpha;
    EXPECT_LE(*res.q_full, 1e4) << "alpha " << alpha;
  }
}

TEST(DerivativeAudit, ClosedFormMatchesFiniteDifference) {
  const auto tree = make_tree(IntRule::constant(2), 50);
  const auto z3 = make_lattice(3);
  const auto x = VertexId::radial(7, 3);
  const auto y = VertexId::lattice({3, -2, 5});
  const std::vector<std::pair<BarrierSpec, const WeightedGraph*>> cases{
      {barrier_thm34(1.0, 6.0), &tree},
      {barrier_thm35(0.5, 4.0, 0.5, 1.0), &tree},
      {barrier_lattice(1.0, 0.5, 3.0), &z3},
      {barrier_lattice(2.0, 0.5, 3.0), &z3},
  };
  for (const auto& [z, g] : cases) {
    const auto& v = z.family == BarrierFamily::thm34 || z.family == BarrierFamily::thm35 ? x : y;
    const double t = 0.1, h = 1e-5;
    const double fd = (z.log_value(*g, v, t + h) - z.log_value(*g, v, t - h)) / (2 * h);
    EXPECT_NEAR(fd, z.dt_log_value(*g, v, t), 1e-6 * std::abs(fd)) << to_string(z.family);
  }
}

TEST(Loglog, SignAtOriginAndFarField) {
  EXPECT_GT(loglog_laplacian(VertexId::lattice({0, 0})), 0.0);
  for (std::int64_t r = 200; r <= 2000; r += 90) {
    EXPECT_LT(loglog_laplacian(VertexId::lattice({r, 0})), 0.0) << r;
    EXPECT_LT(loglog_laplacian(VertexId::lattice({r, r / 3})), 0.0) << r;
  }
}

TEST(Loglog, ValueAt1000MatchesHighPrecisionOracle) {
  // mpmath at 50 digits
  EXPECT_NEAR(loglog_laplacian(VertexId::lattice({1000, 0})), -5.2389224473209695e-09, 1e-17);
}

TEST(Loglog, ValueAt1000InStatedRange) {
  const double v = loglog_laplacian(VertexId::lattice({1000, 0}));
  EXPECT_GE(v, -1.3e-8);
  EXPECT_LE(v, -0.8e-8);
}

TEST(Loglog, LeadingOrderRatio) {
  for (std::int64_t r = 800; r <= 2000; r += 200) {
    const double l = std::log(static_cast<double>(r));
    const double ratio = loglog_laplacian(VertexId::lattice({r, 0})) / (-1.0 / (2.0 * r * r * l * l));
    EXPECT_GE(ratio, 0.7) << r;
    EXPECT_LE(ratio, 1.1) << r;
  }
}

TEST(Loglog, AutoKCertifiesElliptic) {
  const auto g = make_lattice(2);
  const auto rho1 = DensitySpec::constant(1.0);
  const auto k1 = auto_k_z2(g, rho1);
  EXPECT_NEAR(k1.K, 1.0 / k1.max_abs_laplacian, 1e-15);
  const auto rho = DensitySpec::power_decay(1.0, 5.0, Metric::euclidean, BoundSide::upper);
  const auto k = auto_k_z2(g, rho);
  for (double R : {10.0, 40.0, 80.0}) {
    const auto region = materialize_ball(g, {VertexId::lattice({0, 0})}, R, Metric::euclidean);
    const auto z = barrier_z2_static(k.K);
    const auto cert = certify_elliptic(region, z.on(region), rho.on_interior(region), EllipticDirection::below_rho);
    EXPECT_TRUE(cert.pass) << "R " << R << " max " << cert.max_value;
  }
  EXPECT_THROW(auto_k_z2(make_lattice(3), rho), PreconditionError);
}

TEST(Antitree, ShellLaplacianPerConvention) {
  const double K = 0.7;
  const auto lin = [](AntitreeConvention c) {
    return family_radial_profile(make_antitree(IntRule::affine(1, 1), c, 20), 12);
  };
  const auto a = antitree_shell_laplacian(lin(AntitreeConvention::A), K);
  const auto b = antitree_shell_laplacian(lin(AntitreeConvention::B), K);
  EXPECT_NEAR(a[5], -2 * K, 1e-12);
  EXPECT_NEAR(b[5], 2 * K, 1e-12);
  for (std::size_t m = 1; m < 11; ++m) EXPECT_NEAR(a[m], -2 * K, 1e-12) << m;
  for (auto c : {AntitreeConvention::A, AntitreeConvention::B}) {
    const auto flat = antitree_shell_laplacian(
        family_radial_profile(make_antitree(IntRule::custom([](std::int64_t m) { return m == 0 ? 1 : 3; }, "1,3,3,..."), c, 20), 12), K);
    for (std::size_t m = 3; m < 11; ++m) EXPECT_NEAR(flat[m], 0.0, 1e-12) << m;
  }
}

TEST(Antitree, FullGraphLaplacianMatchesShells) {
  const auto g = make_antitree(IntRule::affine(1, 1), AntitreeConvention::A, 12);
  const auto region = materialize_ball(g, {kRoot}, 6, Metric::combinatorial);
  const auto z = barrier_antitree(g, 0.5);
  const auto vals = z.on(region);
  const auto shells = antitree_shell_laplacian(family_radial_profile(g, 8), 0.5);
  for (std::size_t i = 0; i < region.interior_size(); ++i)
    EXPECT_NEAR(laplacian(region, vals, i), shells[static_cast<std::size_t>(region.vertex(i).shell())], 1e-12);
  EXPECT_THROW(barrier_antitree(make_tree(IntRule::constant(2), 5), 1.0), PreconditionError);
}

TEST(Antitree, EllipticCertificateAwayFromRoot) {
  for (auto conv : {AntitreeConvention::A, AntitreeConvention::B}) {
    const auto g = make_antitree(IntRule::affine(1, 1), conv, 12);
    const auto region = materialize_ball(g, {kRoot}, 6, Metric::combinatorial);
    const auto rho = DensitySpec::power_decay(0.1, 3.0, Metric::combinatorial, BoundSide::upper);
    const auto cert = certify_elliptic(region, barrier_antitree(g, 1.0).on(region), rho.on_interior(region),
                                       EllipticDirection::below_rho,
                                       [&](std::size_t i) { return region.vertex(i).shell() == 0; });
    EXPECT_EQ(cert.pass, conv == AntitreeConvention::A);
  }
}

TEST(Lift, ConstantBarrier) {
  const auto g = make_lattice(2);
  const auto region = materialize_ball(g, {VertexId::lattice({0, 0})}, 5, Metric::euclidean);
  StaticBarrier one;
  one.value = [](const WeightedGraph&, const VertexId&) { return 1.0; };
  const auto rho = DensitySpec::constant(1.0);
  const auto ec = certify_elliptic(region, one.on(region), rho.on_interior(region), EllipticDirection::below_rho);
  ASSERT_TRUE(ec.pass);
  const auto lifted = lift_static(one, 2.0, region, ec);
  const auto cert = certify_parabolic(lifted, rho, region, {0.0, 0.5, 1.0});
  EXPECT_TRUE(cert.pass);
  EXPECT_NEAR(cert.far.min_value, 2.0, 1e-12);
  EXPECT_THROW(lift_static(one, 1.0, region, ec), PreconditionError);
  auto failed = ec;
  failed.pass = false;
  EXPECT_THROW(lift_static(one, 2.0, region, failed), PreconditionError);
}

TEST(Lift, LoglogBarrierOnZ2Balls) {
  const auto g = make_lattice(2);
  const auto rho = DensitySpec::power_decay(1.0, 5.0, Metric::euclidean, BoundSide::upper);
  const auto z = barrier_z2_static(auto_k_z2(g, rho).K);
  for (double R : {16.0, 48.0}) {
    const auto region = materialize_ball(g, {VertexId::lattice({0, 0})}, R, Metric::euclidean);
    const auto ec = certify_elliptic(region, z.on(region), rho.on_interior(region), EllipticDirection::below_rho);
    ASSERT_TRUE(ec.pass);
    const double c0 = z.value(g, VertexId::lattice({0, 0}));
    EXPECT_THROW(lift_static(z, 1.0 / c0, region, ec), PreconditionError);
    const auto lifted = lift_static(z, 2.0 / c0, region, ec);
    EXPECT_TRUE(certify_parabolic(lifted, rho, region, {0.0, 0.25, 0.5, 0.75, 1.0}).pass) << R;
  }
}

TEST(Certificate, ConstantCustomBarrierHasZeroResidual) {
  const auto g = make_tree(IntRule::constant(3), 10);
  const auto region = materialize_ball(g, {kRoot}, 4, Metric::combinatorial);
  BarrierSpec z;
  z.log_z = [](const WeightedGraph&, const VertexId&, double) { return 0.0; };
  z.dt_log_z = [](const WeightedGraph&, const VertexId&, double) { return 0.0; };
  const auto cert = certify_parabolic(z, DensitySpec::constant(2.0), region, {0.0, 1.0});
  EXPECT_TRUE(cert.pass);
  EXPECT_EQ(cert.far.min_value, 0.0);
  EXPECT_EQ(cert.core.min_value, 0.0);
  EXPECT_THROW(certify_parabolic(z, DensitySpec::constant(2.0), region, {}), PreconditionError);
}

TEST(LogSpace, HugeBarriersStayFinite) {
  const auto region = binary_chain(600);
  const double Q = thm34_threshold(1.0, 1.0);
  const auto cert = certify_parabolic(barrier_thm34(1.0, Q), DensitySpec::outer_degree_scaled(1.0), *region,
                                      barrier_time_grid(Q));
  EXPECT_TRUE(std::isfinite(cert.far.min_value));
  EXPECT_GT(cert.far.argmin_log_z, 0.0);
}

TEST(RadialH, BinaryTreeSummable) {
  const std::size_t M = 60;
  const auto p = family_radial_profile(make_tree(IntRule::constant(2), 70), M);
  std::vector<double> rho(M + 1);
  for (std::size_t m = 0; m <= M; ++m) rho[m] = std::pow(1.0 + m, -2.0);
  const auto h = construct_radial_h(p, rho, 1.0);
  for (std::size_t m = 1; m < M; ++m) EXPECT_NEAR(radial_laplacian(p, h.h, m), -rho[m], 1e-12) << m;
  for (std::size_t m = 0; m < M; ++m) EXPECT_GT(h.h[m], h.h[m + 1]);
  EXPECT_GT(h.h[M], 0.0);
  EXPECT_GT(h.raabe, 1.0);
  // a_k (1 + k)^2 -> 1 from above
  for (std::size_t k = 20; k < M; ++k) {
    const double scaled = h.increments[k] * (1.0 + k) * (1.0 + k);
    EXPECT_GT(scaled, 1.0) << k;
    EXPECT_LT(scaled, 1.15) << k;
  }
}

TEST(RadialH, EllipticCertificateOnShellChain) {
  const std::size_t M = 40;
  const auto p = family_radial_profile(make_tree(IntRule::constant(2), 50), M);
  std::vector<double> rho(M + 1);
  for (std::size_t m = 0; m <= M; ++m) rho[m] = std::pow(1.0 + m, -2.0);
  const auto h = construct_radial_h(p, rho, 1.0);
  const auto region = shell_chain_ball(p, M);
  Eigen::VectorXd rho_i(static_cast<Eigen::Index>(region->interior_size()));
  for (std::size_t i = 0; i < region->interior_size(); ++i)
    rho_i[static_cast<Eigen::Index>(i)] = rho[static_cast<std::size_t>(region->vertex(i).shell())];
  const auto cert = certify_elliptic(*region, to_closure(radial_values(h.h, *region)), rho_i,
                                     EllipticDirection::below_minus_rho,
                                     [&](std::size_t i) { return region->vertex(i).shell() < 1; });
  EXPECT_TRUE(cert.pass);
  EXPECT_NEAR(cert.max_value, 0.0, 1e-12);
}

TEST(RadialH, NonSummableCases) {
  const std::size_t M = 60;
  const auto tree = family_radial_profile(make_tree(IntRule::constant(2), 70), M);
  EXPECT_THROW(construct_radial_h(tree, std::vector<double>(M + 1, 1.0), 1e-4), NonSummableError);
  const auto line = family_radial_profile(make_tree(IntRule::constant(1), 70), M);
  std::vector<double> rho(M + 1);
  for (std::size_t m = 0; m <= M; ++m) rho[m] = std::pow(1.0 + m, -2.0);
  EXPECT_THROW(construct_radial_h(line, rho, 1e-4), NonSummableError);
}

TEST(BallH, Z3PoissonSolve) {
  const auto g = make_lattice(3);
  const auto rho = DensitySpec::power_decay(1.0, 3.0, Metric::euclidean, BoundSide::upper);
  const auto b12 = materialize_ball(g, {VertexId::lattice({0, 0, 0})}, 12, Metric::euclidean);
  const auto r12 = rho.on_interior(b12);
  const auto h12 = construct_ball_h(b12, r12);
  EXPECT_GT(h12.head(r12.size()).minCoeff(), 0.0);
  for (std::size_t i = 0; i < b12.interior_size(); ++i)
    EXPECT_LE(std::abs(laplacian(b12, h12, i) + r12[static_cast<Eigen::Index>(i)]), 1e-10);
  const auto b8 = materialize_ball(g, {VertexId::lattice({0, 0, 0})}, 8, Metric::euclidean);
  const auto h8 = construct_ball_h(b8, rho.on_interior(b8));
  for (std::size_t k = 0; k < b8.closure_size(); ++k) {
    const auto j = b12.index_of(b8.vertex(k)).value();
    EXPECT_GE(h12[static_cast<Eigen::Index>(j)], h8[static_cast<Eigen::Index>(k)]);
  }
  const auto maxima = radial_maxima(b12, h12, [](const VertexId& x) { return euclidean_norm(x); });
  EXPECT_EQ(maxima.begin()->first, 0);
  EXPECT_GT(maxima.begin()->second, maxima.rbegin()->second);
}

}  // namespace
