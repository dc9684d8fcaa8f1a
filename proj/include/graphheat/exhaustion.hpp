#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graphheat/barriers.hpp"
#include "graphheat/cauchy.hpp"
#include "graphheat/density.hpp"
#include "graphheat/maximum_principle.hpp"
#include "graphheat/spectral.hpp"

namespace graphheat {

/// Tolerance of the run invariants (bounds and monotonicity in j).
inline constexpr double kExhaustionTolerance = 1e-9;

enum class SolverKind { spectral, euler, radial };

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::spectral: return "spectral";
    case SolverKind::euler: return "euler";
    case SolverKind::radial: return "radial";
  }
  return "unknown";
}

struct ExhaustionSetup {
  WeightedGraph graph;
  DensitySpec rho;
  std::function<double(double)> u0;  // initial datum as a function of the distance to the seed
  Metric metric = Metric::combinatorial;
  double gamma = 0.0;
  double r_hat = 1.0;               // u0 == gamma at distance >= r_hat
  std::vector<std::int64_t> radii;  // ball radii j, increasing
  double T = 1.5;
  SolverKind solver = SolverKind::radial;
  double dt = 1e-3;                 // implicit Euler step
  std::size_t store_every = 50;     // stored node spacing = dt * store_every (all solvers)

  double stored_dt() const { return dt * static_cast<double>(store_every); }
};

/// Per-ball solution sampled on the stored grid.
struct BallSolution {
  std::int64_t j = 0;
  SpaceTimeGrid grid;
  std::vector<double> distance;  // per closure vertex
};

struct ExhaustionRun {
  bool shifted = true;         // true: v_j with the gamma shift; false: boundary-constant variant w_j
  double boundary_value = 0.0;  // 0 for v_j, c for w_j
  double M = 0.0;              // max(u0 - gamma) (shifted) or max u0
  double min_u0 = 0.0;
  std::vector<BallSolution> balls;
  std::vector<double> gaps;    // sup over the probe window of |s_{j+1} - s_j|
  double observed_min = 0.0;
  double observed_max = 0.0;
  Eigen::VectorXd initial_slice;  // interior of the largest ball at t = 0
  std::vector<double> times;
};

inline std::vector<VertexId> exhaustion_seed(const ExhaustionSetup& s) {
  if (s.metric == Metric::euclidean) {
    if (s.graph.family().kind != FamilyTag::Kind::lattice)
      throw PreconditionError("euclidean exhaustion needs a lattice");
    return {VertexId::lattice(std::vector<std::int64_t>(static_cast<std::size_t>(s.graph.family().dimension), 0))};
  }
  const auto seed = s.graph.model().canonical_seed();
  if (!seed) throw PreconditionError(s.graph.family().describe() + " has no canonical seed");
  return {*seed};
}

inline double exhaustion_distance(const ExhaustionSetup& s, const WeightedGraph& g, const VertexId& x) {
  return s.metric == Metric::euclidean ? euclidean_norm(x) : static_cast<double>(canonical_radius(g, x));
}

namespace detail {

inline std::vector<double> stored_times(const ExhaustionSetup& s) {
  const double step = s.stored_dt();
  const double count = s.T / step;
  const auto k = static_cast<std::size_t>(std::llround(count));
  if (k == 0 || std::abs(count - static_cast<double>(k)) > 1e-9 * count)
    throw PreconditionError("stored spacing dt*store_every must divide T");
  std::vector<double> t(k + 1);
  for (std::size_t i = 0; i <= k; ++i) t[i] = static_cast<double>(i) * step;
  return t;
}

inline std::shared_ptr<const FiniteRegion> exhaustion_ball(const ExhaustionSetup& s, std::int64_t j) {
  if (s.solver == SolverKind::radial) {
    if (!s.graph.family().is_radial())
      throw PreconditionError("radial solver needs a weakly spherically symmetric family, got " +
                              s.graph.family().describe());
    return shell_chain_ball(family_radial_profile(s.graph, j), static_cast<std::size_t>(j));
  }
  return std::make_shared<const FiniteRegion>(
      materialize_ball(s.graph, exhaustion_seed(s), static_cast<double>(j), s.metric));
}

inline void validate_datum(const ExhaustionSetup& s, const FiniteRegion& region) {
  for (std::size_t k = 0; k < region.closure_size(); ++k) {
    const double d = exhaustion_distance(s, region.graph(), region.vertex(k));
    const double v = s.u0(d);
    if (!std::isfinite(v)) throw PreconditionError("u0 is not finite at " + region.vertex(k).to_string());
    if (v < s.gamma) throw PreconditionError("u0 < gamma at " + region.vertex(k).to_string());
    if (d >= s.r_hat && v != s.gamma)
      throw PreconditionError("u0 differs from gamma outside B_Rhat at " + region.vertex(k).to_string());
  }
}

inline BallSolution solve_ball(const ExhaustionSetup& s, std::int64_t j, bool shifted, double c,
                               const std::vector<double>& times) {
  auto region = exhaustion_ball(s, j);
  if (shifted) validate_datum(s, *region);
  HeatProblem p;
  p.region = region;
  p.rho = s.rho.on_interior(*region);
  p.u0.resize(p.n());
  BallSolution out;
  out.j = j;
  for (std::size_t k = 0; k < region->closure_size(); ++k)
    out.distance.push_back(exhaustion_distance(s, region->graph(), region->vertex(k)));
  for (Eigen::Index i = 0; i < p.n(); ++i) {
    const double u = s.u0(out.distance[static_cast<std::size_t>(i)]);
    // w - c solves the same equation with zero boundary data (constants are harmonic)
    p.u0[i] = shifted ? u - s.gamma : u - c;
  }
  p.t1 = 0.0;
  p.t2 = s.T;
  if (s.solver == SolverKind::euler) {
    const auto sol = solve_backward_euler(p, s.dt, s.store_every);
    out.grid = to_grid(sol, region, sol.times());
  } else {
    const auto sol = solve_spectral(p, nullptr, times);
    out.grid = to_grid(sol, region, times);
  }
  if (!shifted)
    for (auto& v : out.grid.values) v.array() += c;
  return out;
}

/// Check the bounds and the monotonicity in j; fills gaps and observed extrema.
inline void check_run(ExhaustionRun& run, double lower, double upper, bool increasing) {
  const double tol = kExhaustionTolerance * std::max(1.0, std::max(std::abs(lower), std::abs(upper)));
  run.observed_min = std::numeric_limits<double>::infinity();
  run.observed_max = -std::numeric_limits<double>::infinity();
  for (const auto& b : run.balls)
    for (const auto& v : b.grid.values) {
      run.observed_min = std::min(run.observed_min, v.minCoeff());
      run.observed_max = std::max(run.observed_max, v.maxCoeff());
    }
  if (run.observed_min < lower - tol || run.observed_max > upper + tol)
    throw InvariantError("solution left [" + std::to_string(lower) + ", " + std::to_string(upper) +
                         "]: observed [" + std::to_string(run.observed_min) + ", " +
                         std::to_string(run.observed_max) + "]");
  const auto& probe = *run.balls.front().grid.region;
  for (std::size_t b = 0; b + 1 < run.balls.size(); ++b) {
    const auto& small = run.balls[b];
    const auto& big = run.balls[b + 1];
    const auto& rs = *small.grid.region;
    const auto& rb = *big.grid.region;
    double gap = 0.0;
    for (std::size_t k = 0; k < rs.closure_size(); ++k) {
      const auto idx = rb.index_of(rs.vertex(k));
      if (!idx) continue;
      const bool in_probe = probe.index_of(rs.vertex(k)).has_value() &&
                            probe.is_interior(*probe.index_of(rs.vertex(k)));
      for (std::size_t t = 1; t < small.grid.times.size(); ++t) {
        const double a = small.grid.values[t][static_cast<Eigen::Index>(k)];
        const double c = big.grid.values[t][static_cast<Eigen::Index>(*idx)];
        const double step = increasing ? a - c : c - a;
        if (step > tol)
          throw InvariantError("monotonicity in j fails at " + rs.vertex(k).to_string() + ", t=" +
                               std::to_string(small.grid.times[t]) + " between j=" + std::to_string(small.j) +
                               " and j=" + std::to_string(big.j));
        if (in_probe) gap = std::max(gap, std::abs(c - a));
      }
    }
    run.gaps.push_back(gap);
  }
}

inline void check_setup(const ExhaustionSetup& s) {
  if (s.radii.empty()) throw PreconditionError("exhaustion needs at least one ball radius");
  for (std::size_t k = 0; k < s.radii.size(); ++k) {
    if (s.radii[k] < 1) throw PreconditionError("ball radii must be >= 1");
    if (k && s.radii[k] <= s.radii[k - 1]) throw PreconditionError("ball radii must increase");
  }
  if (!(s.T > 0.0)) throw PreconditionError("T must be > 0");
  if (!s.u0) throw PreconditionError("no initial datum");
}

}  // namespace detail

/// v_j: L v = 0 in B_j, v = 0 outside, v(0) = u0 - gamma; the limit estimate is gamma + v_{j_max}.
inline ExhaustionRun run_exhaustion(const ExhaustionSetup& s) {
  detail::check_setup(s);
  const auto times = detail::stored_times(s);
  ExhaustionRun run;
  run.shifted = true;
  run.times = times;
  for (auto j : s.radii) run.balls.push_back(detail::solve_ball(s, j, true, 0.0, times));
  const auto& last = run.balls.back();
  const auto n = static_cast<Eigen::Index>(last.grid.region->interior_size());
  run.initial_slice = last.grid.values.front().head(n);
  run.M = std::max(0.0, run.initial_slice.maxCoeff());
  run.min_u0 = s.gamma;
  detail::check_run(run, 0.0, run.M, true);
  return run;
}

/// w_j: L w = 0 in B_j, w = c outside, w(0) = u0; decreasing in j for c >= max u0.
inline ExhaustionRun run_exhaustion_with_boundary(const ExhaustionSetup& s, double c) {
  detail::check_setup(s);
  const auto times = detail::stored_times(s);
  ExhaustionRun run;
  run.shifted = false;
  run.boundary_value = c;
  run.times = times;
  {
    const auto region = detail::exhaustion_ball(s, s.radii.back());
    double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < region->closure_size(); ++k) {
      const double u = s.u0(exhaustion_distance(s, region->graph(), region->vertex(k)));
      mx = std::max(mx, u);
      mn = std::min(mn, u);
    }
    if (c < mx) throw PreconditionError("boundary constant c = " + std::to_string(c) + " is below max u0 = " + std::to_string(mx));
    run.M = mx;
    run.min_u0 = mn;
  }
  for (auto j : s.radii) run.balls.push_back(detail::solve_ball(s, j, false, c, times));
  const auto& last = run.balls.back();
  run.initial_slice = last.grid.values.front().head(static_cast<Eigen::Index>(last.grid.region->interior_size()));
  detail::check_run(run, run.min_u0, c, false);
  return run;
}

struct EnvelopeReport {
  bool pass = false;
  double kappa = 0.0;
  double C = 0.0;
  double C_stated = 0.0;  // max(M / min h, 2 kappa eps^2)
  double min_h_core = 0.0;
  bool condition1 = false;  // M - kappa t0^2 <= 0
  bool condition2 = false;  // M - C min_{B_Rhat} h <= 0
  bool condition3 = false;  // C - 2 kappa eps^2 >= 0
  bool condition_time = false;  // C >= 2 kappa t0, needed for L w <= 0 on (0, t0 + eps]
  double min_margin = std::numeric_limits<double>::infinity();  // min of C h + kappa (t - t0)^2 - v
  std::optional<VertexId> argmin;
  double argmin_t = 0.0;
  std::int64_t argmin_j = 0;
  std::map<std::int64_t, double> margin_by_distance;  // largest ball, floor(distance) bins
  std::size_t samples = 0;
  double tolerance = kExhaustionTolerance;
};

/// Envelope v_j <= C h + kappa (t - t0)^2 on [t0 - eps, t0 + eps] with kappa = M/t0^2 and
/// C = max(M / min_{B_Rhat} h, 2 kappa t0).
inline EnvelopeReport certify_decay_envelope(const ExhaustionSetup& s, const ExhaustionRun& run,
                                             const std::function<double(const VertexId&)>& h,
                                             const EllipticCertificate& h_certificate, double t0, double eps) {
  if (!run.shifted) throw PreconditionError("envelope applies to the gamma-shifted run");
  if (!h_certificate.pass) throw PreconditionError("barrier h is not certified (Delta h <= -rho fails)");
  if (!(t0 > 0.0) || !(eps > 0.0) || !(eps < t0)) throw PreconditionError("need 0 < eps < t0");
  EnvelopeReport r;
  const double M = run.M;
  r.kappa = M / (t0 * t0);
  r.min_h_core = std::numeric_limits<double>::infinity();
  const auto& big = run.balls.back();
  for (std::size_t k = 0; k < big.grid.region->closure_size(); ++k)
    if (big.distance[k] < s.r_hat) r.min_h_core = std::min(r.min_h_core, h(big.grid.region->vertex(k)));
  if (!(r.min_h_core > 0.0)) throw PreconditionError("h must be positive on B_Rhat");
  r.C = std::max(M / r.min_h_core, 2.0 * r.kappa * t0);
  r.C_stated = std::max(M / r.min_h_core, 2.0 * r.kappa * eps * eps);
  r.condition1 = M - r.kappa * t0 * t0 <= 1e-15 * std::max(1.0, M);
  r.condition2 = M - r.C * r.min_h_core <= 1e-15 * std::max(1.0, M);
  r.condition3 = r.C - 2.0 * r.kappa * eps * eps >= 0.0;
  r.condition_time = r.C >= 2.0 * r.kappa * t0;
  const double tol = kExhaustionTolerance * std::max(1.0, M);
  bool ok = true;
  for (const auto& b : run.balls) {
    const auto& region = *b.grid.region;
    std::vector<double> hv(region.closure_size());
    for (std::size_t k = 0; k < region.closure_size(); ++k) hv[k] = h(region.vertex(k));
    for (std::size_t ti = 0; ti < b.grid.times.size(); ++ti) {
      const double t = b.grid.times[ti];
      if (t < t0 - eps - 1e-12 || t > t0 + eps + 1e-12) continue;
      for (std::size_t k = 0; k < region.closure_size(); ++k) {
        const double margin = r.C * hv[k] + r.kappa * (t - t0) * (t - t0) - b.grid.values[ti][static_cast<Eigen::Index>(k)];
        ++r.samples;
        if (margin < -tol) ok = false;
        if (margin < r.min_margin) {
          r.min_margin = margin;
          r.argmin = region.vertex(k);
          r.argmin_t = t;
          r.argmin_j = b.j;
        }
        if (&b == &run.balls.back()) {
          const auto bin = static_cast<std::int64_t>(std::floor(b.distance[k] + 1e-12));
          auto [it, inserted] = r.margin_by_distance.emplace(bin, margin);
          if (!inserted) it->second = std::min(it->second, margin);
        }
      }
    }
  }
  r.pass = ok && r.samples > 0 && r.condition1 && r.condition2 && r.condition_time;
  return r;
}

struct TimeDerivativeReport {
  double C = 0.0;              // max_{B_Rhat}(u0 - gamma) * max_{B_{Rhat + 2s}}(Deg / rho)
  double max_u0_excess = 0.0;
  double max_deg_over_rho = 0.0;
  double max_exact = 0.0;      // max |d_t v| from exact derivatives (0 when unavailable)
  double max_difference = 0.0;  // max |v(t_{k+1}) - v(t_k)| / (t_{k+1} - t_k)
  bool pass = false;
};

/// |d_t v_j| <= C with C from the compact-support Laplacian bound; balls are strict, B_r = {d < r}.
inline TimeDerivativeReport time_derivative_bound_check(const ExhaustionSetup& s, const ExhaustionRun& run,
                                                        std::int64_t jump = 1) {
  if (!run.shifted) throw PreconditionError("time-derivative bound applies to the gamma-shifted run");
  TimeDerivativeReport r;
  const auto& big = run.balls.back();
  const auto& region = *big.grid.region;
  const double outer = s.r_hat + 2.0 * static_cast<double>(jump);
  for (std::size_t k = 0; k < region.closure_size(); ++k) {
    const double d = big.distance[k];
    if (d < s.r_hat) r.max_u0_excess = std::max(r.max_u0_excess, s.u0(d) - s.gamma);
    if (d < outer) {
      if (!region.is_interior(k)) throw PreconditionError("largest ball does not contain B_{Rhat+2s}");
      r.max_deg_over_rho =
          std::max(r.max_deg_over_rho, region.normalized_degree(k) / s.rho(region.graph(), region.vertex(k)));
    }
  }
  r.C = r.max_u0_excess * r.max_deg_over_rho;
  for (const auto& b : run.balls) {
    const auto n = static_cast<Eigen::Index>(b.grid.region->interior_size());
    for (std::size_t t = 0; t < b.grid.times.size(); ++t) {
      if (!b.grid.dudt.empty()) r.max_exact = std::max(r.max_exact, b.grid.dudt[t].cwiseAbs().maxCoeff());
      if (t + 1 < b.grid.times.size())
        r.max_difference = std::max(r.max_difference, ((b.grid.values[t + 1] - b.grid.values[t]).head(n)).cwiseAbs().maxCoeff() /
                                                          (b.grid.times[t + 1] - b.grid.times[t]));
    }
  }
  const double tol = kExhaustionTolerance * std::max(1.0, r.C);
  r.pass = r.max_exact <= r.C + tol && r.max_difference <= r.C + tol;
  return r;
}

// ---------------------------------------------------------------------------
// Non-uniqueness exhibit

/// Refuses densities that do not satisfy the non-uniqueness side bound:
/// trees with constant branching b0 >= 2 need rho <= c0 (1 + r)^(-alpha) with alpha > 1,
/// Z^n (n >= 3) needs rho <= c0 (1 + |x|)^(-alpha) with alpha > 2.
inline void check_nonuniqueness_density(const WeightedGraph& g, const DensitySpec& rho) {
  const auto& fam = g.family();
  const bool upper_power = rho.family() == DensityFamily::power_decay && rho.side() == BoundSide::upper;
  if (fam.kind == FamilyTag::Kind::tree) {
    const auto rule = IntRule::parse(fam.rule);
    if (fam.rule.rfind("const:", 0) != 0 || rule(0) < 2)
      throw PreconditionError("non-uniqueness exhibit needs constant branching b0 >= 2, got " + fam.rule);
    if (!upper_power || rho.metric() != Metric::combinatorial)
      throw PreconditionError("non-uniqueness exhibit needs rho <= c0 (1 + r)^(-alpha), got " + rho.describe());
    if (!(rho.param("alpha") > 1.0))
      throw PreconditionError("rho = " + rho.describe() + " violates alpha > 1: inside the tree uniqueness regime");
    return;
  }
  if (fam.kind == FamilyTag::Kind::lattice) {
    if (fam.dimension < 3) throw PreconditionError("non-uniqueness exhibit on Z^n needs n >= 3");
    if (!upper_power || rho.metric() != Metric::euclidean)
      throw PreconditionError("non-uniqueness exhibit needs rho <= c0 (1 + |x|)^(-alpha), got " + rho.describe());
    if (!(rho.param("alpha") > 2.0))
      throw PreconditionError("rho = " + rho.describe() + " violates alpha > 2: inside the Z^n uniqueness regime");
    return;
  }
  throw PreconditionError("non-uniqueness exhibit supports trees and Z^n (n >= 3), got " + fam.describe());
}

struct ExhibitProfileRow {
  std::int64_t distance = 0;  // floor of the distance to the seed
  double A = 0.0;             // max over the bin of gamma + v_j(x, t0)
  double B = 0.0;             // min over the bin of w_j(x, t0)
  double envelope = 0.0;      // max over the bin of gamma + C h(x)
  double h = 0.0;
  double separation = 0.0;    // B - A
};

struct ExhibitReport {
  bool pass = false;
  bool initial_audit = false;  // A and B start from the same u0 slice
  EllipticCertificate h_certificate;
  std::optional<RadialH> radial_h;
  double h_residual = 0.0;  // max |Delta h + rho| on the checked vertices
  EnvelopeReport envelope;
  std::vector<ExhibitProfileRow> profile;
  double threshold = 0.0;   // (c - gamma) / 2
  double best_separation = -std::numeric_limits<double>::infinity();
  std::int64_t best_distance = 0;
  double t0 = 1.0;
  double gap_A = 0.0;  // Cauchy gap of the last pair of balls
  double gap_B = 0.0;
  ExhaustionRun A;
  ExhaustionRun B;
};

/// Two bounded solutions with the same initial datum: A -> gamma and B -> c at infinity.
inline ExhibitReport nonuniqueness_exhibit(const ExhaustionSetup& s, double c, double t0, double eps,
                                           double tail_tolerance = 1e-4) {
  check_nonuniqueness_density(s.graph, s.rho);
  if (!(c > s.gamma)) throw PreconditionError("boundary constant c must exceed gamma");
  ExhibitReport rep;
  rep.t0 = t0;
  rep.threshold = (c - s.gamma) / 2.0;

  // barrier h with Delta h <= -rho
  const auto J = s.radii.back();
  std::function<double(const VertexId&)> h;
  std::shared_ptr<const FiniteRegion> h_region;
  ClosureVector h_values;
  if (s.solver == SolverKind::radial) {
    const auto profile = family_radial_profile(s.graph, J);
    h_region = shell_chain_ball(profile, static_cast<std::size_t>(J));
    std::vector<double> rho_shell;
    for (std::int64_t m = 0; m <= J; ++m) rho_shell.push_back(s.rho(h_region->graph(), VertexId::radial(m, 0)));
    rep.radial_h = construct_radial_h(profile, rho_shell, tail_tolerance);
    h_values.resize(static_cast<Eigen::Index>(h_region->closure_size()));
    for (std::size_t k = 0; k < h_region->closure_size(); ++k)
      h_values[static_cast<Eigen::Index>(k)] = rep.radial_h->h[static_cast<std::size_t>(h_region->vertex(k).shell())];
  } else {
    h_region = std::make_shared<const FiniteRegion>(
        materialize_ball(s.graph, exhaustion_seed(s), static_cast<double>(J), s.metric));
    h_values = construct_ball_h(*h_region, s.rho.on_interior(*h_region));
  }
  const Eigen::VectorXd rho_int = s.rho.on_interior(*h_region);
  rep.h_certificate = certify_elliptic(*h_region, h_values, rho_int, EllipticDirection::below_minus_rho);
  const Eigen::VectorXd lap = laplacian_interior(*h_region, h_values);
  rep.h_residual = (lap + rho_int).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(h_region->interior_size()); ++i)
    if (!(h_values[i] > 0.0)) throw InvariantError("barrier h is not positive at " + h_region->vertex(static_cast<std::size_t>(i)).to_string());
  h = [h_region, h_values](const VertexId& x) {
    const auto i = h_region->index_of(x);
    if (!i) throw MissingValueError("h undefined at " + x.to_string());
    return h_values[static_cast<Eigen::Index>(*i)];
  };

  rep.A = run_exhaustion(s);
  rep.B = run_exhaustion_with_boundary(s, c);
  if (!rep.A.gaps.empty()) rep.gap_A = rep.A.gaps.back();
  if (!rep.B.gaps.empty()) rep.gap_B = rep.B.gaps.back();

  // shared initial datum: v_j(0) = u0 - gamma and w_j(0) = u0 on the same interior
  {
    const auto& va = rep.A.balls.back();
    const auto n = static_cast<Eigen::Index>(va.grid.region->interior_size());
    bool same = rep.A.initial_slice.size() == rep.B.initial_slice.size();
    for (Eigen::Index i = 0; same && i < n; ++i) {
      const double u = s.u0(va.distance[static_cast<std::size_t>(i)]);
      same = rep.B.initial_slice[i] == u && rep.A.initial_slice[i] == u - s.gamma;
    }
    rep.initial_audit = same;
  }

  rep.envelope = certify_decay_envelope(s, rep.A, h, rep.h_certificate, t0, eps);

  const auto& a = rep.A.balls.back();
  const auto& b = rep.B.balls.back();
  const auto it = std::find_if(a.grid.times.begin(), a.grid.times.end(),
                               [t0](double t) { return std::abs(t - t0) <= 1e-12 * std::max(1.0, t0); });
  if (it == a.grid.times.end()) throw PreconditionError("t0 is not a stored time");
  const auto ti = static_cast<std::size_t>(it - a.grid.times.begin());
  std::map<std::int64_t, ExhibitProfileRow> rows;
  const auto& region = *a.grid.region;
  for (std::size_t i = 0; i < region.interior_size(); ++i) {
    const auto bin = static_cast<std::int64_t>(std::floor(a.distance[i] + 1e-12));
    const double av = s.gamma + a.grid.values[ti][static_cast<Eigen::Index>(i)];
    const double bv = b.grid.values[ti][static_cast<Eigen::Index>(i)];
    const double hv = h(region.vertex(i));
    auto [row, inserted] = rows.try_emplace(bin);
    auto& r = row->second;
    if (inserted) {
      r.distance = bin;
      r.A = av;
      r.B = bv;
      r.h = hv;
    } else {
      r.A = std::max(r.A, av);
      r.B = std::min(r.B, bv);
      r.h = std::max(r.h, hv);
    }
  }
  for (auto& [bin, r] : rows) {
    r.envelope = s.gamma + rep.envelope.C * r.h;
    r.separation = r.B - r.A;
    if (r.separation > rep.best_separation) {
      rep.best_separation = r.separation;
      rep.best_distance = bin;
    }
    rep.profile.push_back(r);
  }
  rep.pass = rep.initial_audit && rep.h_certificate.pass && rep.envelope.pass && rep.best_separation >= rep.threshold;
  return rep;
}

}  // namespace graphheat
