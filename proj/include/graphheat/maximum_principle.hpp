#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graphheat/barriers.hpp"
#include "graphheat/calculus.hpp"
#include "graphheat/cauchy.hpp"

namespace graphheat {

/// Absolute tolerance after scaling the data to unit sup-norm.
inline constexpr double kWmpTolerance = 1e-10;

/// Values over a region closure at increasing times, optionally with exact interior time derivatives.
struct SpaceTimeGrid {
  std::shared_ptr<const FiniteRegion> region;
  std::vector<double> times;
  std::vector<ClosureVector> values;
  std::vector<Eigen::VectorXd> dudt;  // empty: backward differences are used

  void validate() const {
    if (!region) throw PreconditionError("grid has no region");
    if (times.size() != values.size() || times.empty()) throw PreconditionError("grid needs one slice per time");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (!(times[k] > times[k - 1])) throw PreconditionError("grid times must be strictly increasing");
    for (const auto& v : values)
      if (static_cast<std::size_t>(v.size()) != region->closure_size())
        throw PreconditionError("grid slice does not match the region closure");
    if (!dudt.empty() && dudt.size() != times.size()) throw PreconditionError("dudt needs one slice per time");
  }
  double sup_norm() const {
    double s = 0.0;
    for (const auto& v : values) s = std::max(s, v.cwiseAbs().maxCoeff());
    return s;
  }
  /// Exact d_t u where available, else (u_k - u_{k-1}) / (t_k - t_{k-1}) for k >= 1.
  Eigen::VectorXd time_derivative(std::size_t k) const {
    const auto n = static_cast<Eigen::Index>(region->interior_size());
    if (!dudt.empty()) return dudt[k];
    if (k == 0) throw PreconditionError("backward difference undefined at the first node");
    return (values[k] - values[k - 1]).head(n) / (times[k] - times[k - 1]);
  }
};

/// Stored grid of a solution; spectral solutions carry exact derivatives.
inline SpaceTimeGrid to_grid(const HeatSolution& sol, std::shared_ptr<const FiniteRegion> region,
                             const std::vector<double>& times) {
  SpaceTimeGrid g;
  g.region = std::move(region);
  g.times = times;
  for (double t : times) {
    g.values.push_back(sol.closure_at(t));
    if (sol.kind() == HeatSolution::Kind::spectral) g.dudt.push_back(sol.dudt_interior(t));
  }
  return g;
}

enum class WmpHypothesis { none, subsolution, boundary, initial };

inline const char* to_string(WmpHypothesis h) {
  switch (h) {
    case WmpHypothesis::none: return "none";
    case WmpHypothesis::subsolution: return "subsolution residual";
    case WmpHypothesis::boundary: return "boundary data";
    case WmpHypothesis::initial: return "initial data";
  }
  return "unknown";
}

struct ComparisonReport {
  double max_violation = 0.0;  // max(0, max of u over the interior at t > t_0), in data units
  std::optional<VertexId> location;
  double location_t = 0.0;
  std::size_t samples = 0;
  double tolerance = 0.0;  // absolute, = kWmpTolerance * data scale
  WmpHypothesis failed = WmpHypothesis::none;
  double hypothesis_excess = 0.0;
  std::optional<VertexId> hypothesis_location;
  std::vector<VertexId> plateau_path;  // argmax -> boundary through u ~ max, when one exists

  bool hypotheses_hold() const { return failed == WmpHypothesis::none; }
  bool conclusion_holds() const { return max_violation <= tolerance; }
};

/// Path from interior index `start` to a boundary vertex through vertices with u >= level - tol.
inline std::vector<VertexId> plateau_path(const FiniteRegion& region, const ClosureVector& u, std::size_t start,
                                          double level, double tol) {
  std::vector<std::size_t> parent(region.closure_size(), std::numeric_limits<std::size_t>::max());
  std::deque<std::size_t> queue{start};
  parent[start] = start;
  while (!queue.empty()) {
    const auto i = queue.front();
    queue.pop_front();
    if (!region.is_interior(i)) {
      std::vector<VertexId> path;
      for (auto k = i;; k = parent[k]) {
        path.push_back(region.vertex(k));
        if (k == start) break;
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (const auto& e : region.edges(i)) {
      if (parent[e.target] != std::numeric_limits<std::size_t>::max()) continue;
      if (u[static_cast<Eigen::Index>(e.target)] < level - tol) continue;
      parent[e.target] = i;
      queue.push_back(e.target);
    }
  }
  return {};
}

/// Checks the hypotheses L u <= 0, u <= 0 on the boundary layer and at the first time, then reports max u.
inline ComparisonReport verify_wmp(const SpaceTimeGrid& grid, const Eigen::VectorXd& rho) {
  grid.validate();
  const auto& region = *grid.region;
  const auto n = region.interior_size();
  if (static_cast<std::size_t>(rho.size()) != n) throw PreconditionError("rho must match the interior");
  const double scale = std::max(grid.sup_norm(), 1e-300);
  ComparisonReport rep;
  rep.tolerance = kWmpTolerance * scale;

  const auto fail = [&](WmpHypothesis h, double excess, const VertexId& at) {
    if (rep.failed == WmpHypothesis::none || excess > rep.hypothesis_excess) {
      rep.failed = h;
      rep.hypothesis_excess = excess;
      rep.hypothesis_location = at;
    }
  };
  // initial slice
  for (std::size_t i = 0; i < n; ++i) {
    const double v = grid.values[0][static_cast<Eigen::Index>(i)];
    if (v > rep.tolerance) fail(WmpHypothesis::initial, v, region.vertex(i));
  }
  // boundary layer at all times
  for (const auto& slice : grid.values)
    for (std::size_t k = n; k < region.closure_size(); ++k) {
      const double v = slice[static_cast<Eigen::Index>(k)];
      if (v > rep.tolerance) fail(WmpHypothesis::boundary, v, region.vertex(k));
    }
  // L u <= 0 and the conclusion
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_i = 0, best_k = 0;
  for (std::size_t k = 1; k < grid.times.size(); ++k) {
    const Eigen::VectorXd dudt = grid.time_derivative(k);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double lu = rho[ii] * dudt[ii] - laplacian(region, grid.values[k], i);
      // residual tolerance scales with the operator size at x
      const double op_scale = scale * (rho[ii] / (grid.times[k] - grid.times[k - 1]) + region.normalized_degree(i));
      if (lu > kWmpTolerance * op_scale) fail(WmpHypothesis::subsolution, lu, region.vertex(i));
      ++rep.samples;
      const double u = grid.values[k][ii];
      if (u > best) {
        best = u;
        best_i = i;
        best_k = k;
      }
    }
  }
  if (grid.times.size() == 1) {
    for (std::size_t i = 0; i < n; ++i)
      if (grid.values[0][static_cast<Eigen::Index>(i)] > best) best = grid.values[0][static_cast<Eigen::Index>(i)], best_i = i;
  }
  rep.max_violation = std::max(0.0, best);
  if (rep.max_violation > rep.tolerance) {
    rep.location = region.vertex(best_i);
    rep.location_t = grid.times[best_k];
    rep.plateau_path = plateau_path(region, grid.values[best_k], best_i, best, rep.tolerance);
  }
  return rep;
}

/// The same check for -u: min u >= -tol under L u >= 0, u >= 0 on the boundary and initially.
inline ComparisonReport verify_wmp_lower(const SpaceTimeGrid& grid, const Eigen::VectorXd& rho) {
  SpaceTimeGrid neg = grid;
  for (auto& v : neg.values) v = -v;
  for (auto& d : neg.dudt) d = -d;
  return verify_wmp(neg, rho);
}

struct PhragmenLindelofCase {
  double epsilon = 0.0;
  double radius = 0.0;
  bool boundary_ok = false;  // u <= eps Z on the sphere layer of B_R and at t = 0
  bool inside_ok = false;    // u <= eps Z inside B_R
  double margin = 0.0;       // min of eps Z - u inside
  std::optional<VertexId> argmin;
};

struct PhragmenLindelofReport {
  std::vector<PhragmenLindelofCase> cases;
  std::map<double, std::optional<double>> smallest_epsilon;  // per radius, among cases with boundary_ok
  bool consistent = true;  // every case with boundary_ok also has inside_ok
};

/// For each (eps, R): if u <= eps Z holds on the boundary layer of B_R and at t = 0, confirm it inside B_R.
/// `u` lives on a region containing every B_R; Z must come with a passing certificate.
inline PhragmenLindelofReport phragmen_lindelof_check(const SpaceTimeGrid& u, const BarrierSpec& z,
                                                      const ParabolicCertificate& certificate,
                                                      const std::vector<double>& radii,
                                                      const std::vector<double>& epsilons) {
  if (!certificate.pass) throw PreconditionError("barrier is not certified; refusing the comparison");
  u.validate();
  const auto& region = *u.region;
  const auto& g = region.graph();
  const double tol = kWmpTolerance * std::max(u.sup_norm(), 1.0);
  std::vector<double> rad(region.closure_size());
  for (std::size_t k = 0; k < region.closure_size(); ++k) rad[k] = barrier_radius(z, g, region.vertex(k));
  // log Z per slice
  std::vector<std::vector<double>> logz(u.times.size(), std::vector<double>(region.closure_size()));
  for (std::size_t s = 0; s < u.times.size(); ++s)
    for (std::size_t k = 0; k < region.closure_size(); ++k) logz[s][k] = z.log_value(g, region.vertex(k), u.times[s]);

  PhragmenLindelofReport rep;
  for (double R : radii) {
    rep.smallest_epsilon[R] = std::nullopt;
    // boundary layer of B_R: outside vertices adjacent to an inside interior vertex
    std::vector<char> inside(region.closure_size(), 0), layer(region.closure_size(), 0);
    for (std::size_t i = 0; i < region.interior_size(); ++i) inside[i] = rad[i] < R;
    for (std::size_t i = 0; i < region.interior_size(); ++i)
      if (inside[i])
        for (const auto& e : region.edges(i))
          if (!inside[e.target]) layer[e.target] = 1;
    for (double eps : epsilons) {
      PhragmenLindelofCase c;
      c.epsilon = eps;
      c.radius = R;
      c.boundary_ok = true;
      for (std::size_t s = 0; s < u.times.size(); ++s)
        for (std::size_t k = 0; k < region.closure_size(); ++k) {
          const bool check = layer[k] || (s == 0 && inside[k]);
          if (check && u.values[s][static_cast<Eigen::Index>(k)] > eps * std::exp(logz[s][k]) + tol)
            c.boundary_ok = false;
        }
      c.margin = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < u.times.size(); ++s)
        for (std::size_t i = 0; i < region.interior_size(); ++i) {
          if (!inside[i]) continue;
          const double m = eps * std::exp(logz[s][i]) - u.values[s][static_cast<Eigen::Index>(i)];
          if (m < c.margin) {
            c.margin = m;
            c.argmin = region.vertex(i);
          }
        }
      c.inside_ok = c.margin >= -tol;
      if (c.boundary_ok && !c.inside_ok) rep.consistent = false;
      if (c.boundary_ok && c.inside_ok) {
        auto& best = rep.smallest_epsilon[R];
        if (!best || eps < *best) best = eps;
      }
      rep.cases.push_back(c);
    }
  }
  return rep;
}

}  // namespace graphheat
