#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphheat/graph.hpp"

namespace graphheat {

/// Pointwise evaluation rule; throws MissingValueError where undefined.
using VertexFunction = std::function<double(const VertexId&)>;

/// Dense values over a region closure (interior first, then boundary).
using ClosureVector = Eigen::VectorXd;

/// View a dense closure vector as a vertex function.
inline VertexFunction as_function(const FiniteRegion& region, const ClosureVector& values) {
  if (static_cast<std::size_t>(values.size()) != region.closure_size())
    throw PreconditionError("dense function has " + std::to_string(values.size()) +
                            " values, region closure has " + std::to_string(region.closure_size()));
  return [&region, &values](const VertexId& x) {
    const auto i = region.index_of(x);
    if (!i) throw MissingValueError("no value at " + x.to_string() + " (outside the region closure)");
    return values[static_cast<Eigen::Index>(*i)];
  };
}

/// Sample a vertex function on the closure of a region.
inline ClosureVector sample(const FiniteRegion& region, const VertexFunction& f) {
  ClosureVector v(static_cast<Eigen::Index>(region.closure_size()));
  for (std::size_t i = 0; i < region.closure_size(); ++i) v[static_cast<Eigen::Index>(i)] = f(region.vertex(i));
  return v;
}

inline double gradient(const VertexFunction& f, const VertexId& x, const VertexId& y) { return f(y) - f(x); }

/// |grad(fg) - (f(x) grad g + grad f * g(y))| on the edge (x, y).
inline double product_rule_residual(const VertexFunction& f, const VertexFunction& g, const VertexId& x,
                                    const VertexId& y) {
  const double lhs = f(y) * g(y) - f(x) * g(x);
  const double rhs = f(x) * gradient(g, x, y) + gradient(f, x, y) * g(y);
  return std::abs(lhs - rhs);
}

/// Delta f(x) = (1/mu(x)) sum_y [f(y) - f(x)] w(x,y).
inline double laplacian(const WeightedGraph& g, const VertexFunction& f, const VertexId& x) {
  const double fx = f(x);
  double s = 0.0;
  for (const auto& nb : g.neighbors(x)) s += (f(nb.vertex) - fx) * nb.weight;
  return s / g.measure(x);
}

/// Delta_w f(x) = Delta f(x) / w(x).
inline double weighted_laplacian(const WeightedGraph& g, const VertexFunction& w, const VertexFunction& f,
                                 const VertexId& x) {
  const double wx = w(x);
  if (!(wx > 0.0)) throw DomainError("weight must be > 0 at " + x.to_string());
  return laplacian(g, f, x) / wx;
}

/// Laplacian at interior vertex i of a dense closure function.
inline double laplacian(const FiniteRegion& region, const ClosureVector& f, std::size_t i) {
  if (!region.is_interior(i))
    throw MissingValueError("Laplacian at boundary vertex " + region.vertex(i).to_string() +
                            " needs values beyond the region");
  const double fx = f[static_cast<Eigen::Index>(i)];
  double s = 0.0;
  for (const auto& e : region.edges(i)) s += (f[static_cast<Eigen::Index>(e.target)] - fx) * e.weight;
  return s / region.measure(i);
}

/// Laplacian at every interior vertex.
inline Eigen::VectorXd laplacian_interior(const FiniteRegion& region, const ClosureVector& f) {
  if (static_cast<std::size_t>(f.size()) != region.closure_size())
    throw PreconditionError("dense function does not match the region closure");
  Eigen::VectorXd out(static_cast<Eigen::Index>(region.interior_size()));
  for (std::size_t i = 0; i < region.interior_size(); ++i) out[static_cast<Eigen::Index>(i)] = laplacian(region, f, i);
  return out;
}

/// Delta f(m) = D+(m)[f(m+1) - f(m)] + D-(m)[f(m-1) - f(m)]; at m = 0 only the outer term.
inline double radial_laplacian(const RadialProfile& p, std::span<const double> f, std::size_t m) {
  if (m > p.max_shell() || m + 1 >= f.size())
    throw PreconditionError("radial Laplacian at shell " + std::to_string(m) + " out of range");
  double v = p.d_plus[m] * (f[m + 1] - f[m]);
  if (m > 0) v += p.d_minus[m] * (f[m - 1] - f[m]);
  return v;
}

struct IbpResidual {
  double residual = 0.0;
  double scale = 0.0;  // ||f|| ||g|| * total edge mass at the interior
};

/// |sum_x Delta f(x) g(x) mu(x) + (1/2) sum_{x,y} grad f grad g w(x,y)| over the closure,
/// for f supported in the interior.
inline IbpResidual check_integration_by_parts(const FiniteRegion& region, const ClosureVector& f,
                                              const ClosureVector& g) {
  const auto n = region.interior_size();
  if (static_cast<std::size_t>(f.size()) != region.closure_size() ||
      static_cast<std::size_t>(g.size()) != region.closure_size())
    throw PreconditionError("dense functions do not match the region closure");
  for (std::size_t k = n; k < region.closure_size(); ++k)
    if (f[static_cast<Eigen::Index>(k)] != 0.0)
      throw PreconditionError("f must vanish on the boundary layer, nonzero at " + region.vertex(k).to_string());

  // mu(x) Delta f(x) on the closure; at boundary vertices only interior neighbors carry f.
  std::vector<double> mu_lap(region.closure_size(), 0.0);
  double grad_sum = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = f[static_cast<Eigen::Index>(i)];
    const double gi = g[static_cast<Eigen::Index>(i)];
    for (const auto& e : region.edges(i)) {
      const double fj = f[static_cast<Eigen::Index>(e.target)];
      const double gj = g[static_cast<Eigen::Index>(e.target)];
      mu_lap[i] += (fj - fi) * e.weight;
      mass += e.weight;
      // Interior pairs appear twice (once from each side), boundary pairs once.
      const double both = region.is_interior(e.target) ? 0.5 : 1.0;
      grad_sum += both * (fj - fi) * (gj - gi) * e.weight;
      if (!region.is_interior(e.target)) mu_lap[e.target] += (fi - fj) * e.weight;
    }
  }
  double lhs = 0.0;
  for (std::size_t k = 0; k < region.closure_size(); ++k) lhs += mu_lap[k] * g[static_cast<Eigen::Index>(k)];
  IbpResidual r;
  r.residual = std::abs(lhs + grad_sum);
  r.scale = f.cwiseAbs().maxCoeff() * g.cwiseAbs().maxCoeff() * mass;
  return r;
}

struct NeighborSums {
  std::int64_t s1 = 0;  // sum_{y~x} (|y|^2 - |x|^2)
  std::int64_t s2 = 0;  // sum_{y~x} (|y|^2 - |x|^2)^2
};

/// Exact sums over the 2n lattice neighbors, by enumeration.
inline NeighborSums lattice_neighbor_sums(int n, const VertexId& x) {
  if (x.kind() != VertexKind::lattice || static_cast<int>(x.dim()) != n)
    throw PreconditionError("vertex " + x.to_string() + " is not in Z^" + std::to_string(n));
  const auto nx = squared_norm(x);
  NeighborSums s;
  for (int k = 0; k < n; ++k)
    for (int d : {-1, 1}) {
      const auto diff = squared_norm(x.shifted(static_cast<std::size_t>(k), d)) - nx;
      s.s1 += diff;
      s.s2 += diff * diff;
    }
  return s;
}

struct LaplacianBoundSample {
  VertexId vertex;
  double lhs = 0.0;  // |Delta u(x)| / rho(x)
  double rhs = 0.0;  // M max_{B_{r+2s}}(Deg/rho) 1_{B_{r+2s}}(x)
};

/// Pointwise bound for compactly supported u: |Delta u|/rho <= M max_{B_{r+2s}}(Deg/rho) on B_{r+2s}, 0 outside.
/// `u` lists the nonzero values; every support vertex must lie in B_r(o).
inline std::vector<LaplacianBoundSample> compact_support_laplacian_bound(
    const WeightedGraph& g, const VertexFunction& rho,
    const std::unordered_map<VertexId, double, VertexHash>& u, std::int64_t jump, const VertexId& o,
    std::int64_t r, std::span<const VertexId> samples, std::size_t budget = default_vertex_budget()) {
  if (r < 1 || jump < 1) throw PreconditionError("need r >= 1 and jump size >= 1");
  const std::int64_t outer = r + 2 * jump;
  LayeredBfs bfs(g, {o}, budget);
  bfs.advance_to(outer);
  double m_sup = 0.0;
  for (const auto& [v, val] : u) {
    const auto d = bfs.distance(v);
    if (!d || *d >= r) throw PreconditionError("support vertex " + v.to_string() + " lies outside B_r(o)");
    m_sup = std::max(m_sup, std::abs(val));
  }
  double deg_over_rho = 0.0;
  for (std::int64_t d = 0; d < outer && d < static_cast<std::int64_t>(bfs.layer_count()); ++d)
    for (const auto& x : bfs.layer(static_cast<std::size_t>(d)))
      deg_over_rho = std::max(deg_over_rho, g.normalized_degree(x) / rho(x));

  const auto uf = [&u](const VertexId& x) {
    const auto it = u.find(x);
    return it == u.end() ? 0.0 : it->second;
  };
  std::vector<LaplacianBoundSample> out;
  out.reserve(samples.size());
  for (const auto& x : samples) {
    LaplacianBoundSample s{x, std::abs(laplacian(g, uf, x)) / rho(x), 0.0};
    // the search already covers distance `outer`, so an unseen vertex lies beyond it
    const auto d = bfs.distance(x);
    if (d && *d < outer) s.rhs = m_sup * deg_over_rho;
    out.push_back(s);
  }
  return out;
}

/// max_x |Delta f(x) - radial Delta f(m(x))| / max(1, |radial value|) over shells 0..M-1,
/// for a shell function f given on shells 0..M.
inline double radial_full_agreement(const WeightedGraph& g, const std::vector<VertexId>& seed,
                                    const RadialProfile& p, std::span<const double> f,
                                    std::size_t budget = default_vertex_budget()) {
  if (f.size() != p.size()) throw PreconditionError("shell function length must match the profile");
  const auto max_m = static_cast<std::int64_t>(p.max_shell());
  LayeredBfs bfs(g, seed, budget);
  bfs.advance_to(max_m);
  const auto value = [&](const VertexId& y) {
    const auto d = bfs.distance(y);
    if (!d || *d > max_m) throw MissingValueError("shell function undefined at " + y.to_string());
    return f[static_cast<std::size_t>(*d)];
  };
  double worst = 0.0;
  for (std::int64_t m = 0; m < max_m; ++m) {
    const double radial = radial_laplacian(p, f, static_cast<std::size_t>(m));
    for (const auto& x : bfs.layer(static_cast<std::size_t>(m)))
      worst = std::max(worst, std::abs(laplacian(g, value, x) - radial) / std::max(1.0, std::abs(radial)));
  }
  return worst;
}

}  // namespace graphheat
