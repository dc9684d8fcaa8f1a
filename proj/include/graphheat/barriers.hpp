#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "graphheat/calculus.hpp"
#include "graphheat/density.hpp"
#include "graphheat/graph.hpp"

namespace graphheat {

/// Relative tolerance of every barrier certificate.
inline constexpr double kCertificateTolerance = 1e-12;

enum class BarrierFamily { thm34, thm35, lattice_sub2, lattice_crit, z2_loglog, antitree_linear, lifted, custom };

inline const char* to_string(BarrierFamily f) {
  switch (f) {
    case BarrierFamily::thm34: return "thm34";
    case BarrierFamily::thm35: return "thm35";
    case BarrierFamily::lattice_sub2: return "lattice_sub2";
    case BarrierFamily::lattice_crit: return "lattice_crit";
    case BarrierFamily::z2_loglog: return "z2_loglog";
    case BarrierFamily::antitree_linear: return "antitree_linear";
    case BarrierFamily::lifted: return "lifted";
    case BarrierFamily::custom: return "custom";
  }
  return "unknown";
}

using SpaceTimeRule = std::function<double(const WeightedGraph&, const VertexId&, double)>;

/// Space-time barrier Z > 0, carried as log Z and its closed-form time derivative.
struct BarrierSpec {
  BarrierFamily family = BarrierFamily::custom;
  std::map<std::string, double> params;
  Metric metric = Metric::combinatorial;
  SpaceTimeRule log_z;
  SpaceTimeRule dt_log_z;

  double log_value(const WeightedGraph& g, const VertexId& x, double t) const {
    const double v = log_z(g, x, t);
    if (!std::isfinite(v)) throw DomainError("log Z is not finite at " + x.to_string());
    return v;
  }
  /// Z itself; +inf once log Z exceeds the double range.
  double value(const WeightedGraph& g, const VertexId& x, double t) const { return std::exp(log_value(g, x, t)); }
  double dt_log_value(const WeightedGraph& g, const VertexId& x, double t) const { return dt_log_z(g, x, t); }
  double param(const std::string& key) const { return params.at(key); }
};

/// Static function Z(x) for elliptic inequalities.
struct StaticBarrier {
  BarrierFamily family = BarrierFamily::custom;
  std::map<std::string, double> params;
  std::function<double(const WeightedGraph&, const VertexId&)> value;

  ClosureVector on(const FiniteRegion& region) const {
    ClosureVector v(static_cast<Eigen::Index>(region.closure_size()));
    for (std::size_t i = 0; i < region.closure_size(); ++i)
      v[static_cast<Eigen::Index>(i)] = value(region.graph(), region.vertex(i));
    return v;
  }
};

namespace detail {

inline double combinatorial_r(const WeightedGraph& g, const VertexId& x) {
  return static_cast<double>(canonical_radius(g, x));
}
inline double lattice_s(const WeightedGraph&, const VertexId& x) {
  if (x.kind() != VertexKind::lattice) throw PreconditionError("lattice barrier evaluated off the lattice");
  return static_cast<double>(squared_norm(x));
}
inline void require_positive(const char* what, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError(std::string(what) + " must be > 0");
}

}  // namespace detail

/// Distance used for core/far splitting: r for combinatorial barriers, |x| for euclidean ones.
inline double barrier_radius(const BarrierSpec& z, const WeightedGraph& g, const VertexId& x) {
  return z.metric == Metric::euclidean ? euclidean_norm(x) : detail::combinatorial_r(g, x);
}

/// (e^{2A} - 1) / (rho0 A).
inline double thm34_threshold(double A, double rho0) {
  detail::require_positive("A", A);
  detail::require_positive("rho0", rho0);
  return std::expm1(2.0 * A) / (rho0 * A);
}

/// Z = exp(A (1 + Q t) (r + 1)).
inline BarrierSpec barrier_thm34(double A, double Q) {
  detail::require_positive("A", A);
  detail::require_positive("Q", Q);
  BarrierSpec z;
  z.family = BarrierFamily::thm34;
  z.params = {{"A", A}, {"Q", Q}};
  z.log_z = [A, Q](const WeightedGraph& g, const VertexId& x, double t) {
    return A * (1.0 + Q * t) * (detail::combinatorial_r(g, x) + 1.0);
  };
  z.dt_log_z = [A, Q](const WeightedGraph& g, const VertexId& x, double) {
    return A * Q * (detail::combinatorial_r(g, x) + 1.0);
  };
  return z;
}

/// Z = exp(A (1 + Q t) (r + 1) log^beta(r + offset)); offset 1 is the original family,
/// offset 2 shifts the logarithm so Z grows in time on the seed set as well.
inline BarrierSpec barrier_thm35(double A, double Q, double beta, double rho0, double log_offset = 1.0) {
  detail::require_positive("A", A);
  detail::require_positive("Q", Q);
  detail::require_positive("rho0", rho0);
  if (!(beta > 0.0 && beta <= 1.0)) throw PreconditionError("beta must lie in (0, 1]");
  if (A > rho0 / 2.0) throw PreconditionError("A must satisfy A <= rho0/2");
  if (!(log_offset >= 1.0)) throw PreconditionError("log offset must be >= 1");
  BarrierSpec z;
  z.family = BarrierFamily::thm35;
  z.params = {{"A", A}, {"Q", Q}, {"beta", beta}, {"rho0", rho0}, {"log_offset", log_offset}};
  const auto spatial = [beta, log_offset](double r) { return (r + 1.0) * std::pow(std::log(r + log_offset), beta); };
  z.log_z = [A, Q, spatial](const WeightedGraph& g, const VertexId& x, double t) {
    return A * (1.0 + Q * t) * spatial(detail::combinatorial_r(g, x));
  };
  z.dt_log_z = [A, Q, spatial](const WeightedGraph& g, const VertexId& x, double) {
    return A * Q * spatial(detail::combinatorial_r(g, x));
  };
  return z;
}

/// beta_auto = min(1/2, 1 - alpha/2) for alpha < 2.
inline double lattice_beta_bound(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 2.0)) throw PreconditionError("alpha must lie in [0, 2]");
  return std::min(0.5, 1.0 - alpha / 2.0);
}

/// alpha < 2: Z = exp(A (1 + Q t) (1 + |x|^2)^beta); alpha = 2: Z = exp(A (1 + Q t) log^2(2 + |x|^2)).
inline BarrierSpec barrier_lattice(double alpha, double A, double Q, std::optional<double> beta = std::nullopt) {
  detail::require_positive("A", A);
  detail::require_positive("Q", Q);
  const double bound = lattice_beta_bound(alpha);
  BarrierSpec z;
  z.metric = Metric::euclidean;
  if (alpha < 2.0) {
    const double b = beta.value_or(bound);
    if (!(b > 0.0 && b <= bound)) throw PreconditionError("beta must lie in (0, min{1/2, 1 - alpha/2}]");
    z.family = BarrierFamily::lattice_sub2;
    z.params = {{"alpha", alpha}, {"A", A}, {"Q", Q}, {"beta", b}};
    z.log_z = [A, Q, b](const WeightedGraph& g, const VertexId& x, double t) {
      return A * (1.0 + Q * t) * std::pow(1.0 + detail::lattice_s(g, x), b);
    };
    z.dt_log_z = [A, Q, b](const WeightedGraph& g, const VertexId& x, double) {
      return A * Q * std::pow(1.0 + detail::lattice_s(g, x), b);
    };
  } else {
    if (beta) throw PreconditionError("the alpha = 2 family has no beta parameter");
    z.family = BarrierFamily::lattice_crit;
    z.params = {{"alpha", alpha}, {"A", A}, {"Q", Q}};
    z.log_z = [A, Q](const WeightedGraph& g, const VertexId& x, double t) {
      const double l = std::log(2.0 + detail::lattice_s(g, x));
      return A * (1.0 + Q * t) * l * l;
    };
    z.dt_log_z = [A, Q](const WeightedGraph& g, const VertexId& x, double) {
      const double l = std::log(2.0 + detail::lattice_s(g, x));
      return A * Q * l * l;
    };
  }
  return z;
}

// ---------------------------------------------------------------------------
// Z^2 log-log barrier

/// loglog(|x|^2 + 4).
inline double loglog_profile(const VertexId& x) {
  return std::log(std::log(static_cast<double>(squared_norm(x)) + 4.0));
}

/// Delta loglog(|x|^2 + 4) on Z^2, with neighbor differences formed in log1p form.
inline double loglog_laplacian(const VertexId& x) {
  if (x.kind() != VertexKind::lattice || x.dim() != 2) throw PreconditionError("log-log barrier lives on Z^2");
  const double a = static_cast<double>(squared_norm(x)) + 4.0;
  const double la = std::log(a);
  double s = 0.0;
  for (std::size_t k = 0; k < 2; ++k)
    for (int d : {-1, 1}) {
      const double b = static_cast<double>(squared_norm(x.shifted(k, d))) + 4.0;
      const double dl = std::log1p((b - a) / a);  // log b - log a
      s += std::log1p(dl / la);                   // loglog b - loglog a
    }
  return s / 4.0;
}

inline StaticBarrier barrier_z2_static(double K) {
  detail::require_positive("K", K);
  StaticBarrier z;
  z.family = BarrierFamily::z2_loglog;
  z.params = {{"K", K}};
  z.value = [K](const WeightedGraph& g, const VertexId& x) {
    if (g.family().kind != FamilyTag::Kind::lattice || g.family().dimension != 2)
      throw PreconditionError("log-log barrier needs Z^2");
    return K * loglog_profile(x);
  };
  return z;
}

struct Z2AutoK {
  double R0 = 0.0;            // Delta loglog < 0 on scanned |x| >= R0
  double K = 0.0;
  double max_abs_laplacian = 0.0;  // over B_R0
  double min_rho = 0.0;            // over B_R0
};

/// K = min_{B_R0} rho / max_{B_R0} |Delta loglog|, with R0 past the last scanned point where Delta loglog >= 0.
inline Z2AutoK auto_k_z2(const WeightedGraph& g, const DensitySpec& rho, std::int64_t scan = 64) {
  if (g.family().kind != FamilyTag::Kind::lattice || g.family().dimension != 2)
    throw PreconditionError("log-log barrier needs Z^2");
  Z2AutoK out;
  double last_nonneg = -1.0;
  for (std::int64_t a = -scan; a <= scan; ++a)
    for (std::int64_t b = -scan; b <= scan; ++b) {
      const auto x = VertexId::lattice({a, b});
      if (loglog_laplacian(x) >= 0.0) last_nonneg = std::max(last_nonneg, euclidean_norm(x));
    }
  if (last_nonneg + 1.0 >= static_cast<double>(scan))
    throw ConvergenceError("log-log Laplacian stays nonnegative up to the scan radius");
  out.R0 = std::floor(last_nonneg) + 1.0;
  const auto ball = materialize_ball(g, {VertexId::lattice({0, 0})}, out.R0, Metric::euclidean);
  out.min_rho = std::numeric_limits<double>::infinity();
  for (const auto& x : ball.interior()) {
    out.max_abs_laplacian = std::max(out.max_abs_laplacian, std::abs(loglog_laplacian(x)));
    out.min_rho = std::min(out.min_rho, rho(g, x));
  }
  out.K = out.min_rho / out.max_abs_laplacian;
  return out;
}

// ---------------------------------------------------------------------------
// Anti-tree linear barrier

inline StaticBarrier barrier_antitree(const WeightedGraph& g, double K) {
  detail::require_positive("K", K);
  if (g.family().kind != FamilyTag::Kind::antitree)
    throw PreconditionError("linear barrier requires an anti-tree, got " + g.family().describe());
  StaticBarrier z;
  z.family = BarrierFamily::antitree_linear;
  z.params = {{"K", K}, {"convention", g.family().convention == AntitreeConvention::A ? 0.0 : 1.0}};
  z.value = [K](const WeightedGraph& gr, const VertexId& x) {
    return K * detail::combinatorial_r(gr, x) + 1.0;
  };
  return z;
}

/// Delta(K r + 1) per shell: K D+(0) at the root, K [D+(m) - D-(m)] for m >= 1.
inline std::vector<double> antitree_shell_laplacian(const RadialProfile& p, double K) {
  std::vector<double> out(p.size());
  for (std::size_t m = 0; m < p.size(); ++m) out[m] = K * (p.d_plus[m] - (m == 0 ? 0.0 : p.d_minus[m]));
  return out;
}

// ---------------------------------------------------------------------------
// Certificates

struct CertificateSection {
  bool pass = true;
  double min_value = std::numeric_limits<double>::infinity();  // normalized residual
  std::optional<VertexId> argmin;
  double argmin_t = 0.0;
  double argmin_radius = 0.0;
  double argmin_log_z = 0.0;
  std::size_t samples = 0;
};

/// rho d_t Z - Delta Z >= 0, evaluated as Z [rho d_t log Z - sum (w/mu)(e^{log Z(y) - log Z(x)} - 1)].
/// Core = interior vertices with barrier radius < core_radius.
struct ParabolicCertificate {
  bool pass = false;
  CertificateSection core;
  CertificateSection far;
  double tolerance = kCertificateTolerance;
  double t_begin = 0.0;
  double t_end = 0.0;
};

inline ParabolicCertificate certify_parabolic(const BarrierSpec& z, const DensitySpec& rho, const FiniteRegion& region,
                                              const std::vector<double>& times, double core_radius = 1.0) {
  if (times.empty()) throw PreconditionError("certificate needs at least one time node");
  const auto& g = region.graph();
  ParabolicCertificate cert;
  cert.t_begin = times.front();
  cert.t_end = times.back();
  std::vector<double> logz(region.closure_size());
  std::vector<double> radius(region.interior_size()), rho_i(region.interior_size());
  for (std::size_t i = 0; i < region.interior_size(); ++i) {
    radius[i] = barrier_radius(z, g, region.vertex(i));
    rho_i[i] = rho(g, region.vertex(i));
  }
  for (double t : times) {
    for (std::size_t k = 0; k < region.closure_size(); ++k) logz[k] = z.log_value(g, region.vertex(k), t);
    for (std::size_t i = 0; i < region.interior_size(); ++i) {
      const double dt = z.dt_log_value(g, region.vertex(i), t);
      double lap = 0.0, scale = rho_i[i] * std::abs(dt);
      for (const auto& e : region.edges(i)) {
        const double ratio = std::exp(logz[e.target] - logz[i]);
        lap += e.weight * (ratio - 1.0);
        scale += e.weight * (ratio + 1.0) / region.measure(i);
      }
      lap /= region.measure(i);
      const double q = rho_i[i] * dt - lap;
      auto& sec = radius[i] < core_radius ? cert.core : cert.far;
      ++sec.samples;
      if (q < -kCertificateTolerance * scale) sec.pass = false;
      if (q < sec.min_value) {
        sec.min_value = q;
        sec.argmin = region.vertex(i);
        sec.argmin_t = t;
        sec.argmin_radius = radius[i];
        sec.argmin_log_z = logz[i];
      }
    }
  }
  cert.pass = cert.core.pass && cert.far.pass;
  return cert;
}

struct QSearchStep {
  double Q;
  bool far_pass;
  bool core_pass;
};

struct QSearchResult {
  std::optional<double> q_far;   // first grid Q whose far field certifies
  std::optional<double> q_full;  // first grid Q certifying core and far field
  std::vector<QSearchStep> trace;
  ParabolicCertificate certificate;  // at q_full, or at the last tried Q
};

/// Geometric scan Q = q_start * factor^k (<= cap) over t in [0, 1/Q]; after the far field passes,
/// Q keeps growing until the core certifies too.
inline QSearchResult search_q(const std::function<BarrierSpec(double)>& make, const DensitySpec& rho,
                              const FiniteRegion& region, double q_start, double core_radius = 1.0,
                              std::size_t time_nodes = 9, double factor = 2.0, double cap = 1e6) {
  detail::require_positive("q_start", q_start);
  if (!(factor > 1.0)) throw PreconditionError("search factor must be > 1");
  QSearchResult res;
  for (double Q = q_start; Q <= cap * (1.0 + 1e-12); Q *= factor) {
    std::vector<double> times(time_nodes);
    for (std::size_t k = 0; k < time_nodes; ++k)
      times[k] = (1.0 / Q) * static_cast<double>(k) / static_cast<double>(time_nodes - 1);
    auto cert = certify_parabolic(make(Q), rho, region, times, core_radius);
    res.trace.push_back({Q, cert.far.pass, cert.core.pass});
    if (cert.far.pass && !res.q_far) res.q_far = Q;
    res.certificate = cert;
    if (cert.pass) {
      res.q_full = Q;
      break;
    }
  }
  return res;
}

/// Uniform nodes on [0, 1/Q].
inline std::vector<double> barrier_time_grid(double Q, std::size_t nodes = 9) {
  std::vector<double> t(nodes);
  for (std::size_t k = 0; k < nodes; ++k) t[k] = (1.0 / Q) * static_cast<double>(k) / static_cast<double>(nodes - 1);
  return t;
}

enum class EllipticDirection { below_rho, below_minus_rho };  // Delta Z <= rho  |  Delta h <= -rho

struct EllipticCertificate {
  bool pass = true;
  double max_value = -std::numeric_limits<double>::infinity();  // max of (Delta Z - rho) or (Delta h + rho)
  std::optional<VertexId> argmax;
  std::size_t checked = 0;
  double tolerance = kCertificateTolerance;
};

/// `values` over the region closure, `rho` over the interior; interior indices with skip(i) are excluded.
inline EllipticCertificate certify_elliptic(const FiniteRegion& region, const ClosureVector& values,
                                            const Eigen::VectorXd& rho, EllipticDirection dir,
                                            const std::function<bool(std::size_t)>& skip = {}) {
  if (static_cast<std::size_t>(rho.size()) != region.interior_size())
    throw PreconditionError("rho must have one value per interior vertex");
  EllipticCertificate cert;
  for (std::size_t i = 0; i < region.interior_size(); ++i) {
    if (skip && skip(i)) continue;
    const double lap = laplacian(region, values, i);
    const double r = rho[static_cast<Eigen::Index>(i)];
    const double v = dir == EllipticDirection::below_rho ? lap - r : lap + r;
    double scale = r;
    for (const auto& e : region.edges(i))
      scale += e.weight * (std::abs(values[static_cast<Eigen::Index>(e.target)]) +
                           std::abs(values[static_cast<Eigen::Index>(i)])) /
               region.measure(i);
    ++cert.checked;
    if (v > kCertificateTolerance * scale) cert.pass = false;
    if (v > cert.max_value) {
      cert.max_value = v;
      cert.argmax = region.vertex(i);
    }
  }
  return cert;
}

/// e^{gamma t} Z0(x); needs Delta Z0 <= rho certified on the region and gamma > 1/inf Z0.
inline BarrierSpec lift_static(const StaticBarrier& z0, double gamma, const FiniteRegion& region,
                               const EllipticCertificate& cert) {
  if (!cert.pass) throw PreconditionError("static barrier is not certified (Delta Z <= rho fails)");
  double c0 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < region.closure_size(); ++k)
    c0 = std::min(c0, z0.value(region.graph(), region.vertex(k)));
  if (!(c0 > 0.0)) throw PreconditionError("static barrier must be bounded below by c0 > 0");
  if (!(gamma > 1.0 / c0))
    throw PreconditionError("gamma = " + std::to_string(gamma) + " must exceed 1/c0 = " + std::to_string(1.0 / c0));
  BarrierSpec z;
  z.family = BarrierFamily::lifted;
  z.params = z0.params;
  z.params["gamma"] = gamma;
  z.params["c0"] = c0;
  auto value = z0.value;
  z.log_z = [value, gamma](const WeightedGraph& g, const VertexId& x, double t) {
    return gamma * t + std::log(value(g, x));
  };
  z.dt_log_z = [gamma](const WeightedGraph&, const VertexId&, double) { return gamma; };
  return z;
}

// ---------------------------------------------------------------------------
// Barriers h with Delta h <= -rho

/// Raised when sum S(k)/W(k) does not converge.
class NonSummableError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

struct RadialH {
  std::vector<double> h;          // shells 0..M
  std::vector<double> increments;  // a_k = S(k)/W(k), k = 0..M
  double tail = 0.0;              // estimate of sum_{k >= M} a_k, equal to h(M)
  double raabe = 0.0;             // k (a_k / a_{k+1} - 1) averaged over the last shells
  double max_residual = 0.0;      // max_{0 <= m <= M-1} |radial Delta h(m) + rho(m)|
  bool tail_ok = false;           // h(M) <= tail tolerance
  double tail_tolerance = 0.0;
};

/// h(m) = sum_{k >= m} S(k)/W(k) with W(k) = D+(k)|S_k| and S(k) = sum_{i <= k} |S_i| rho(i),
/// summed exactly to shell M - 1 (M = profile.max_shell()) with a Raabe-test tail estimate.
inline RadialH construct_radial_h(const RadialProfile& p, const std::vector<double>& rho, double tail_tolerance) {
  const std::size_t M = p.max_shell();
  if (M < 4) throw PreconditionError("radial h needs at least 5 shells");
  if (rho.size() < M + 1) throw PreconditionError("radial density shorter than the profile");
  RadialH out;
  out.tail_tolerance = tail_tolerance;
  double S = 0.0;
  for (std::size_t k = 0; k <= M; ++k) {
    if (!(rho[k] > 0.0)) throw DomainError("radial density must be > 0");
    S += p.shell_measure[k] * rho[k];
    const double W = p.edge_mass(k);
    if (!(W > 0.0)) throw PreconditionError("shell " + std::to_string(k) + " has no outward edges");
    out.increments.push_back(S / W);
  }
  const auto& a = out.increments;
  double raabe = 0.0;
  constexpr std::size_t kWindow = 3;
  for (std::size_t k = M - kWindow; k < M; ++k)
    raabe += static_cast<double>(k) * (a[k] / a[k + 1] - 1.0);
  raabe /= static_cast<double>(kWindow);
  out.raabe = raabe;
  if (!(raabe > 1.0))
    throw NonSummableError("sum of S(k)/W(k) diverges (Raabe index " + std::to_string(raabe) +
                           " <= 1): no positive h with Delta h = -rho decays to 0");
  out.tail = a[M] * (1.0 + static_cast<double>(M) / (raabe - 1.0));
  out.h.assign(M + 1, 0.0);
  out.h[M] = out.tail;
  for (std::size_t m = M; m-- > 0;) out.h[m] = out.h[m + 1] + a[m];
  for (std::size_t m = 0; m < M; ++m)
    out.max_residual = std::max(out.max_residual, std::abs(radial_laplacian(p, out.h, m) + rho[m]));
  out.tail_ok = out.h[M] <= tail_tolerance;
  return out;
}

/// Solve Delta h = -rho on the interior with h = 0 on the boundary layer.
inline ClosureVector construct_ball_h(const FiniteRegion& region, const Eigen::VectorXd& rho) {
  const auto n = static_cast<Eigen::Index>(region.interior_size());
  if (rho.size() != n) throw PreconditionError("rho must have one value per interior vertex");
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < region.interior_size(); ++i) {
    const auto ii = static_cast<int>(i);
    if (!(rho[ii] > 0.0)) throw DomainError("rho must be > 0 at " + region.vertex(i).to_string());
    trip.emplace_back(ii, ii, region.degree(i));
    for (const auto& e : region.edges(i))
      if (region.is_interior(e.target)) trip.emplace_back(ii, static_cast<int>(e.target), -e.weight);
    rhs[ii] = region.measure(i) * rho[ii];
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw ConvergenceError("Poisson system is singular");
  ClosureVector h = ClosureVector::Zero(static_cast<Eigen::Index>(region.closure_size()));
  h.head(n) = ldlt.solve(rhs);
  return h;
}

/// Max of `values` per integer distance bin floor(radius(x)) over the interior.
inline std::map<std::int64_t, double> radial_maxima(const FiniteRegion& region, const ClosureVector& values,
                                                    const std::function<double(const VertexId&)>& radius) {
  std::map<std::int64_t, double> out;
  for (std::size_t i = 0; i < region.interior_size(); ++i) {
    const auto bin = static_cast<std::int64_t>(std::floor(radius(region.vertex(i)) + 1e-12));
    const double v = values[static_cast<Eigen::Index>(i)];
    auto [it, inserted] = out.emplace(bin, v);
    if (!inserted) it->second = std::max(it->second, v);
  }
  return out;
}

}  // namespace graphheat
