#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "graphheat/calculus.hpp"
#include "graphheat/spectral.hpp"

namespace graphheat {

/// v(x) exp(rate (t - t1)); rate 0 is the constant-in-time class.
struct ExpTerm {
  Eigen::VectorXd spatial;
  double rate = 0.0;
};

/// Time-dependent vertex data: a sum of exponential terms plus an optional generic part.
struct TimeSeriesData {
  std::vector<ExpTerm> terms;
  std::function<Eigen::VectorXd(double)> generic;  // absolute time -> values

  static TimeSeriesData constant(Eigen::VectorXd v) { return TimeSeriesData{{ExpTerm{std::move(v), 0.0}}, {}}; }
  static TimeSeriesData exponential(Eigen::VectorXd v, double rate) {
    return TimeSeriesData{{ExpTerm{std::move(v), rate}}, {}};
  }

  bool empty() const { return terms.empty() && !generic; }

  Eigen::VectorXd at(double t, double t1, Eigen::Index size) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size);
    for (const auto& term : terms) {
      if (term.spatial.size() != size) throw PreconditionError("time term has the wrong length");
      out += term.spatial * (term.rate == 0.0 ? 1.0 : std::exp(term.rate * (t - t1)));
    }
    if (generic) {
      Eigen::VectorXd g = generic(t);
      if (g.size() != size) throw MissingValueError("generic data has the wrong length at t=" + std::to_string(t));
      out += g;
    }
    return out;
  }
};

/// rho d_t u - Delta u = f in Omega x (t1, t2], u = g on the boundary layer, u(t1) = u0.
struct HeatProblem {
  std::shared_ptr<const FiniteRegion> region;
  Eigen::VectorXd rho;      // interior
  Eigen::VectorXd u0;       // interior
  TimeSeriesData source;    // interior
  TimeSeriesData boundary;  // boundary layer
  double t1 = 0.0;
  double t2 = 1.0;

  Eigen::Index n() const { return static_cast<Eigen::Index>(region->interior_size()); }
  Eigen::Index b() const { return static_cast<Eigen::Index>(region->boundary_size()); }

  void validate() const {
    if (!region) throw PreconditionError("problem has no region");
    if (rho.size() != n() || u0.size() != n())
      throw PreconditionError("rho and u0 need one value per interior vertex");
    for (Eigen::Index i = 0; i < n(); ++i)
      if (!(rho[i] > 0.0)) throw DomainError("rho must be > 0 at " + region->vertex(static_cast<std::size_t>(i)).to_string());
    if (!(t1 < t2)) throw PreconditionError("time interval needs t1 < t2");
    (void)boundary.at(t1, t1, b());  // g must be defined at t1
  }
  Eigen::VectorXd f(double t) const { return source.at(t, t1, n()); }
  Eigen::VectorXd g(double t) const { return boundary.at(t, t1, b()); }
};

namespace detail {

/// Coupling (1/mu(x)) w(x, y) from interior x to boundary y, as an n x b matrix.
inline Eigen::SparseMatrix<double> boundary_coupling(const FiniteRegion& region) {
  const auto n = region.interior_size();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : region.edges(i))
      if (!region.is_interior(e.target))
        trip.emplace_back(static_cast<int>(i), static_cast<int>(e.target - n), e.weight / region.measure(i));
  Eigen::SparseMatrix<double> c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(region.boundary_size()));
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

}  // namespace detail

/// Equivalent problem with zero boundary data and source f + (1/mu) sum_{y outside} g(y) w(x, y).
inline HeatProblem reduce_boundary(const HeatProblem& p) {
  p.validate();
  HeatProblem q = p;
  q.boundary = TimeSeriesData{};
  if (p.boundary.empty()) return q;
  const auto c = detail::boundary_coupling(*p.region);
  for (const auto& term : p.boundary.terms) q.source.terms.push_back(ExpTerm{c * term.spatial, term.rate});
  if (p.boundary.generic) {
    auto prev = p.source.generic;
    auto gen = p.boundary.generic;
    const auto n = p.n();
    q.source.generic = [prev, gen, c, n](double t) {
      Eigen::VectorXd v = c * gen(t);
      if (prev) v += prev(t);
      if (v.size() != n) throw MissingValueError("generic data has the wrong length");
      return v;
    };
  }
  return q;
}

/// Solution on region closure x time, either as eigen-modes or as stored grid slices.
class HeatSolution {
 public:
  enum class Kind { spectral, grid };

  Kind kind() const { return kind_; }
  const FiniteRegion& region() const { return *problem_.region; }
  const HeatProblem& problem() const { return problem_; }
  double t1() const { return problem_.t1; }
  double t2() const { return problem_.t2; }
  /// Stored nodes (grid) or the default output grid (spectral).
  const std::vector<double>& times() const { return times_; }

  Eigen::VectorXd interior_at(double t) const {
    check_time(t);
    if (kind_ == Kind::grid) return values_[node(t)].head(problem_.n());
    if (t == problem_.t1) return problem_.u0;
    return basis_->reconstruct(modes_at(t));
  }
  ClosureVector closure_at(double t) const {
    if (kind_ == Kind::grid) {
      check_time(t);
      return values_[node(t)];
    }
    ClosureVector v(static_cast<Eigen::Index>(region().closure_size()));
    v.head(problem_.n()) = interior_at(t);
    v.tail(problem_.b()) = problem_.g(t);
    return v;
  }
  /// d_t u on the interior: exact for spectral, central difference (one-sided at the ends) for grid.
  Eigen::VectorXd dudt_interior(double t) const {
    check_time(t);
    if (kind_ == Kind::spectral) {
      const Eigen::VectorXd v = modes_at(t);
      const Eigen::VectorXd fhat = forcing_modes(t);
      return basis_->reconstruct(fhat - basis_->eigenvalues().cwiseProduct(v));
    }
    const auto k = node(t);
    const auto lo = k == 0 ? k : k - 1;
    const auto hi = k + 1 == times_.size() ? k : k + 1;
    if (lo == hi) throw PreconditionError("grid solution has a single node");
    return (values_[hi] - values_[lo]).head(problem_.n()) / (times_[hi] - times_[lo]);
  }
  double value(const VertexId& x, double t) const {
    const auto i = region().index_of(x);
    if (!i) throw MissingValueError("vertex " + x.to_string() + " outside the solution region");
    return closure_at(t)[static_cast<Eigen::Index>(*i)];
  }
  const SpectralBasis& basis() const {
    if (!basis_) throw PreconditionError("grid solutions carry no spectral basis");
    return *basis_;
  }

 private:
  friend HeatSolution solve_spectral(const HeatProblem&, std::shared_ptr<const SpectralBasis>,
                                     std::vector<double>);
  friend HeatSolution solve_backward_euler(const HeatProblem&, double, std::size_t);

  void check_time(double t) const {
    if (!(t >= problem_.t1 && t <= problem_.t2))
      throw PreconditionError("time " + std::to_string(t) + " outside the solution interval");
  }
  std::size_t node(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end() || *it != t) {
      // accept roundoff-level mismatches against stored nodes
      const auto k = static_cast<std::size_t>(std::min<double>(
          std::max(0.0, std::round((t - problem_.t1) / stored_dt_)), static_cast<double>(times_.size() - 1)));
      if (std::abs(times_[k] - t) > 1e-9 * std::max(1.0, std::abs(t)))
        throw PreconditionError("time " + std::to_string(t) + " is not a stored grid node");
      return k;
    }
    return static_cast<std::size_t>(it - times_.begin());
  }

  /// Integral of exp(-lambda (t - s)) exp(r (s - t1)) over (t1, t), evaluated without overflow.
  static double mode_integral(double lambda, double r, double tau) {
    const double x = lambda + r;
    if (std::abs(x * tau) < 1e-8) return tau * std::exp(-lambda * tau) * (1.0 + 0.5 * x * tau);
    if (std::abs(x * tau) < 1.0) return std::exp(-lambda * tau) * std::expm1(x * tau) / x;
    return (std::exp(r * tau) - std::exp(-lambda * tau)) / x;
  }

  Eigen::VectorXd modes_at(double t) const {
    const double tau = t - problem_.t1;
    const auto& lambda = basis_->eigenvalues();
    Eigen::VectorXd v = (-lambda * tau).array().exp().matrix().cwiseProduct(u0_hat_);
    for (std::size_t k = 0; k < rates_.size(); ++k)
      for (Eigen::Index j = 0; j < v.size(); ++j)
        v[j] += term_hat_(j, static_cast<Eigen::Index>(k)) * mode_integral(lambda[j], rates_[k], tau);
    if (generic_) v += generic_integral(t);
    return v;
  }

  /// Mode coefficients of f~/rho at time t.
  Eigen::VectorXd forcing_modes(double t) const {
    Eigen::VectorXd fh = Eigen::VectorXd::Zero(u0_hat_.size());
    for (std::size_t k = 0; k < rates_.size(); ++k)
      fh += term_hat_.col(static_cast<Eigen::Index>(k)) * std::exp(rates_[k] * (t - problem_.t1));
    if (generic_) fh += project_generic(t);
    return fh;
  }
  Eigen::VectorXd project_generic(double s) const {
    const Eigen::VectorXd f = generic_(s);
    return basis_->eigenvectors().transpose() * f.cwiseProduct(measure_);
  }

  /// Adaptive Simpson on the vector of mode integrals, relative tolerance 1e-10 in max norm.
  Eigen::VectorXd generic_integral(double t) const {
    const auto& lambda = basis_->eigenvalues();
    const auto F = [&](double s) -> Eigen::VectorXd {
      return (-lambda * (t - s)).array().exp().matrix().cwiseProduct(project_generic(s));
    };
    const double a = problem_.t1;
    if (t <= a) return Eigen::VectorXd::Zero(lambda.size());
    const Eigen::VectorXd fa = F(a), fb = F(t), fm = F(0.5 * (a + t));
    const Eigen::VectorXd whole = (t - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double scale = std::max({fa.cwiseAbs().maxCoeff(), fm.cwiseAbs().maxCoeff(), fb.cwiseAbs().maxCoeff(),
                                   std::numeric_limits<double>::min()}) *
                         (t - a);
    return simpson(F, a, t, fa, fm, fb, whole, 1e-10 * scale, 0);
  }
  template <class Fn>
  static Eigen::VectorXd simpson(const Fn& F, double a, double b, const Eigen::VectorXd& fa, const Eigen::VectorXd& fm,
                                 const Eigen::VectorXd& fb, const Eigen::VectorXd& whole, double tol, int depth) {
    constexpr int kMaxDepth = 40;
    const double m = 0.5 * (a + b);
    const Eigen::VectorXd flm = F(0.5 * (a + m)), frm = F(0.5 * (m + b));
    const Eigen::VectorXd left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const Eigen::VectorXd right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = (left + right - whole).cwiseAbs().maxCoeff();
    if (err <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    if (depth >= kMaxDepth)
      throw ConvergenceError("adaptive Simpson did not reach tolerance on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]");
    return simpson(F, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           simpson(F, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }

  Kind kind_ = Kind::grid;
  HeatProblem problem_;
  std::vector<double> times_;
  double stored_dt_ = 1.0;
  // spectral
  std::shared_ptr<const SpectralBasis> basis_;
  Eigen::VectorXd u0_hat_;
  Eigen::MatrixXd term_hat_;
  std::vector<double> rates_;
  std::function<Eigen::VectorXd(double)> generic_;  // f~ generic part on the interior
  Eigen::VectorXd measure_;                         // mu on the interior
  // grid
  std::vector<ClosureVector> values_;
};

/// Mode-wise exact solution of the reduced system u'_j + lambda_j u_j = f_j.
/// `basis` may be shared across solves on the same region and rho; `output_times`
/// defaults to t1 and t2.
inline HeatSolution solve_spectral(const HeatProblem& problem, std::shared_ptr<const SpectralBasis> basis = nullptr,
                                   std::vector<double> output_times = {}) {
  problem.validate();
  if (!basis) basis = std::make_shared<const SpectralBasis>(dirichlet_spectrum(problem.region, problem.rho));
  if (&basis->region() != problem.region.get() && basis->region_ptr() != problem.region)
    throw PreconditionError("spectral basis belongs to a different region");
  const HeatProblem reduced = reduce_boundary(problem);

  HeatSolution s;
  s.kind_ = HeatSolution::Kind::spectral;
  s.problem_ = problem;
  s.basis_ = basis;
  s.measure_.resize(problem.n());
  for (Eigen::Index i = 0; i < problem.n(); ++i) s.measure_[i] = problem.region->measure(static_cast<std::size_t>(i));
  s.u0_hat_ = basis->coefficients(problem.u0);
  // <f~/rho, phi_j> under mu-hat = sum f~ phi_j mu.
  s.term_hat_.resize(problem.n(), static_cast<Eigen::Index>(reduced.source.terms.size()));
  for (std::size_t k = 0; k < reduced.source.terms.size(); ++k) {
    const auto& term = reduced.source.terms[k];
    if (term.spatial.size() != problem.n()) throw PreconditionError("source term has the wrong length");
    s.term_hat_.col(static_cast<Eigen::Index>(k)) = basis->eigenvectors().transpose() * term.spatial.cwiseProduct(s.measure_);
    s.rates_.push_back(term.rate);
  }
  s.generic_ = reduced.source.generic;
  if (output_times.empty()) output_times = {problem.t1, problem.t2};
  std::sort(output_times.begin(), output_times.end());
  s.times_ = std::move(output_times);
  s.stored_dt_ = s.times_.size() > 1 ? (s.times_.back() - s.times_.front()) / static_cast<double>(s.times_.size() - 1) : 1.0;
  return s;
}

/// Implicit Euler: ((rho mu / dt) + L) u^{k+1} = (rho mu / dt) u^k + mu f(t_{k+1}) + sum_{boundary} w g(t_{k+1}),
/// with L = mu(-Delta) restricted to the interior. Stores every `store_every`-th step plus the last.
inline HeatSolution solve_backward_euler(const HeatProblem& problem, double dt, std::size_t store_every = 1) {
  problem.validate();
  if (!(dt > 0.0)) throw PreconditionError("time step must be > 0");
  if (store_every < 1) throw PreconditionError("store stride must be >= 1");
  const double span = problem.t2 - problem.t1;
  const double steps_real = span / dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (steps == 0 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real)
    throw PreconditionError("time step must divide the interval length");

  const auto& region = *problem.region;
  const auto n = problem.n();
  Eigen::VectorXd mass(n);
  for (Eigen::Index i = 0; i < n; ++i)
    mass[i] = problem.rho[i] * region.measure(static_cast<std::size_t>(i)) / dt;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd mu(n);
  for (std::size_t i = 0; i < region.interior_size(); ++i) {
    const auto ii = static_cast<int>(i);
    mu[ii] = region.measure(i);
    trip.emplace_back(ii, ii, mass[ii] + region.degree(i));
    for (const auto& e : region.edges(i)) {
      if (region.is_interior(e.target)) trip.emplace_back(ii, static_cast<int>(e.target), -e.weight);
    }
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw ConvergenceError("implicit Euler factorization failed");

  HeatSolution s;
  s.kind_ = HeatSolution::Kind::grid;
  s.problem_ = problem;
  s.stored_dt_ = dt * static_cast<double>(store_every);
  const auto store = [&](double t, const Eigen::VectorXd& u, const Eigen::VectorXd& g) {
    ClosureVector v(static_cast<Eigen::Index>(region.closure_size()));
    v.head(n) = u;
    v.tail(problem.b()) = g;
    s.times_.push_back(t);
    s.values_.push_back(std::move(v));
  };
  Eigen::VectorXd u = problem.u0;
  store(problem.t1, u, problem.g(problem.t1));
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = problem.t1 + static_cast<double>(k) * dt;
    const Eigen::VectorXd g = problem.g(t);
    // increment form: constants give a zero right-hand side exactly
    Eigen::VectorXd rhs = mu.cwiseProduct(problem.f(t));
    for (std::size_t i = 0; i < region.interior_size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      double flux = 0.0;
      for (const auto& e : region.edges(i)) {
        const double y = region.is_interior(e.target) ? u[static_cast<Eigen::Index>(e.target)]
                                                      : g[static_cast<Eigen::Index>(e.target - region.interior_size())];
        flux += e.weight * (y - u[ii]);
      }
      rhs[ii] += flux;
    }
    u += ldlt.solve(rhs);
    if (k % store_every == 0 || k == steps) store(t, u, g);
  }
  return s;
}

struct ResidualSample {
  std::size_t interior_index;
  double t;
};

/// max |rho d_t u - Delta u - f| over interior samples with t in the open interval.
inline double residual_check(const HeatSolution& sol, const std::vector<ResidualSample>& samples) {
  const auto& p = sol.problem();
  double worst = 0.0;
  for (const auto& s : samples) {
    if (s.interior_index >= p.region->interior_size())
      throw PreconditionError("residual sample outside the interior");
    if (!(s.t > p.t1 && s.t < p.t2)) throw PreconditionError("residual sample time outside the open interval");
    const ClosureVector u = sol.closure_at(s.t);
    const auto i = static_cast<Eigen::Index>(s.interior_index);
    const double dudt = sol.dudt_interior(s.t)[i];
    const double lap = laplacian(*p.region, u, s.interior_index);
    worst = std::max(worst, std::abs(p.rho[i] * dudt - lap - p.f(s.t)[i]));
  }
  return worst;
}

/// Uniform output grid t1 + k (t2 - t1)/count, k = 0..count.
inline std::vector<double> uniform_times(double t1, double t2, std::size_t count) {
  std::vector<double> t(count + 1);
  for (std::size_t k = 0; k <= count; ++k) t[k] = t1 + static_cast<double>(k) * (t2 - t1) / static_cast<double>(count);
  t.back() = t2;
  return t;
}

}  // namespace graphheat
