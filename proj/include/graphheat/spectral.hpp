#pragma once

#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "graphheat/calculus.hpp"
#include "graphheat/graph.hpp"

namespace graphheat {

/// Largest interior handled by the dense eigen path; larger regions use time stepping.
inline constexpr std::size_t kSpectralCap = 4000;
/// Entries below this fraction of the largest are skipped when fixing the eigenvector sign.
inline constexpr double kSignGaugeThreshold = 1e-10;

struct DirichletOperator {
  Eigen::MatrixXd matrix;  // symmetric: M_ij = A_ij / sqrt(muhat_i muhat_j)
  Eigen::VectorXd mu_hat;  // w(x) mu(x) on the interior
};

/// Matrix of T u = (-Delta_w u) 1_Omega in mu-hat-orthonormal coordinates, zero Dirichlet data.
inline DirichletOperator assemble_dirichlet_operator(const FiniteRegion& region, const Eigen::VectorXd& w) {
  const auto n = region.interior_size();
  if (n == 0) throw PreconditionError("region interior is empty");
  if (static_cast<std::size_t>(w.size()) != n)
    throw PreconditionError("weight vector must have one value per interior vertex");
  DirichletOperator op;
  op.mu_hat.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w[static_cast<Eigen::Index>(i)];
    if (!(wi > 0.0)) throw DomainError("weight must be > 0 at " + region.vertex(i).to_string());
    op.mu_hat[static_cast<Eigen::Index>(i)] = wi * region.measure(i);
  }
  const Eigen::VectorXd s = op.mu_hat.cwiseSqrt();
  op.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    op.matrix(ii, ii) = region.degree(i) / op.mu_hat[ii];
    for (const auto& e : region.edges(i)) {
      if (!region.is_interior(e.target)) continue;
      const auto jj = static_cast<Eigen::Index>(e.target);
      op.matrix(ii, jj) -= e.weight / (s[ii] * s[jj]);
    }
  }
  return op;
}

/// Dirichlet eigenpairs of -Delta_w on a region, orthonormal under <f, g> = sum f g mu-hat.
class SpectralBasis {
 public:
  SpectralBasis(std::shared_ptr<const FiniteRegion> region, Eigen::VectorXd w, Eigen::VectorXd mu_hat,
                Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenvectors)
      : region_(std::move(region)),
        w_(std::move(w)),
        mu_hat_(std::move(mu_hat)),
        lambda_(std::move(eigenvalues)),
        phi_(std::move(eigenvectors)) {}

  const FiniteRegion& region() const { return *region_; }
  const std::shared_ptr<const FiniteRegion>& region_ptr() const { return region_; }
  std::size_t size() const { return static_cast<std::size_t>(lambda_.size()); }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  /// Column i is phi_i on the interior (zero on the boundary layer).
  const Eigen::MatrixXd& eigenvectors() const { return phi_; }
  const Eigen::VectorXd& mu_hat() const { return mu_hat_; }
  const Eigen::VectorXd& weight() const { return w_; }

  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return (a.array() * b.array() * mu_hat_.array()).sum();
  }
  /// c_j = <f, phi_j>.
  Eigen::VectorXd coefficients(const Eigen::VectorXd& f) const {
    if (f.size() != mu_hat_.size()) throw PreconditionError("function does not match the region interior");
    return phi_.transpose() * f.cwiseProduct(mu_hat_);
  }
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& c) const {
    if (c.size() != lambda_.size()) throw PreconditionError("coefficient vector has the wrong length");
    return phi_ * c;
  }
  /// Zero-extended eigenvector i over the closure.
  ClosureVector closure_vector(std::size_t i) const {
    ClosureVector v = ClosureVector::Zero(static_cast<Eigen::Index>(region_->closure_size()));
    v.head(phi_.rows()) = phi_.col(static_cast<Eigen::Index>(i));
    return v;
  }

  /// max_{i,j} |<phi_i, phi_j> - delta_ij|.
  double orthonormality_defect() const {
    const Eigen::MatrixXd g = phi_.transpose() * mu_hat_.asDiagonal() * phi_;
    return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
  }
  /// max_i ||(-Delta_w phi_i) 1_Omega - lambda_i phi_i||_inf / max(1, lambda_i), via the region Laplacian.
  double eigen_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      const ClosureVector v = closure_vector(i);
      const Eigen::VectorXd lap = laplacian_interior(*region_, v);
      const auto ii = static_cast<Eigen::Index>(i);
      const Eigen::VectorXd r = -lap.cwiseQuotient(w_) - lambda_[ii] * phi_.col(ii);
      worst = std::max(worst, r.cwiseAbs().maxCoeff() / std::max(1.0, lambda_[ii]));
    }
    return worst;
  }
  /// Orthogonal projector (mu-hat metric) onto eigenvectors [first, last).
  Eigen::MatrixXd projector(std::size_t first, std::size_t last) const {
    const auto cols = phi_.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first));
    return cols * (cols.transpose() * mu_hat_.asDiagonal());
  }

 private:
  std::shared_ptr<const FiniteRegion> region_;
  Eigen::VectorXd w_;
  Eigen::VectorXd mu_hat_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd phi_;
};

namespace detail {

inline void fix_sign_gauge(Eigen::MatrixXd& phi) {
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    const double big = phi.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
      if (std::abs(phi(i, j)) > kSignGaugeThreshold * big) {
        if (phi(i, j) < 0) phi.col(j) *= -1.0;
        break;
      }
    }
  }
}

inline double off_diagonal_norm(const Eigen::MatrixXd& m, const Eigen::MatrixXd& v) {
  Eigen::MatrixXd d = v.transpose() * m * v;
  d.diagonal().setZero();
  return d.norm();
}

inline SpectralBasis finish_basis(std::shared_ptr<const FiniteRegion> region, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& mu_hat, Eigen::VectorXd lambda, Eigen::MatrixXd v) {
  Eigen::MatrixXd phi = mu_hat.cwiseSqrt().cwiseInverse().asDiagonal() * v;
  fix_sign_gauge(phi);
  return SpectralBasis(std::move(region), w, mu_hat, std::move(lambda), std::move(phi));
}

}  // namespace detail

/// Full symmetric eigendecomposition, ascending eigenvalues. Shell chains (radial reductions)
/// are tridiagonal in shell order and take the tridiagonal path.
inline SpectralBasis dirichlet_spectrum(std::shared_ptr<const FiniteRegion> region, const Eigen::VectorXd& w) {
  if (region->interior_size() > kSpectralCap)
    throw BudgetExceededError("interior of " + std::to_string(region->interior_size()) +
                              " vertices exceeds the spectral cap of " + std::to_string(kSpectralCap));
  auto op = assemble_dirichlet_operator(*region, w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (region->graph().family().kind == FamilyTag::Kind::chain) {
    const auto n = op.matrix.rows();
    Eigen::VectorXd diag = op.matrix.diagonal();
    Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i + 1 < n; ++i) sub[i] = op.matrix(i + 1, i);
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  } else {
    es.compute(op.matrix);
  }
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("symmetric eigensolver did not converge; off-diagonal norm " +
                           std::to_string(detail::off_diagonal_norm(op.matrix, es.eigenvectors())));
  }
  return detail::finish_basis(std::move(region), w, op.mu_hat, es.eigenvalues(), es.eigenvectors());
}

/// Interior B_J of the shell chain of a profile: shells 0..J-1, boundary shell J.
inline std::shared_ptr<const FiniteRegion> shell_chain_ball(const RadialProfile& profile, std::size_t J) {
  if (J < 1) throw PreconditionError("outer shell J must be >= 1");
  if (profile.size() < J + 1) throw PreconditionError("profile shorter than outer shell " + std::to_string(J));
  RadialProfile cut = profile;
  for (auto* v : {&cut.d_plus, &cut.d_minus, &cut.shell_measure, &cut.shell_card}) v->resize(J + 1);
  return std::make_shared<const FiniteRegion>(materialize_ball(
      make_shell_chain(cut), {VertexId::radial(0, 0)}, static_cast<double>(J), Metric::combinatorial));
}

/// Dirichlet spectrum of the radial operator on shells 0..J-1 (zero at shell J), weight rho(m) |S_m|.
/// `rho` holds rho(m) for at least J shells.
inline SpectralBasis radial_dirichlet_spectrum(const RadialProfile& profile, const Eigen::VectorXd& rho,
                                               std::size_t J) {
  auto region = shell_chain_ball(profile, J);
  if (static_cast<std::size_t>(rho.size()) < J) throw PreconditionError("radial density shorter than J");
  return dirichlet_spectrum(std::move(region), rho.head(static_cast<Eigen::Index>(J)));
}

}  // namespace graphheat
