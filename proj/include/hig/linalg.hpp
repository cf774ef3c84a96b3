#pragma once

// Dense linear algebra used by the optimizers and solvers: one-sided Jacobi
// SVD, truncated fractional matrix powers, complex tridiagonal solves and the
// symmetric tridiagonal eigenproblem.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hig {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

}  // namespace hig

namespace hig::linalg {

/// Raised when an iterative factorization exceeds its iteration cap or a
/// direct solve meets a vanishing pivot.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Convergence controls for the one-sided Jacobi SVD. A column pair (p, q) is
/// considered orthogonal once |<a_p, a_q>| <= tolerance * |a_p| * |a_q|.
struct SvdOptions {
  double tolerance = 1e-12;
  int max_sweeps = 60;
};

/// Thin SVD `m = u * diag(sigma) * v^T` with r = min(rows, cols) columns in
/// `u` and `v`; `sigma` is sorted descending.
template <typename Scalar>
struct SvdFactors {
  MatrixX<Scalar> u;
  VectorX<Scalar> sigma;
  MatrixX<Scalar> v;

  Index rank() const { return sigma.size(); }
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    std::ostringstream os;
    os << what << ": input " << m.rows() << "x" << m.cols() << " matrix has non-finite entries";
    throw std::invalid_argument(os.str());
  }
}

/// Cyclic one-sided Jacobi on the columns of `x`. On return the columns of `x`
/// are mutually orthogonal and, if given, `w` has accumulated the right
/// rotations, so the original matrix equals x_out * w^T. Returns the number of
/// sweeps used.
template <typename Scalar>
int orthogonalize_columns(MatrixX<Scalar>& x, MatrixX<Scalar>* w, const SvdOptions& opt,
                          Index report_rows, Index report_cols) {
  using std::abs;
  using std::sqrt;
  const Index n = x.cols();
  VectorX<Scalar> norms(n);
  const Scalar tol = static_cast<Scalar>(opt.tolerance);

  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    for (Index j = 0; j < n; ++j) norms[j] = x.col(j).squaredNorm();
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar a = norms[p];
        const Scalar b = norms[q];
        if (a == Scalar(0) || b == Scalar(0)) continue;
        const Scalar g = x.col(p).dot(x.col(q));
        if (abs(g) <= tol * sqrt(a) * sqrt(b)) continue;
        rotated = true;
        const Scalar zeta = (b - a) / (Scalar(2) * g);
        Scalar t;
        if (abs(zeta) > Scalar(1e150)) {
          t = Scalar(1) / (Scalar(2) * zeta);
        } else {
          t = (zeta >= Scalar(0) ? Scalar(1) : Scalar(-1)) / (abs(zeta) + sqrt(Scalar(1) + zeta * zeta));
        }
        const Scalar c = Scalar(1) / sqrt(Scalar(1) + t * t);
        const Scalar s = c * t;
        // applyOnTheRight maps (x_p, x_q) -> (c x_p - s x_q, s x_p + c x_q).
        const Eigen::JacobiRotation<Scalar> rot(c, s);
        x.applyOnTheRight(p, q, rot);
        if (w) w->applyOnTheRight(p, q, rot);
        // The closed-form norm updates drift for near-null columns; recomputing
        // keeps the relative orthogonality test meaningful.
        norms[p] = x.col(p).squaredNorm();
        norms[q] = x.col(q).squaredNorm();
      }
    }
    if (!rotated) return sweep + 1;
  }
  std::ostringstream os;
  os << "svd: one-sided Jacobi did not converge within " << opt.max_sweeps << " sweeps for a "
     << report_rows << "x" << report_cols << " matrix";
  throw NumericalFailure(os.str());
}

/// Fill columns of `basis` flagged in `missing` so that all columns form an
/// orthonormal set. Candidates are unit vectors tried in index order.
template <typename Scalar>
void complete_orthonormal(MatrixX<Scalar>& basis, const std::vector<bool>& missing) {
  const Index n = basis.rows();
  std::vector<Index> present;
  for (Index j = 0; j < basis.cols(); ++j)
    if (!missing[static_cast<std::size_t>(j)]) present.push_back(j);
  for (Index j = 0; j < basis.cols(); ++j) {
    if (!missing[static_cast<std::size_t>(j)]) continue;
    VectorX<Scalar> best;
    Scalar best_norm = Scalar(-1);
    for (Index k = 0; k < n; ++k) {
      VectorX<Scalar> cand = VectorX<Scalar>::Unit(n, k);
      for (int pass = 0; pass < 2; ++pass)
        for (Index i : present) cand -= basis.col(i).dot(cand) * basis.col(i);
      const Scalar nrm = cand.norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = cand;
      }
      if (best_norm > Scalar(0.5)) break;
    }
    basis.col(j) = best / best_norm;
    present.push_back(j);
  }
}

/// Householder QR that takes ownership of its input, which avoids a second
/// copy of large stacked Jacobians.
template <typename Scalar>
class OwningHouseholderQR : public Eigen::HouseholderQR<MatrixX<Scalar>> {
 public:
  void compute_owned(MatrixX<Scalar>&& a) {
    this->m_qr = std::move(a);
    this->computeInPlace();
  }
};

/// Factorization of a tall (or square) matrix A with q columns:
///   A = Q [R; 0]                  Householder QR
///   R^T = Q2 R2                   second QR, leaves R2^T close to diagonal
///   R2^T W = left * diag(sigma)   one-sided Jacobi
/// so that A = (Q [left; 0]) diag(sigma) (Q2 W)^T.
template <typename Scalar>
struct TallJacobi {
  OwningHouseholderQR<Scalar> qr;
  Index rows = 0;
  MatrixX<Scalar> left;   // q x q, left singular vectors in the basis of Q
  VectorX<Scalar> sigma;  // descending
  MatrixX<Scalar> right;  // q x q, right singular vectors
  int sweeps = 0;
  bool accumulated = false;  // W came from accumulated rotations, not a solve

  MatrixX<Scalar> left_singular_vectors() const {
    MatrixX<Scalar> padded = MatrixX<Scalar>::Zero(rows, left.cols());
    padded.topRows(left.rows()) = left;
    padded.applyOnTheLeft(qr.householderQ());
    return padded;
  }
};

template <typename Scalar>
TallJacobi<Scalar> tall_jacobi(MatrixX<Scalar> a, const SvdOptions& opt, Index report_rows,
                               Index report_cols) {
  TallJacobi<Scalar> out;
  out.rows = a.rows();
  const Index q = a.cols();
  out.qr.compute_owned(std::move(a));

  MatrixX<Scalar> rt = out.qr.matrixQR().topRows(q).template triangularView<Eigen::Upper>().transpose();
  OwningHouseholderQR<Scalar> qr2;
  qr2.compute_owned(std::move(rt));
  const MatrixX<Scalar> x0 = qr2.matrixQR().template triangularView<Eigen::Upper>().transpose();

  // Rotating only x halves the work per sweep. W is then recovered from the
  // triangular system x0 W = x; if that loses orthogonality (x0 numerically
  // singular) the sweeps are redone with W accumulated.
  MatrixX<Scalar> x = x0;
  out.sweeps = orthogonalize_columns<Scalar>(x, nullptr, opt, report_rows, report_cols);
  MatrixX<Scalar> w = x0.template triangularView<Eigen::Lower>().solve(x);
  const Scalar orth_tol = Scalar(10 * q) * std::numeric_limits<Scalar>::epsilon();
  if (!w.allFinite() ||
      (w.transpose() * w - MatrixX<Scalar>::Identity(q, q)).cwiseAbs().maxCoeff() > orth_tol) {
    x = x0;
    w = MatrixX<Scalar>::Identity(q, q);
    out.sweeps = orthogonalize_columns<Scalar>(x, &w, opt, report_rows, report_cols);
    out.accumulated = true;
  }

  VectorX<Scalar> norms(q);
  for (Index j = 0; j < q; ++j) norms[j] = x.col(j).norm();
  std::vector<Index> order(static_cast<std::size_t>(q));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return norms[i] > norms[j]; });

  out.sigma.resize(q);
  out.left.resize(q, q);
  out.right.resize(q, q);
  std::vector<bool> missing(static_cast<std::size_t>(q), false);
  for (Index k = 0; k < q; ++k) {
    const Index j = order[static_cast<std::size_t>(k)];
    out.sigma[k] = norms[j];
    out.right.col(k) = w.col(j);
    if (norms[j] > Scalar(0)) {
      out.left.col(k) = x.col(j) / norms[j];
    } else {
      out.left.col(k).setZero();
      missing[static_cast<std::size_t>(k)] = true;
    }
  }
  if (std::find(missing.begin(), missing.end(), true) != missing.end()) complete_orthonormal(out.left, missing);
  out.right.applyOnTheLeft(qr2.householderQ());
  return out;
}

template <typename Scalar>
Scalar power_weight(Scalar sigma, Scalar kappa, Scalar tau) {
  if (!(sigma > Scalar(0)) || sigma < tau) return Scalar(0);
  if (kappa == Scalar(1)) return sigma;
  if (kappa == Scalar(-1)) return Scalar(1) / sigma;
  using std::pow;
  return pow(sigma, kappa);
}

}  // namespace detail

/// Thin singular value decomposition by QR-preconditioned one-sided Jacobi.
/// Deterministic for a fixed input; throws NumericalFailure naming the matrix
/// dimensions if the sweep cap is exceeded.
template <typename Derived>
SvdFactors<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& m, const SvdOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(m, "svd");
  if (m.rows() < 1 || m.cols() < 1) throw std::invalid_argument("svd: empty matrix");

  SvdFactors<Scalar> f;
  if (m.rows() >= m.cols()) {
    auto core = detail::tall_jacobi<Scalar>(m.eval(), opt, m.rows(), m.cols());
    f.u = core.left_singular_vectors();
    f.sigma = core.sigma;
    f.v = std::move(core.right);
  } else {
    auto core = detail::tall_jacobi<Scalar>(m.transpose().eval(), opt, m.rows(), m.cols());
    f.u = std::move(core.right);
    f.sigma = core.sigma;
    f.v = core.left_singular_vectors();
  }
  return f;
}

/// Truncated fractional power V * g(Lambda) * U^T of `m` where
/// g(s) = s^kappa for s >= tau and 0 otherwise. Zero singular values are always
/// dropped. The result has the transposed shape of `m`.
template <typename Derived>
MatrixX<typename Derived::Scalar> frac_power(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar kappa,
                                             typename Derived::Scalar tau, const SvdOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  if (tau < Scalar(0)) throw std::invalid_argument("frac_power: tau must be non-negative");
  const auto f = svd(m, opt);
  VectorX<Scalar> g(f.sigma.size());
  for (Index i = 0; i < g.size(); ++i) g[i] = detail::power_weight(f.sigma[i], kappa, tau);
  return f.v * g.asDiagonal() * f.u.transpose();
}

/// Largest singular value raised to beta times frac_power(m, kappa, tau).
template <typename Derived>
MatrixX<typename Derived::Scalar> beta_scaled_power(const Eigen::MatrixBase<Derived>& m,
                                                    typename Derived::Scalar beta,
                                                    typename Derived::Scalar kappa,
                                                    typename Derived::Scalar tau, const SvdOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  if (tau < Scalar(0)) throw std::invalid_argument("beta_scaled_power: tau must be non-negative");
  const auto f = svd(m, opt);
  Scalar prefactor(1);
  if (beta != Scalar(0)) {
    if (!(f.sigma[0] > Scalar(0)))
      throw std::domain_error("beta_scaled_power: zero matrix has no largest singular value for the prefactor");
    using std::pow;
    prefactor = pow(f.sigma[0], beta);
  }
  VectorX<Scalar> g(f.sigma.size());
  for (Index i = 0; i < g.size(); ++i) g[i] = prefactor * detail::power_weight(f.sigma[i], kappa, tau);
  return f.v * g.asDiagonal() * f.u.transpose();
}

/// Computes beta_scaled_power(m, beta, kappa, tau) * rhs without forming the
/// singular vectors of the long dimension explicitly. Used by the optimizer on
/// stacked Jacobians that are far wider than tall.
template <typename Derived, typename RhsDerived>
VectorX<typename Derived::Scalar> apply_beta_scaled_power(const Eigen::MatrixBase<Derived>& m,
                                                          const Eigen::MatrixBase<RhsDerived>& rhs,
                                                          typename Derived::Scalar beta,
                                                          typename Derived::Scalar kappa,
                                                          typename Derived::Scalar tau,
                                                          const SvdOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  if (tau < Scalar(0)) throw std::invalid_argument("apply_beta_scaled_power: tau must be non-negative");
  if (rhs.size() != m.rows()) throw std::invalid_argument("apply_beta_scaled_power: rhs length must equal rows");
  detail::require_finite(m, "apply_beta_scaled_power");
  if (m.rows() < 1 || m.cols() < 1) throw std::invalid_argument("apply_beta_scaled_power: empty matrix");

  const bool wide = m.rows() < m.cols();
  auto core = wide ? detail::tall_jacobi<Scalar>(m.transpose().eval(), opt, m.rows(), m.cols())
                   : detail::tall_jacobi<Scalar>(m.eval(), opt, m.rows(), m.cols());
  const Index q = core.sigma.size();

  Scalar prefactor(1);
  if (beta != Scalar(0)) {
    if (!(core.sigma[0] > Scalar(0)))
      throw std::domain_error("apply_beta_scaled_power: zero matrix has no largest singular value for the prefactor");
    using std::pow;
    prefactor = pow(core.sigma[0], beta);
  }
  VectorX<Scalar> g(q);
  for (Index i = 0; i < q; ++i) g[i] = prefactor * detail::power_weight(core.sigma[i], kappa, tau);

  if (wide) {
    // m^T = (Q left) S right^T, so m^kappa = (Q left) g right^T.
    VectorX<Scalar> out = VectorX<Scalar>::Zero(core.rows);
    out.head(q) = core.left * (g.asDiagonal() * (core.right.transpose() * rhs));
    out.applyOnTheLeft(core.qr.householderQ());
    return out;
  }
  // m = (Q left) S right^T, so m^kappa = right g (Q left)^T.
  VectorX<Scalar> tmp = rhs;
  tmp.applyOnTheLeft(core.qr.householderQ().adjoint());
  return core.right * (g.asDiagonal() * (core.left.transpose() * tmp.head(q)));
}

// ---------------------------------------------------------------------------
// Complex tridiagonal systems

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;

/// Tridiagonal matrix with `lower[i]` at (i+1, i), `diag[i]` at (i, i) and
/// `upper[i]` at (i, i+1).
struct ComplexTridiagonal {
  ComplexVector lower;
  ComplexVector diag;
  ComplexVector upper;

  Index size() const { return diag.size(); }
  ComplexTridiagonal adjoint() const;
  Eigen::MatrixXcd dense() const;
  ComplexVector apply(const ComplexVector& x) const;
};

/// Thomas elimination without pivoting. Throws NumericalFailure if a pivot
/// falls below 1e-14 times the largest band magnitude.
ComplexVector solve_tridiagonal_complex(const ComplexTridiagonal& t, const ComplexVector& rhs);

/// Ascending eigenvalues and orthonormal eigenvectors (as columns) of a real
/// symmetric tridiagonal matrix.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

SymmetricEigen eigh_sym_tridiagonal(const Vector& diag, const Vector& off);

}  // namespace hig::linalg
