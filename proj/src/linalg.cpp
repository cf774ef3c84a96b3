#include "hig/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace hig::linalg {

ComplexTridiagonal ComplexTridiagonal::adjoint() const {
  return ComplexTridiagonal{upper.conjugate(), diag.conjugate(), lower.conjugate()};
}

Eigen::MatrixXcd ComplexTridiagonal::dense() const {
  const Index n = size();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (Index i = 0; i < n; ++i) m(i, i) = diag[i];
  for (Index i = 0; i + 1 < n; ++i) {
    m(i + 1, i) = lower[i];
    m(i, i + 1) = upper[i];
  }
  return m;
}

ComplexVector ComplexTridiagonal::apply(const ComplexVector& x) const {
  const Index n = size();
  ComplexVector y = diag.cwiseProduct(x);
  for (Index i = 0; i + 1 < n; ++i) {
    y[i + 1] += lower[i] * x[i];
    y[i] += upper[i] * x[i + 1];
  }
  return y;
}

ComplexVector solve_tridiagonal_complex(const ComplexTridiagonal& t, const ComplexVector& rhs) {
  const Index n = t.size();
  if (n < 1) throw std::invalid_argument("solve_tridiagonal_complex: empty system");
  if (rhs.size() != n || t.lower.size() != n - 1 || t.upper.size() != n - 1)
    throw std::invalid_argument("solve_tridiagonal_complex: band/rhs sizes inconsistent");

  double band = t.diag.cwiseAbs().maxCoeff();
  if (n > 1) band = std::max({band, t.lower.cwiseAbs().maxCoeff(), t.upper.cwiseAbs().maxCoeff()});
  const double min_pivot = 1e-14 * band;

  ComplexVector c(n);
  ComplexVector d(n);
  Complex pivot = t.diag[0];
  for (Index i = 0; i < n; ++i) {
    if (i > 0) pivot = t.diag[i] - t.lower[i - 1] * c[i - 1];
    if (!(std::abs(pivot) >= min_pivot) || band == 0.0) {
      std::ostringstream os;
      os << "solve_tridiagonal_complex: pivot " << std::abs(pivot) << " at row " << i
         << " is below 1e-14 of band magnitude " << band;
      throw NumericalFailure(os.str());
    }
    c[i] = (i + 1 < n) ? t.upper[i] / pivot : Complex(0.0);
    d[i] = (i > 0 ? rhs[i] - t.lower[i - 1] * d[i - 1] : rhs[i]) / pivot;
  }
  ComplexVector x(n);
  x[n - 1] = d[n - 1];
  for (Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

SymmetricEigen eigh_sym_tridiagonal(const Vector& diag, const Vector& off) {
  if (diag.size() < 1 || off.size() != diag.size() - 1)
    throw std::invalid_argument("eigh_sym_tridiagonal: off-diagonal length must be diag length - 1");
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigh_sym_tridiagonal: QR iteration did not converge for n=" << diag.size();
    throw NumericalFailure(os.str());
  }
  return SymmetricEigen{solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace hig::linalg
