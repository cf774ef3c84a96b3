#include "hig/oracles.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hig::oracles {

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& theta, double h) {
  const Vector y0 = f(theta);
  Matrix jac(y0.size(), theta.size());
  Vector probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const Vector plus = f(probe);
    probe[i] = theta[i] - h;
    const Vector minus = f(probe);
    probe[i] = theta[i];
    jac.col(i) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

namespace {

// Box-Muller on the raw engine so the trial directions do not depend on the
// standard library's distribution implementation.
double normal_draw(std::mt19937_64& eng) {
  double u1;
  do u1 = static_cast<double>(eng() >> 11) * 0x1.0p-53; while (u1 <= 0.0);
  const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

bool steepest_descent_oracle(const Matrix& j, const Vector& g, const Vector& delta, int trials, std::uint64_t seed) {
  if (g.size() != j.rows() || delta.size() != j.cols())
    throw std::invalid_argument("steepest_descent_oracle: shape mismatch");
  Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector lam34 = svd.singularValues().array().pow(0.75).matrix();
  const Matrix weight = lam34.asDiagonal() * svd.matrixV().transpose();

  const double target = (weight * delta).norm();
  const Vector slope = j.transpose() * g;  // d -> g . J d
  const double best = slope.dot(delta);
  const double slack = 1e-10 * std::max(1.0, std::abs(best));

  std::mt19937_64 eng(seed);
  Vector d(delta.size());
  for (int t = 0; t < trials; ++t) {
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = normal_draw(eng);
    const double n = (weight * d).norm();
    if (n == 0.0) continue;
    d *= target / n;
    if (slope.dot(d) < best - slack) return false;
  }
  return true;
}

Vector normal_equations_gn(const Matrix& j, const Vector& g) {
  if (g.size() != j.rows()) throw std::invalid_argument("normal_equations_gn: shape mismatch");
  const Matrix normal = j.transpose() * j;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
    std::ostringstream os;
    os << "normal_equations_gn: J^T J (" << normal.rows() << "x" << normal.cols() << ") is singular";
    throw std::domain_error(os.str());
  }
  return -llt.solve(j.transpose() * g);
}

}  // namespace hig::oracles
