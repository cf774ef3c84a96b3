#pragma once

// Reference computations used by the test suites. Nothing here calls into the
// library proper: derivatives come from central differences, matrix
// decompositions from Eigen's own dense solvers.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

namespace hig::oracles {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Step used by fd_jacobian unless overridden. At 64-bit precision it keeps
/// both truncation (O(h^2)) and cancellation (O(eps/h)) error near 1e-8.
inline constexpr double kFdStep = 1e-4;

/// Central-difference Jacobian of f at theta: column i is
/// (f(theta + h e_i) - f(theta - h e_i)) / 2h.
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& theta, double h = kFdStep);

/// Checks that `delta` minimizes the linearized loss change g . J d over
/// random directions d rescaled to the same semi-norm |Lambda^{3/4} V^T d| as
/// delta, with J = U Lambda V^T. Returns false on the first direction that
/// does better than delta (beyond a 1e-10 relative slack).
bool steepest_descent_oracle(const Matrix& j, const Vector& g, const Vector& delta, int trials = 1000,
                             std::uint64_t seed = 0);

/// -(J^T J)^{-1} J^T g from the normal equations. Throws std::domain_error if
/// J^T J is numerically singular.
Vector normal_equations_gn(const Matrix& j, const Vector& g);

}  // namespace hig::oracles
