#pragma once

// Forward models: the conditioning toy problem, a two-mass nonlinear
// oscillator chain under RK4, the 8x8 Poisson residual, and a 1D quantum well
// under Crank-Nicolson. Every model has a plain numeric implementation and a
// graph builder producing the same computation for differentiation.

#include "hig/autodiff.hpp"

#include <span>

namespace hig::physics {

// ---------------------------------------------------------------------------
// Toy problem

/// (y1, gamma * y2).
Vector toy_forward(const Vector& net_out, double gamma);
/// 0.5 * |y - target|^2.
double half_squared_error(const Vector& y, const Vector& target);
ad::NodeId append_toy(ad::Graph& g, ad::NodeId net_out, double gamma);

// ---------------------------------------------------------------------------
// Oscillator chain, state ordered (x1, x2, p1, p2)

using OscillatorState = Eigen::Vector4d;

struct OscillatorParams {
  double alpha = 1.0;
  Eigen::Vector2d c{0.0, 3.0};
  double dt = 0.125;
  int steps = 96;
};

OscillatorState oscillator_rhs(const OscillatorState& s, double u, double alpha, const Eigen::Vector2d& c);
double hamiltonian_energy(const OscillatorState& s, double u, double alpha, const Eigen::Vector2d& c);
OscillatorState rk4_step(const OscillatorState& s, double u, const OscillatorParams& p);
/// Classical RK4 with the control held over each step. Throws
/// NonFiniteError naming the step if the state blows up.
OscillatorState rk4_rollout(const OscillatorState& s0, std::span<const double> u, const OscillatorParams& p = {});

/// Appends the rollout from the origin driven by `controls` (one value per
/// step); returns the final state node.
ad::NodeId append_oscillator(ad::Graph& g, ad::NodeId controls, const OscillatorParams& p = {});

// ---------------------------------------------------------------------------
// Poisson residual on an 8x8 interior grid, index r * 8 + c

inline constexpr Index kPoissonSide = 8;
inline constexpr Index kPoissonSize = kPoissonSide * kPoissonSide;

Vector laplacian_apply(const Vector& phi, double dx = 1.0);
Matrix laplacian_matrix(double dx = 1.0);

struct PoissonResidual {
  double loss = 0.0;
  Vector y;
};
PoissonResidual poisson_loss(const Vector& phi_pred, const Vector& rho);

ad::NodeId append_poisson(ad::Graph& g, ad::NodeId phi);

// ---------------------------------------------------------------------------
// Quantum well: 14 interior points x_j = j * dx on [0, 2], complex values as
// a 28-vector with real parts first.

inline constexpr Index kQuantumPoints = 14;
inline constexpr double kQuantumDx = 0.133;

struct QuantumParams {
  double dt = 0.05;
  int steps = 384;
};

Vector quantum_grid();
linalg::ComplexTridiagonal build_quantum_hamiltonian(double u);
linalg::ComplexVector cn_step(const linalg::ComplexVector& psi, double u, double dt = 0.05);
linalg::ComplexVector cn_rollout(const linalg::ComplexVector& psi0, std::span<const double> u, double dt = 0.05);

struct Eigenstates {
  Matrix states;     // 14 x 3, columns Psi0, Psi1, Psi2
  Eigen::Vector3d energies;

  linalg::ComplexVector state(Index k) const { return states.col(k).cast<linalg::Complex>(); }
};

/// Three lowest eigenpairs of the control-free Hamiltonian, each normalized
/// with a positive first component.
const Eigenstates& eigenstates();

linalg::Complex inner(const linalg::ComplexVector& a, const linalg::ComplexVector& b);
double overlap_loss(const linalg::ComplexVector& a, const linalg::ComplexVector& b);
double low_energy_loss(const linalg::ComplexVector& a, const linalg::ComplexVector& b);
double high_energy_loss(const linalg::ComplexVector& a, const linalg::ComplexVector& b);

/// Gradient of 1 - |<target, y>|^2 with respect to the pair-encoded y.
Vector overlap_loss_gradient(const Vector& y_pair, const Vector& target_pair);

Vector to_pair(const linalg::ComplexVector& z);
linalg::ComplexVector from_pair(const Eigen::Ref<const Vector>& pair);

/// Appends the Crank-Nicolson rollout from `psi0` driven by `controls`;
/// returns the final pair-encoded state node.
ad::NodeId append_quantum(ad::Graph& g, ad::NodeId controls, const linalg::ComplexVector& psi0,
                          const QuantumParams& p = {});

}  // namespace hig::physics
