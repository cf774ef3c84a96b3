#include "hig/physics.hpp"

#include <cmath>
#include <sstream>

namespace hig::physics {

using linalg::Complex;
using linalg::ComplexVector;

Vector toy_forward(const Vector& net_out, double gamma) {
  if (net_out.size() != 2) throw std::invalid_argument("toy_forward: expects a 2-vector");
  if (!(gamma > 0.0)) throw std::invalid_argument("toy_forward: gamma must be positive");
  return Vector{{net_out[0], gamma * net_out[1]}};
}

double half_squared_error(const Vector& y, const Vector& target) { return 0.5 * (y - target).squaredNorm(); }

ad::NodeId append_toy(ad::Graph& g, ad::NodeId net_out, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("append_toy: gamma must be positive");
  return g.matvec(Eigen::Vector2d(1.0, gamma).asDiagonal().toDenseMatrix(), net_out, "toy.scale");
}

// ---------------------------------------------------------------------------

OscillatorState oscillator_rhs(const OscillatorState& s, double u, double alpha, const Eigen::Vector2d& c) {
  const double d = s[0] - s[1];
  const double f = 4.0 * alpha * d * d * d;
  return OscillatorState{s[2], s[3], -s[0] - f - u * c[0], -s[1] + f - u * c[1]};
}

double hamiltonian_energy(const OscillatorState& s, double u, double alpha, const Eigen::Vector2d& c) {
  const double d = s[0] - s[1];
  return 0.5 * s.squaredNorm() + alpha * d * d * d * d + u * (s[0] * c[0] + s[1] * c[1]);
}

OscillatorState rk4_step(const OscillatorState& s, double u, const OscillatorParams& p) {
  const double h = p.dt;
  const OscillatorState k1 = oscillator_rhs(s, u, p.alpha, p.c);
  const OscillatorState k2 = oscillator_rhs(s + 0.5 * h * k1, u, p.alpha, p.c);
  const OscillatorState k3 = oscillator_rhs(s + 0.5 * h * k2, u, p.alpha, p.c);
  const OscillatorState k4 = oscillator_rhs(s + h * k3, u, p.alpha, p.c);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

OscillatorState rk4_rollout(const OscillatorState& s0, std::span<const double> u, const OscillatorParams& p) {
  if (static_cast<int>(u.size()) != p.steps) {
    std::ostringstream os;
    os << "rk4_rollout: control length " << u.size() << " does not match " << p.steps << " steps";
    throw std::invalid_argument(os.str());
  }
  OscillatorState s = s0;
  for (int n = 0; n < p.steps; ++n) {
    s = rk4_step(s, u[static_cast<std::size_t>(n)], p);
    if (!s.allFinite()) throw ad::NonFiniteError("rk4_rollout: non-finite state after step " + std::to_string(n));
  }
  return s;
}

ad::NodeId append_oscillator(ad::Graph& g, ad::NodeId controls, const OscillatorParams& p) {
  if (g.node(controls).dim != p.steps) throw std::invalid_argument("append_oscillator: control node must have one value per step");
  Matrix lin = Matrix::Zero(4, 4);
  lin(0, 2) = 1.0;
  lin(1, 3) = 1.0;
  lin(2, 0) = -1.0;
  lin(3, 1) = -1.0;
  const auto lin_h = g.add_matrix(lin);
  const auto diff_h = g.add_matrix(Matrix{{1.0, -1.0, 0.0, 0.0}});
  const auto force_h = g.add_matrix(Matrix{{0.0}, {0.0}, {-4.0 * p.alpha}, {4.0 * p.alpha}});
  const auto ctrl_h = g.add_matrix(Matrix{{0.0}, {0.0}, {-p.c[0]}, {-p.c[1]}});

  auto rhs = [&](ad::NodeId s, ad::NodeId ctrl) {
    const auto d3 = g.cube(g.matvec(diff_h, s, "osc.diff"), "osc.diff3");
    return g.lincomb({{1.0, g.matvec(lin_h, s, "osc.lin")}, {1.0, g.matvec(force_h, d3, "osc.force")}, {1.0, ctrl}},
                     "osc.rhs");
  };

  const double h = p.dt;
  ad::NodeId s = g.constant(Vector::Zero(4), "osc.s0");
  for (int n = 0; n < p.steps; ++n) {
    const auto u = g.slice(controls, n, 1, "osc.u");
    const auto ctrl = g.matvec(ctrl_h, u, "osc.ctrl");
    const auto k1 = rhs(s, ctrl);
    const auto k2 = rhs(g.lincomb({{1.0, s}, {0.5 * h, k1}}, "osc.stage2"), ctrl);
    const auto k3 = rhs(g.lincomb({{1.0, s}, {0.5 * h, k2}}, "osc.stage3"), ctrl);
    const auto k4 = rhs(g.lincomb({{1.0, s}, {h, k3}}, "osc.stage4"), ctrl);
    s = g.lincomb({{1.0, s}, {h / 6.0, k1}, {h / 3.0, k2}, {h / 3.0, k3}, {h / 6.0, k4}},
                  "osc.step" + std::to_string(n));
  }
  return s;
}

// ---------------------------------------------------------------------------

Vector laplacian_apply(const Vector& phi, double dx) {
  if (phi.size() != kPoissonSize) throw std::invalid_argument("laplacian_apply: expects an 8x8 field");
  const Index n = kPoissonSide;
  Vector out(kPoissonSize);
  auto at = [&](Index r, Index c) { return (r < 0 || r >= n || c < 0 || c >= n) ? 0.0 : phi[r * n + c]; };
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      out[r * n + c] = (at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1) - 4.0 * at(r, c)) / (dx * dx);
  return out;
}

Matrix laplacian_matrix(double dx) {
  Matrix a(kPoissonSize, kPoissonSize);
  for (Index j = 0; j < kPoissonSize; ++j) a.col(j) = laplacian_apply(Vector::Unit(kPoissonSize, j), dx);
  return a;
}

PoissonResidual poisson_loss(const Vector& phi_pred, const Vector& rho) {
  if (rho.size() != kPoissonSize) throw std::invalid_argument("poisson_loss: expects an 8x8 source");
  PoissonResidual r;
  r.y = laplacian_apply(phi_pred);
  r.loss = half_squared_error(r.y, rho);
  return r;
}

ad::NodeId append_poisson(ad::Graph& g, ad::NodeId phi) { return g.matvec(laplacian_matrix(), phi, "poisson.laplacian"); }

// ---------------------------------------------------------------------------

Vector quantum_grid() {
  Vector x(kQuantumPoints);
  for (Index j = 0; j < kQuantumPoints; ++j) x[j] = static_cast<double>(j + 1) * kQuantumDx;
  return x;
}

linalg::ComplexTridiagonal build_quantum_hamiltonian(double u) {
  const double inv = 1.0 / (kQuantumDx * kQuantumDx);
  linalg::ComplexTridiagonal h;
  h.lower = ComplexVector::Constant(kQuantumPoints - 1, Complex(-inv, 0.0));
  h.upper = h.lower;
  h.diag = (Vector::Constant(kQuantumPoints, 2.0 * inv) + u * quantum_grid()).cast<Complex>();
  return h;
}

ComplexVector cn_step(const ComplexVector& psi, double u, double dt) {
  if (psi.size() != kQuantumPoints) throw std::invalid_argument("cn_step: expects 14 grid values");
  const auto h = build_quantum_hamiltonian(u);
  const Complex a(0.0, 0.5 * dt);
  linalg::ComplexTridiagonal lhs{a * h.lower, ComplexVector::Ones(kQuantumPoints) + a * h.diag, a * h.upper};
  const ComplexVector rhs = psi - a * h.apply(psi);
  return linalg::solve_tridiagonal_complex(lhs, rhs);
}

ComplexVector cn_rollout(const ComplexVector& psi0, std::span<const double> u, double dt) {
  ComplexVector psi = psi0;
  for (double un : u) psi = cn_step(psi, un, dt);
  return psi;
}

const Eigenstates& eigenstates() {
  static const Eigenstates cached = [] {
    const double inv = 1.0 / (kQuantumDx * kQuantumDx);
    const auto eig = linalg::eigh_sym_tridiagonal(Vector::Constant(kQuantumPoints, 2.0 * inv),
                                                  Vector::Constant(kQuantumPoints - 1, -inv));
    Eigenstates e;
    e.states = eig.vectors.leftCols(3);
    e.energies = eig.values.head(3);
    for (Index k = 0; k < 3; ++k) {
      e.states.col(k).normalize();
      if (e.states(0, k) < 0.0) e.states.col(k) *= -1.0;
    }
    return e;
  }();
  return cached;
}

Complex inner(const ComplexVector& a, const ComplexVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("inner: length mismatch");
  return a.dot(b);  // Eigen conjugates the first argument
}

double overlap_loss(const ComplexVector& a, const ComplexVector& b) { return 1.0 - std::norm(inner(a, b)); }

double low_energy_loss(const ComplexVector& a, const ComplexVector& b) {
  const auto psi1 = eigenstates().state(1);
  const double d = std::abs(inner(a, psi1)) - std::abs(inner(psi1, b));
  return d * d;
}

double high_energy_loss(const ComplexVector& a, const ComplexVector& b) {
  const auto psi2 = eigenstates().state(2);
  const double d = std::abs(inner(a, psi2)) - std::abs(inner(psi2, b));
  return d * d;
}

Vector overlap_loss_gradient(const Vector& y, const Vector& target) {
  const Index n = y.size() / 2;
  if (y.size() != target.size() || y.size() % 2 != 0) throw std::invalid_argument("overlap_loss_gradient: bad lengths");
  const auto tr = target.head(n);
  const auto ti = target.tail(n);
  // <target, y> = ar + i ai
  const double ar = tr.dot(y.head(n)) + ti.dot(y.tail(n));
  const double ai = tr.dot(y.tail(n)) - ti.dot(y.head(n));
  Vector g(2 * n);
  g.head(n) = -2.0 * (ar * tr - ai * ti);
  g.tail(n) = -2.0 * (ar * ti + ai * tr);
  return g;
}

Vector to_pair(const ComplexVector& z) {
  Vector p(2 * z.size());
  p.head(z.size()) = z.real();
  p.tail(z.size()) = z.imag();
  return p;
}

ComplexVector from_pair(const Eigen::Ref<const Vector>& pair) {
  const Index n = pair.size() / 2;
  ComplexVector z(n);
  for (Index i = 0; i < n; ++i) z[i] = Complex(pair[i], pair[n + i]);
  return z;
}

ad::NodeId append_quantum(ad::Graph& g, ad::NodeId controls, const ComplexVector& psi0, const QuantumParams& p) {
  if (g.node(controls).dim != p.steps) throw std::invalid_argument("append_quantum: control node must have one value per step");
  if (psi0.size() != kQuantumPoints) throw std::invalid_argument("append_quantum: initial state must have 14 values");
  const Index n = kQuantumPoints;
  const double inv = 1.0 / (kQuantumDx * kQuantumDx);
  const double half = 0.5 * p.dt;
  const Vector x = quantum_grid();

  // Band of I + i*dt/2*H(u): off-diagonals are fixed, the diagonal is affine in u.
  Vector off = Vector::Zero(2 * (n - 1));
  off.tail(n - 1).setConstant(-half * inv);
  Vector diag0 = Vector::Zero(2 * n);
  diag0.head(n).setOnes();
  diag0.tail(n).setConstant(half * 2.0 * inv);
  Vector diag_u = Vector::Zero(2 * n);
  diag_u.tail(n) = half * x;
  const auto off_node = g.constant(off, "cn.offdiag");
  const auto diag0_node = g.constant(diag0, "cn.diag0");
  const auto diag_u_node = g.constant(diag_u, "cn.diag_u");

  // Right-hand side (I - i*dt/2*K) psi - u * i*dt/2*X psi as real 2n x 2n blocks.
  Matrix k = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = 2.0 * inv;
    if (j + 1 < n) k(j, j + 1) = k(j + 1, j) = -inv;
  }
  Matrix m0 = Matrix::Zero(2 * n, 2 * n);
  m0.topLeftCorner(n, n).setIdentity();
  m0.bottomRightCorner(n, n).setIdentity();
  m0.topRightCorner(n, n) = half * k;
  m0.bottomLeftCorner(n, n) = -half * k;
  Matrix m1 = Matrix::Zero(2 * n, 2 * n);
  m1.topRightCorner(n, n) = half * x.asDiagonal().toDenseMatrix();
  m1.bottomLeftCorner(n, n) = -half * x.asDiagonal().toDenseMatrix();
  const auto m0_h = g.add_matrix(std::move(m0));
  const auto m1_h = g.add_matrix(std::move(m1));

  ad::NodeId psi = g.constant(to_pair(psi0), "cn.psi0");
  for (int s = 0; s < p.steps; ++s) {
    const auto u = g.slice(controls, s, 1, "cn.u");
    const auto diag = g.lincomb({{1.0, diag0_node}, {1.0, g.scalar_mul(u, diag_u_node, "cn.diag_u")}}, "cn.diag");
    const auto rhs = g.lincomb({{1.0, g.matvec(m0_h, psi, "cn.kinetic")},
                                {1.0, g.scalar_mul(u, g.matvec(m1_h, psi, "cn.potential"), "cn.control")}},
                               "cn.rhs");
    psi = g.tridiag_solve(off_node, diag, off_node, rhs, "cn.step" + std::to_string(s));
  }
  return psi;
}

}  // namespace hig::physics
