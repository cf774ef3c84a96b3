#include "hig/optim.hpp"
#include "hig/harness.hpp"
#include "hig/oracles.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

namespace hig {
namespace {

using optim::GradMethod;
using optim::GradOptimizerState;
using test::max_abs;

ad::JacobianStack make_stack(const Matrix& j, const Vector& g, Index out_dim = 1) {
  ad::JacobianStack s;
  s.jac = j;
  s.loss_grads = g;
  s.out_dim = out_dim;
  s.batch = j.rows() / out_dim;
  return s;
}

TEST(GradStep, SgdExample) {
  GradOptimizerState s(GradMethod::Sgd, 1);
  Vector theta = Vector::Constant(1, 1.0);
  optim::grad_step(s, theta, Vector::Constant(1, 2.0), 0.1);
  EXPECT_DOUBLE_EQ(theta[0], 0.8);
}

TEST(GradStep, AdamFirstStep) {
  GradOptimizerState s(GradMethod::Adam, 1);
  Vector theta = Vector::Zero(1);
  optim::grad_step(s, theta, Vector::Constant(1, 1.0), 0.001);
  // Bias-corrected moments are both 1: step = -eta / (1 + eps).
  EXPECT_NEAR(theta[0], -0.001 / (1.0 + 1e-7), 1e-18);
  EXPECT_NEAR(theta[0], -0.000999999, 1e-9);
  EXPECT_EQ(s.step, 1);
}

// Scalar recurrences written out independently for a few steps.
TEST(GradStep, RecurrencesAgainstScalarReference) {
  const std::vector<double> grads{0.5, -1.5, 2.0, 0.25, -0.75};
  const double eta = 0.05, eps = 1e-7;
  for (auto method : {GradMethod::Adam, GradMethod::Adagrad, GradMethod::Adadelta, GradMethod::Rmsprop}) {
    GradOptimizerState s(method, 1);
    Vector theta = Vector::Constant(1, 0.3);
    double ref = 0.3, m = 0, v = method == GradMethod::Adagrad ? 0.1 : 0.0, u = 0;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      const double g = grads[k];
      optim::grad_step(s, theta, Vector::Constant(1, g), eta);
      switch (method) {
        case GradMethod::Adam: {
          m = 0.9 * m + 0.1 * g;
          v = 0.999 * v + 0.001 * g * g;
          const double t = static_cast<double>(k + 1);
          ref -= eta * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + eps);
          break;
        }
        case GradMethod::Adagrad:
          v += g * g;
          ref -= eta * g / (std::sqrt(v) + eps);
          break;
        case GradMethod::Adadelta: {
          v = 0.95 * v + 0.05 * g * g;
          const double d = std::sqrt(u + eps) / std::sqrt(v + eps) * g;
          u = 0.95 * u + 0.05 * d * d;
          ref -= eta * d;
          break;
        }
        case GradMethod::Rmsprop:
          v = 0.9 * v + 0.1 * g * g;
          ref -= eta * g / (std::sqrt(v) + eps);
          break;
        default: break;
      }
      EXPECT_NEAR(theta[0], ref, 1e-14) << optim::method_name(method) << " step " << k;
    }
  }
}

TEST(GradStep, ZeroGradientLeavesThetaUnchanged) {
  for (auto method : {GradMethod::Sgd, GradMethod::Adagrad, GradMethod::Rmsprop, GradMethod::Adam, GradMethod::Adadelta}) {
    GradOptimizerState s(method, 3);
    Vector theta{{1.0, -2.0, 3.0}};
    const Vector before = theta;
    optim::grad_step(s, theta, Vector::Zero(3), 0.1);
    EXPECT_EQ(theta, before) << optim::method_name(method);
  }
}

TEST(GradStep, Errors) {
  GradOptimizerState s(GradMethod::Adam, 2);
  Vector theta = Vector::Zero(2);
  EXPECT_THROW(optim::grad_step(s, theta, Vector::Zero(3), 0.1), std::invalid_argument);
  EXPECT_THROW(optim::grad_step(s, theta, Vector{{1.0, std::nan("")}}, 0.1), std::invalid_argument);
  Vector longer = Vector::Zero(4);
  EXPECT_THROW(optim::grad_step(s, longer, Vector::Zero(4), 0.1), std::invalid_argument);
  EXPECT_THROW(optim::parse_grad_method("lbfgs"), std::invalid_argument);
  EXPECT_EQ(optim::parse_grad_method("rmsprop"), GradMethod::Rmsprop);
}

TEST(HigStep, ScalarCase) {
  const auto s = make_stack(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 3.0));
  const Vector d = optim::hig_step(s, {1.0, -0.5, 0.0, 0.0});
  EXPECT_NEAR(d[0], -3.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(d[0], -2.1213, 1e-4);
}

TEST(HigStep, KappaMinusOneIsGaussNewton) {
  Rng rng(3);
  const auto s = make_stack(test::random_matrix(rng, 6, 10), test::random_vector(rng, 6), 2);
  EXPECT_LE(max_abs(optim::hig_step(s, {1.0, -1.0, 1e-3, 0.0}) - optim::gn_step(s, 1e-3)), 1e-12);
}

TEST(HigStep, KappaOneIsSummedGradientOfAutodiff) {
  harness::ExperimentConfig cfg;
  cfg.experiment = "toy";
  cfg.train_size = 16;
  cfg.test_size = 16;
  cfg.batch_size = 8;
  cfg.budget_updates = 1;
  cfg.resolve_defaults();
  const auto p = harness::make_problem(cfg);
  const auto theta = nn::init(p.spec, 4);
  std::vector<Vector> in(p.train.inputs.begin(), p.train.inputs.begin() + 8);
  std::vector<Vector> tg(p.train.targets.begin(), p.train.targets.begin() + 8);
  ad::Tape tape(p.graph);
  ad::JacobianStack stack;
  harness::batch_stack(p, tape, theta, in, tg, stack, harness::LossReduction::Sum);
  Vector mean_grad;
  harness::batch_gradient(p, tape, theta, in, tg, mean_grad);
  const double eta = 0.3;
  const Vector d = optim::hig_step(stack, {eta, 1.0, 0.0, 0.0});
  EXPECT_LE(max_abs(d + eta * 8.0 * mean_grad), 1e-10);

  // The batch-mean stack differs only by the 1/b factor.
  harness::batch_stack(p, tape, theta, in, tg, stack, harness::LossReduction::Mean);
  EXPECT_LE(max_abs(optim::hig_step(stack, {eta, 1.0, 0.0, 0.0}) + eta * mean_grad), 1e-10);
}

TEST(HigStep, OvershootDampingOnDiagonalStack) {
  const Matrix j = Vector{{1.0, 1e-6}}.asDiagonal();
  const auto s = make_stack(j, Vector::Ones(2));
  const double ratio = optim::gn_step(s, 0.0).norm() / optim::hig_step(s, {1.0, -0.5, 0.0, 0.0}).norm();
  EXPECT_NEAR(ratio / 1e3, 1.0, 1e-3);
}

TEST(HigStep, PerDirectionOutputScaling) {
  // y-space effect J * delta along direction i scales as sigma^(1+kappa):
  // sigma^1/2 for HIG, sigma^0 for GN, sigma^2 for gradient descent.
  const Vector sigma{{4.0, 1.0, 0.01}};
  const auto s = make_stack(Matrix(sigma.asDiagonal()), Vector::Ones(3));
  const Vector hig = -(s.jac * optim::hig_step(s, {1.0, -0.5, 0.0, 0.0}));
  const Vector gn = -(s.jac * optim::gn_step(s, 0.0));
  const Vector gd = -(s.jac * optim::hig_step(s, {1.0, 1.0, 0.0, 0.0}));
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(hig[i], std::sqrt(sigma[i]), 1e-14);
    EXPECT_NEAR(gn[i], 1.0, 1e-14);
    EXPECT_NEAR(gd[i], sigma[i] * sigma[i], 1e-14);
  }
}

TEST(HigStep, NearDuplicateRowsOvershootScaling) {
  // Two stacked rows a + d and a - d with d orthogonal to a have singular
  // values sqrt(2)|a| and sqrt(2)|d|.
  Rng rng(5);
  const Index t = 12;
  Vector a = test::random_vector(rng, t).normalized();
  Vector n = test::random_vector(rng, t);
  n = (n - n.dot(a) * a).normalized();
  for (double smin : {1e-2, 1e-4, 1e-6}) {
    Matrix j(2, t);
    const Vector d = (smin / std::sqrt(2.0)) * n;
    j.row(0) = (a + d).transpose();
    j.row(1) = (a - d).transpose();
    const auto s = make_stack(j, Vector{{1.0, -0.5}});
    const double ratio = optim::gn_step(s, 0.0).norm() / optim::hig_step(s, {1.0, -0.5, 0.0, 0.0}).norm();
    const double want = std::pow(smin, -0.5);
    EXPECT_GT(ratio, want / 2.0) << smin;
    EXPECT_LT(ratio, want * 2.0) << smin;
  }
}

TEST(HigStep, SteepestDescentOnSeededInstances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(700 + seed);
    const Index m = 2 + static_cast<Index>(rng.below(5));
    const Index t = m + static_cast<Index>(rng.below(6));
    const auto s = make_stack(test::random_matrix(rng, m, t), test::random_vector(rng, m));
    const Vector d = optim::hig_step(s, {1.0, -0.5, 0.0, 0.0});
    EXPECT_TRUE(oracles::steepest_descent_oracle(s.jac, s.loss_grads, d, 1000, seed)) << seed;
  }
}

TEST(GnStep, MatchesNormalEquationsOnTallFullRank) {
  Rng rng(6);
  const Matrix j = test::random_matrix(rng, 9, 5);
  const Vector g = test::random_vector(rng, 9);
  const auto s = make_stack(j, g, 3);
  EXPECT_LE(max_abs(optim::gn_step(s, 0.0) - oracles::normal_equations_gn(j, g)), 1e-8);
}

TEST(GnStep, SquareInvertibleAndFullTruncation) {
  Rng rng(7);
  const Matrix j = test::random_matrix(rng, 4, 4) + 4.0 * Matrix::Identity(4, 4);
  const Vector g = test::random_vector(rng, 4);
  const auto s = make_stack(j, g, 2);
  EXPECT_LE(max_abs(optim::gn_step(s, 0.0) + j.inverse() * g), 1e-12);
  const double smax = linalg::svd(j).sigma[0];
  EXPECT_EQ(optim::gn_step(s, 2.0 * smax), Vector::Zero(4));
}

TEST(HigStep, DegenerateStacks) {
  const auto zero_jac = make_stack(Matrix::Zero(2, 5), Vector::Ones(2));
  EXPECT_THROW(optim::hig_step(zero_jac, {1.0, -0.5, 0.0, 0.5}), std::domain_error);
  EXPECT_EQ(optim::hig_step(zero_jac, {1.0, -0.5, 0.0, 0.0}), Vector::Zero(5));

  Rng rng(8);
  const auto zero_grad = make_stack(test::random_matrix(rng, 3, 6), Vector::Zero(3));
  EXPECT_EQ(optim::hig_step(zero_grad, {1.0, -0.5, 0.0, 0.0}), Vector::Zero(6));

  auto bad = make_stack(test::random_matrix(rng, 3, 6), Vector::Zero(2));
  EXPECT_THROW(optim::hig_step(bad, {}), std::invalid_argument);
  EXPECT_THROW(optim::hig_step(zero_grad, {0.0, -0.5, 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(optim::hig_step(zero_grad, {1.0, -0.5, -1.0, 0.0}), std::invalid_argument);
}

TEST(HigStep, BetaPrefactor) {
  const Matrix j = Vector{{4.0, 1.0}}.asDiagonal();
  const auto s = make_stack(j, Vector::Ones(2));
  const Vector d = optim::hig_step(s, {1.0, -0.5, 0.0, -0.5});
  EXPECT_NEAR(d[0], -0.25, 1e-15);
  EXPECT_NEAR(d[1], -0.5, 1e-15);
}

TEST(Oracles, FdJacobianExamples) {
  Rng rng(9);
  const Matrix w = test::random_matrix(rng, 3, 4);
  const Vector theta = test::random_vector(rng, 4);
  EXPECT_LE(max_abs(oracles::fd_jacobian([&](const Vector& v) { return Vector(w * v); }, theta) - w), 1e-10);
  const Matrix grad = oracles::fd_jacobian([](const Vector& v) { return Vector::Constant(1, v.squaredNorm()); }, theta);
  EXPECT_LE(max_abs(grad.transpose() - 2.0 * theta), 1e-7);
}

TEST(Oracles, SteepestDescentRejectsGradientStep) {
  Rng rng(10);
  const Matrix j = test::random_matrix(rng, 4, 6);
  const Vector g = test::random_vector(rng, 4);
  const Vector gd = -j.transpose() * g;
  EXPECT_FALSE(oracles::steepest_descent_oracle(j, g, gd, 1000, 1));
  // 1x1: the semi-norm sphere is two points and any descent direction wins.
  EXPECT_TRUE(oracles::steepest_descent_oracle(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.5),
                                               Vector::Constant(1, -0.3), 1000, 2));
}

TEST(Oracles, NormalEquationsGn) {
  Rng rng(11);
  const Matrix j = test::random_matrix(rng, 3, 3) + 3.0 * Matrix::Identity(3, 3);
  const Vector g = test::random_vector(rng, 3);
  EXPECT_LE(max_abs(oracles::normal_equations_gn(j, g) + j.inverse() * g), 1e-12);
  const Matrix deficient = test::random_matrix(rng, 5, 2) * test::random_matrix(rng, 2, 3);
  EXPECT_THROW(oracles::normal_equations_gn(deficient, test::random_vector(rng, 5)), std::domain_error);
}

}  // namespace
}  // namespace hig
