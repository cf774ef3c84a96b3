#pragma once

// Update rules. Gradient-family optimizers mutate theta in place from a batch
// gradient; Gauss-Newton and HIG return a step computed from a stacked
// per-sample Jacobian and the stacked loss gradients.

#include "hig/autodiff.hpp"

#include <cstdint>
#include <string>

namespace hig::optim {

enum class GradMethod : std::uint8_t { Sgd, Adam, Adagrad, Adadelta, Rmsprop };

const char* method_name(GradMethod m);
GradMethod parse_grad_method(const std::string& name);

/// Constants follow the Keras defaults (epsilon 1e-7 throughout).
struct GradHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double rho_adadelta = 0.95;
  double rho_rmsprop = 0.9;
  double adagrad_initial = 0.1;
};

struct GradOptimizerState {
  GradMethod method = GradMethod::Sgd;
  GradHyper hyper;
  Vector m;  // adam first moment
  Vector v;  // adam second moment, adagrad/rmsprop/adadelta squared-gradient accumulator
  Vector u;  // adadelta squared-update accumulator
  std::int64_t step = 0;

  GradOptimizerState() = default;
  GradOptimizerState(GradMethod method, Index size, GradHyper hyper = {});
};

/// theta += update for the configured method. Throws std::invalid_argument on
/// shape mismatch or a non-finite gradient.
void grad_step(GradOptimizerState& state, Vector& theta, const Vector& grad, double eta);

struct HigConfig {
  double eta = 1.0;
  double kappa = -0.5;
  double tau = 0.0;
  double beta = 0.0;

  void validate() const;
};

/// -eta * sigma_max^beta * V g(Lambda) U^T * loss_grads for the stacked Jacobian.
Vector hig_step(const ad::JacobianStack& stack, const HigConfig& cfg);

/// Truncated pseudoinverse step with unit learning rate.
Vector gn_step(const ad::JacobianStack& stack, double tau);

}  // namespace hig::optim
