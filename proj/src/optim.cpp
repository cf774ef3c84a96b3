#include "hig/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hig::optim {

const char* method_name(GradMethod m) {
  switch (m) {
    case GradMethod::Sgd: return "sgd";
    case GradMethod::Adam: return "adam";
    case GradMethod::Adagrad: return "adagrad";
    case GradMethod::Adadelta: return "adadelta";
    case GradMethod::Rmsprop: return "rmsprop";
  }
  return "?";
}

GradMethod parse_grad_method(const std::string& name) {
  for (auto m : {GradMethod::Sgd, GradMethod::Adam, GradMethod::Adagrad, GradMethod::Adadelta, GradMethod::Rmsprop})
    if (name == method_name(m)) return m;
  throw std::invalid_argument("unknown gradient optimizer '" + name + "'");
}

GradOptimizerState::GradOptimizerState(GradMethod method_, Index size, GradHyper hyper_)
    : method(method_), hyper(hyper_) {
  switch (method) {
    case GradMethod::Sgd: break;
    case GradMethod::Adam:
      m = Vector::Zero(size);
      v = Vector::Zero(size);
      break;
    case GradMethod::Adagrad: v = Vector::Constant(size, hyper.adagrad_initial); break;
    case GradMethod::Adadelta:
      v = Vector::Zero(size);
      u = Vector::Zero(size);
      break;
    case GradMethod::Rmsprop: v = Vector::Zero(size); break;
  }
}

void grad_step(GradOptimizerState& s, Vector& theta, const Vector& grad, double eta) {
  if (grad.size() != theta.size()) throw std::invalid_argument("grad_step: gradient and parameter lengths differ");
  if (!grad.allFinite()) throw std::invalid_argument("grad_step: non-finite gradient");
  if (s.method != GradMethod::Sgd && s.v.size() != theta.size())
    throw std::invalid_argument("grad_step: optimizer state was sized for a different parameter vector");
  const auto& h = s.hyper;
  ++s.step;
  switch (s.method) {
    case GradMethod::Sgd: theta -= eta * grad; break;
    case GradMethod::Adam: {
      s.m = h.beta1 * s.m + (1.0 - h.beta1) * grad;
      s.v = h.beta2 * s.v + (1.0 - h.beta2) * grad.cwiseAbs2();
      const double t = static_cast<double>(s.step);
      const double c1 = 1.0 - std::pow(h.beta1, t);
      const double c2 = 1.0 - std::pow(h.beta2, t);
      theta.array() -= eta * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + h.epsilon);
      break;
    }
    case GradMethod::Adagrad:
      s.v += grad.cwiseAbs2();
      theta.array() -= eta * grad.array() / (s.v.array().sqrt() + h.epsilon);
      break;
    case GradMethod::Adadelta: {
      const double rho = h.rho_adadelta;
      s.v = rho * s.v + (1.0 - rho) * grad.cwiseAbs2();
      const Vector delta =
          (((s.u.array() + h.epsilon).sqrt() / (s.v.array() + h.epsilon).sqrt()) * grad.array()).matrix();
      s.u = rho * s.u + (1.0 - rho) * delta.cwiseAbs2();
      theta -= eta * delta;
      break;
    }
    case GradMethod::Rmsprop: {
      const double rho = h.rho_rmsprop;
      s.v = rho * s.v + (1.0 - rho) * grad.cwiseAbs2();
      theta.array() -= eta * grad.array() / (s.v.array().sqrt() + h.epsilon);
      break;
    }
  }
}

void HigConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("HigConfig: eta must be positive");
  if (!(tau >= 0.0)) throw std::invalid_argument("HigConfig: tau must be non-negative");
  if (!std::isfinite(kappa) || !std::isfinite(beta)) throw std::invalid_argument("HigConfig: kappa and beta must be finite");
}

Vector hig_step(const ad::JacobianStack& stack, const HigConfig& cfg) {
  cfg.validate();
  stack.validate();
  return -cfg.eta * linalg::apply_beta_scaled_power(stack.jac, stack.loss_grads, cfg.beta, cfg.kappa, cfg.tau);
}

Vector gn_step(const ad::JacobianStack& stack, double tau) {
  return hig_step(stack, HigConfig{1.0, -1.0, tau, 0.0});
}

}  // namespace hig::optim
