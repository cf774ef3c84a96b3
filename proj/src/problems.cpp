#include "hig/harness.hpp"

#include "hig/physics.hpp"

namespace hig::harness {

namespace {

enum SeedRole : std::uint64_t { kTrainData = 1, kTestData = 2 };

}  // namespace

Problem make_problem(const ExperimentConfig& cfg) {
  Problem p;
  p.kind = parse_experiment(cfg.experiment);
  const auto n_train = static_cast<std::size_t>(cfg.train_size);
  const auto n_test = static_cast<std::size_t>(cfg.test_size);
  const auto train_seed = derive_seed(cfg.seed, kTrainData);
  const auto test_seed = derive_seed(cfg.seed, kTestData);
  p.epoch_size = cfg.train_size;

  auto& g = p.graph;
  switch (p.kind) {
    case Experiment::Toy: {
      p.spec = {{1, 7, 2}, nn::Activation::Tanh};
      const auto x = g.input(1, "x");
      g.set_output(physics::append_toy(g, nn::append_mlp(g, p.spec, x), cfg.gamma));
      p.train = data::gen_toy(n_train, train_seed);
      p.test = data::gen_toy(n_test, test_seed);
      p.extra_names = {"mean_neuron_std"};
      break;
    }
    case Experiment::Oscillator: {
      p.spec = {{4, 20, 20, 20, 96}, nn::Activation::Relu};
      const auto x = g.input(4, "target_state");
      g.set_output(physics::append_oscillator(g, nn::append_mlp(g, p.spec, x)));
      p.train = data::gen_oscillator(n_train, train_seed, cfg.oscillator_range);
      p.test = data::gen_oscillator(n_test, test_seed, cfg.oscillator_range);
      break;
    }
    case Experiment::Poisson: {
      p.spec = {{64, 64, 256, 64, 64}, nn::Activation::Tanh};
      const auto x = g.input(64, "rho");
      g.set_output(physics::append_poisson(g, nn::append_mlp(g, p.spec, x)));
      const data::PoissonSpectrum spectrum{static_cast<int>(cfg.poisson_modes),
                                           static_cast<int>(cfg.poisson_max_wavenumber)};
      p.test = data::gen_poisson(n_test, test_seed, spectrum);
      break;
    }
    case Experiment::Quantum: {
      p.spec = {{28, 20, 20, 20, 384}, nn::Activation::Tanh};
      const auto x = g.input(28, "target_state");
      g.set_output(physics::append_quantum(g, nn::append_mlp(g, p.spec, x), physics::eigenstates().state(0)));
      p.train = data::gen_quantum(n_train, train_seed);
      p.test = data::gen_quantum(n_test, test_seed);
      p.extra_names = {"low_energy_loss", "high_energy_loss"};
      break;
    }
  }
  return p;
}

data::Dataset poisson_batch(const ExperimentConfig& cfg, std::int64_t update) {
  const data::PoissonSpectrum spectrum{static_cast<int>(cfg.poisson_modes), static_cast<int>(cfg.poisson_max_wavenumber)};
  return data::gen_poisson(static_cast<std::size_t>(cfg.batch_size),
                           derive_seed(derive_seed(cfg.seed, 5), static_cast<std::uint64_t>(update)), spectrum);
}

double sample_loss(const Problem& p, const Vector& y, const Vector& target, Vector* grad) {
  switch (p.kind) {
    case Experiment::Toy:
    case Experiment::Poisson:
      if (grad) *grad = y - target;
      return physics::half_squared_error(y, target);
    case Experiment::Oscillator: {
      // Mean squared error over the four state components.
      const Vector r = y - target;
      if (grad) *grad = 0.5 * r;
      return 0.25 * r.squaredNorm();
    }
    case Experiment::Quantum: {
      if (grad) *grad = physics::overlap_loss_gradient(y, target);
      return physics::overlap_loss(physics::from_pair(target), physics::from_pair(y));
    }
  }
  return 0.0;
}

Evaluation evaluate_dataset(const Problem& p, const ad::ParamVector& theta, const data::Dataset& d) {
  if (d.size() == 0) throw std::invalid_argument("evaluate_dataset: empty data set");
  ad::Tape tape(p.graph);
  Evaluation ev;
  double low = 0.0;
  double high = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Vector y = tape.forward(theta, d.inputs[i]);
    ev.loss += sample_loss(p, y, d.targets[i], nullptr);
    if (p.kind == Experiment::Quantum) {
      const auto target = physics::from_pair(d.targets[i]);
      const auto pred = physics::from_pair(y);
      low += physics::low_energy_loss(target, pred);
      high += physics::high_energy_loss(target, pred);
    }
  }
  const double n = static_cast<double>(d.size());
  ev.loss /= n;
  if (p.kind == Experiment::Quantum) ev.extras = {low / n, high / n};
  if (p.kind == Experiment::Toy) ev.extras = {nn::neuron_saturation_stats(p.spec, theta, d.inputs).stddev.mean()};
  return ev;
}

double batch_gradient(const Problem& p, ad::Tape& tape, const ad::ParamVector& theta, std::span<const Vector> inputs,
                      std::span<const Vector> targets, Vector& mean_grad) {
  Matrix acc = Matrix::Zero(theta.size(), 1);
  Vector dl;
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vector y = tape.forward(theta, inputs[i]);
    loss += sample_loss(p, y, targets[i], &dl);
    tape.backward(theta, dl, acc);
  }
  const double n = static_cast<double>(inputs.size());
  mean_grad = acc.col(0) / n;
  return loss / n;
}

double batch_stack(const Problem& p, ad::Tape& tape, const ad::ParamVector& theta, std::span<const Vector> inputs,
                   std::span<const Vector> targets, ad::JacobianStack& stack, LossReduction reduction) {
  const Index m = p.out_dim();
  const Index t = theta.size();
  const auto b = static_cast<Index>(inputs.size());
  stack.batch = b;
  stack.out_dim = m;
  stack.jac.resize(b * m, t);
  stack.loss_grads.resize(b * m);
  const Matrix identity = Matrix::Identity(m, m);
  Matrix block(t, m);
  Vector dl;
  double loss = 0.0;
  const double scale = reduction == LossReduction::Mean ? 1.0 / static_cast<double>(b) : 1.0;
  for (Index i = 0; i < b; ++i) {
    const Vector y = tape.forward(theta, inputs[static_cast<std::size_t>(i)]);
    loss += sample_loss(p, y, targets[static_cast<std::size_t>(i)], &dl);
    stack.loss_grads.segment(i * m, m) = scale * dl;
    block.setZero();
    tape.backward(theta, identity, block);
    stack.jac.middleRows(i * m, m) = block.transpose();
  }
  return loss / static_cast<double>(b);
}

}  // namespace hig::harness
