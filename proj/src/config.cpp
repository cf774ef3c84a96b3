#include "hig/harness.hpp"

#include <set>

namespace hig::harness {

const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::Toy: return "toy";
    case Experiment::Oscillator: return "oscillator";
    case Experiment::Poisson: return "poisson";
    case Experiment::Quantum: return "quantum";
  }
  return "?";
}

Experiment parse_experiment(const std::string& name) {
  for (auto e : {Experiment::Toy, Experiment::Oscillator, Experiment::Poisson, Experiment::Quantum})
    if (name == experiment_name(e)) return e;
  throw ConfigError("unknown experiment '" + name + "' (expected toy, oscillator, poisson or quantum)");
}

void ExperimentConfig::resolve_defaults() {
  const Experiment e = parse_experiment(experiment);
  if (train_size == 0) train_size = e == Experiment::Oscillator ? 4096 : 1024;
  if (test_size == 0) test_size = e == Experiment::Oscillator ? 4096 : e == Experiment::Poisson ? 256 : 1024;
  if (eval_every_updates == 0 && e == Experiment::Poisson) eval_every_updates = 10;
  if (checkpoint_every_evals < 0) checkpoint_every_evals = e == Experiment::Toy ? 1 : 0;
}

void ExperimentConfig::validate() const {
  const Experiment e = parse_experiment(experiment);
  static const std::set<std::string> optimizers = {"sgd", "adagrad", "adadelta", "rmsprop", "adam", "gn", "hig"};
  if (!optimizers.count(optimizer)) throw ConfigError("unknown optimizer '" + optimizer + "'");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(tau >= 0.0)) throw ConfigError("tau must be non-negative");
  if (!std::isfinite(kappa) || !std::isfinite(beta)) throw ConfigError("kappa and beta must be finite");
  if (e == Experiment::Toy && !(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (train_size < 1 || test_size < 1) throw ConfigError("train_size and test_size must be positive");
  if (batch_size > train_size)
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds the training set size " +
                      std::to_string(train_size));
  if (budget_updates < 0 || budget_seconds < 0.0) throw ConfigError("budgets must be non-negative");
  if (budget_updates == 0 && budget_seconds == 0.0) throw ConfigError("set budget_updates and/or budget_seconds");
  if (test_eval_every < 1) throw ConfigError("test_eval_every must be at least 1");
  if (eval_every_updates < 0) throw ConfigError("eval_every_updates must be non-negative");
  if (!(oscillator_range > 0.0)) throw ConfigError("oscillator_range must be positive");
  if (poisson_modes < 1 || poisson_max_wavenumber < 1 || poisson_max_wavenumber > 8)
    throw ConfigError("poisson spectrum out of range");
  if (!(saturation_threshold > 0.0)) throw ConfigError("saturation_threshold must be positive");
  if (loss_reduction != "mean" && loss_reduction != "sum") throw ConfigError("loss_reduction must be mean or sum");
}

namespace {

template <typename T>
void read(const Json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const Json::exception& ex) {
    throw ConfigError(std::string("config key '") + key + "': " + ex.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "experiment", "optimizer", "eta", "batch_size", "tau", "kappa", "beta", "gamma", "seed",
      "budget_updates", "budget_seconds", "test_eval_every", "eval_every_updates", "init_params_path", "out_dir",
      "train_size", "test_size", "oscillator_range", "poisson_modes", "poisson_max_wavenumber",
      "saturation_threshold", "checkpoint_every_evals", "probe_x", "loss_reduction"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");

  ExperimentConfig c;
  read(j, "experiment", c.experiment);
  read(j, "optimizer", c.optimizer);
  read(j, "eta", c.eta);
  read(j, "batch_size", c.batch_size);
  read(j, "tau", c.tau);
  read(j, "kappa", c.kappa);
  read(j, "beta", c.beta);
  read(j, "gamma", c.gamma);
  read(j, "seed", c.seed);
  read(j, "budget_updates", c.budget_updates);
  read(j, "budget_seconds", c.budget_seconds);
  read(j, "test_eval_every", c.test_eval_every);
  read(j, "eval_every_updates", c.eval_every_updates);
  read(j, "init_params_path", c.init_params_path);
  read(j, "out_dir", c.out_dir);
  read(j, "train_size", c.train_size);
  read(j, "test_size", c.test_size);
  read(j, "oscillator_range", c.oscillator_range);
  read(j, "poisson_modes", c.poisson_modes);
  read(j, "poisson_max_wavenumber", c.poisson_max_wavenumber);
  read(j, "saturation_threshold", c.saturation_threshold);
  read(j, "checkpoint_every_evals", c.checkpoint_every_evals);
  read(j, "probe_x", c.probe_x);
  read(j, "loss_reduction", c.loss_reduction);
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  return Json{
      {"experiment", c.experiment},
      {"optimizer", c.optimizer},
      {"eta", c.eta},
      {"batch_size", c.batch_size},
      {"tau", c.tau},
      {"kappa", c.kappa},
      {"beta", c.beta},
      {"gamma", c.gamma},
      {"seed", c.seed},
      {"budget_updates", c.budget_updates},
      {"budget_seconds", c.budget_seconds},
      {"test_eval_every", c.test_eval_every},
      {"eval_every_updates", c.eval_every_updates},
      {"init_params_path", c.init_params_path},
      {"out_dir", c.out_dir},
      {"train_size", c.train_size},
      {"test_size", c.test_size},
      {"oscillator_range", c.oscillator_range},
      {"poisson_modes", c.poisson_modes},
      {"poisson_max_wavenumber", c.poisson_max_wavenumber},
      {"saturation_threshold", c.saturation_threshold},
      {"checkpoint_every_evals", c.checkpoint_every_evals},
      {"probe_x", c.probe_x},
      {"loss_reduction", c.loss_reduction},
  };
}

}  // namespace hig::harness
