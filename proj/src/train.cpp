#include "hig/harness.hpp"

#include "hig/rng.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace hig::harness {

namespace {

enum SeedRole : std::uint64_t { kInit = 3, kShuffle = 4 };

constexpr const char* kLibraryVersion = "hig 1.0.0";

// Wall clock that can be paused around test-set evaluations.
class ActiveClock {
 public:
  using clock = std::chrono::steady_clock;
  ActiveClock() : start_(clock::now()) {}
  void pause() { paused_at_ = clock::now(); }
  void resume() { excluded_ += clock::now() - paused_at_; }
  double ms() const {
    return std::chrono::duration<double, std::milli>(clock::now() - start_ - excluded_).count();
  }

 private:
  clock::time_point start_;
  clock::time_point paused_at_;
  clock::duration excluded_{0};
};

std::string checkpoint_name(std::int64_t update) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08lld.bin", static_cast<long long>(update));
  return buf;
}

class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, const std::vector<std::string>& extras) {
    if (path.empty()) return;
    os_.open(path, std::ios::trunc);
    if (!os_) throw std::runtime_error("cannot write metrics file " + path.string());
    os_ << "wall_ms,epoch,update,train_loss,test_loss";
    for (const auto& e : extras) os_ << ',' << e;
    os_ << '\n';
    os_.flush();
  }

  void write(const MetricsRecord& r) {
    if (!os_.is_open()) return;
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    os_ << wall << ',' << format_number(r.epoch) << ',' << r.update << ',' << format_number(r.train_loss) << ','
        << format_number(r.test_loss);
    for (double e : r.extras) os_ << ',' << format_number(e);
    os_ << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

bool finite(const Evaluation& ev) {
  if (!std::isfinite(ev.loss)) return false;
  for (double e : ev.extras)
    if (!std::isfinite(e)) return false;
  return true;
}

Json eval_json(const Evaluation& ev, const std::vector<std::string>& names) {
  Json j = {{"test_loss", ev.loss}};
  for (std::size_t i = 0; i < names.size() && i < ev.extras.size(); ++i) j[names[i]] = ev.extras[i];
  return j;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunResult run_experiment(ExperimentConfig cfg) {
  cfg.resolve_defaults();
  cfg.validate();

  Problem p = make_problem(cfg);
  RunResult result;
  result.extra_names = p.extra_names;

  Json parent;
  if (!cfg.init_params_path.empty()) {
    nn::ParamFile f;
    try {
      f = nn::load_params(cfg.init_params_path);
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("init_params_path: ") + ex.what());
    }
    if (!(f.spec == p.spec))
      throw ConfigError("init_params_path holds a network that does not match the " + cfg.experiment + " network");
    result.theta = std::move(f.theta);
    const auto parent_dir = std::filesystem::path(cfg.init_params_path).parent_path();
    parent = {{"params", cfg.init_params_path}, {"seed", f.seed}};
    if (std::filesystem::exists(parent_dir / "meta.json")) {
      parent["run_dir"] = parent_dir.string();
      try {
        std::ifstream is(parent_dir / "meta.json");
        const Json pm = Json::parse(is);
        if (pm.contains("config")) parent["config"] = pm["config"];
        if (pm.contains("updates")) parent["updates"] = pm["updates"];
      } catch (const Json::exception&) {
        // A damaged parent meta.json only costs the link, not the run.
      }
    }
  } else {
    result.theta = nn::init(p.spec, derive_seed(cfg.seed, kInit));
  }
  result.initial_theta = result.theta;

  const bool write_files = !cfg.out_dir.empty();
  const std::filesystem::path out = cfg.out_dir;
  if (write_files) {
    std::filesystem::create_directories(out / "checkpoints");
  }
  MetricsWriter metrics(write_files ? out / "metrics.csv" : std::filesystem::path{}, p.extra_names);
  auto checkpoint = [&](std::int64_t update) {
    if (write_files) nn::save_params(out / "checkpoints" / checkpoint_name(update), p.spec, cfg.seed, result.theta);
  };

  // Setup (data generation, graph assembly) is not part of the training time.
  ActiveClock clock;
  clock.pause();
  result.initial = evaluate_dataset(p, result.theta, p.test);
  clock.resume();
  checkpoint(0);

  const bool stacked = cfg.uses_stack();
  const bool streamed = p.kind == Experiment::Poisson;
  optim::GradOptimizerState grad_state;
  if (!stacked) grad_state = optim::GradOptimizerState(optim::parse_grad_method(cfg.optimizer), result.theta.size());
  const optim::HigConfig hig_cfg{cfg.eta, cfg.kappa, cfg.tau, cfg.beta};
  const auto reduction = cfg.loss_reduction == "sum" ? LossReduction::Sum : LossReduction::Mean;

  ad::Tape tape(p.graph);
  Rng shuffle_rng(derive_seed(cfg.seed, kShuffle));
  std::vector<std::size_t> order(p.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches_per_epoch = streamed ? 0 : p.train.size() / b;
  std::size_t batch_in_epoch = batches_per_epoch;  // forces a shuffle before the first batch
  std::int64_t epochs_done = 0;
  std::int64_t samples_seen = 0;
  std::int64_t evals = 0;

  std::vector<Vector> inputs(b);
  std::vector<Vector> targets(b);
  ad::JacobianStack stack;
  Vector grad;
  Vector delta;

  auto diverge = [&](double train_loss, const std::string& why) {
    result.status = "diverged";
    result.message = why;
    MetricsRecord r{clock.ms(), static_cast<double>(samples_seen) / static_cast<double>(p.epoch_size),
                    result.updates, train_loss, std::nan(""),
                    std::vector<double>(p.extra_names.size(), std::nan(""))};
    result.rows.push_back(r);
    metrics.write(r);
  };

  double last_train_loss = std::nan("");
  std::int64_t last_logged = -1;
  for (;;) {
    if (cfg.budget_updates > 0 && result.updates >= cfg.budget_updates) break;
    if (cfg.budget_seconds > 0.0 && clock.ms() >= cfg.budget_seconds * 1000.0) break;

    bool epoch_end = false;
    if (streamed) {
      auto batch = poisson_batch(cfg, result.updates);
      inputs = std::move(batch.inputs);
      targets = std::move(batch.targets);
    } else {
      if (batch_in_epoch == batches_per_epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        batch_in_epoch = 0;
      }
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t idx = order[batch_in_epoch * b + k];
        inputs[k] = p.train.inputs[idx];
        targets[k] = p.train.targets[idx];
      }
      ++batch_in_epoch;
      if (batch_in_epoch == batches_per_epoch) {
        epoch_end = true;
        ++epochs_done;
      }
    }

    try {
      if (stacked) {
        last_train_loss = batch_stack(p, tape, result.theta, inputs, targets, stack, reduction);
        if (std::isfinite(last_train_loss))
          delta = cfg.optimizer == "gn" ? optim::gn_step(stack, cfg.tau) : optim::hig_step(stack, hig_cfg);
      } else {
        last_train_loss = batch_gradient(p, tape, result.theta, inputs, targets, grad);
      }
    } catch (const ad::NonFiniteError& ex) {
      diverge(std::nan(""), ex.what());
      break;
    }
    if (!std::isfinite(last_train_loss)) {
      diverge(last_train_loss, "non-finite training loss");
      break;
    }
    if (stacked) {
      if (!delta.allFinite()) {
        diverge(last_train_loss, "non-finite update");
        break;
      }
      result.theta.values += delta;
    } else {
      if (!grad.allFinite()) {
        diverge(last_train_loss, "non-finite gradient");
        break;
      }
      optim::grad_step(grad_state, result.theta.values, grad, cfg.eta);
    }
    if (!result.theta.values.allFinite()) {
      diverge(last_train_loss, "non-finite parameters");
      break;
    }
    ++result.updates;
    samples_seen += static_cast<std::int64_t>(b);

    const bool due = cfg.eval_every_updates > 0 ? result.updates % cfg.eval_every_updates == 0
                                                 : epoch_end && epochs_done % cfg.test_eval_every == 0;
    const bool last = (cfg.budget_updates > 0 && result.updates >= cfg.budget_updates) ||
                      (cfg.budget_seconds > 0.0 && clock.ms() >= cfg.budget_seconds * 1000.0);
    if (!due && !last) continue;

    const double wall = clock.ms();
    clock.pause();
    Evaluation ev;
    try {
      ev = evaluate_dataset(p, result.theta, p.test);
    } catch (const ad::NonFiniteError&) {
      ev.loss = std::nan("");
    }
    clock.resume();
    MetricsRecord r{wall, static_cast<double>(samples_seen) / static_cast<double>(p.epoch_size), result.updates,
                    last_train_loss, ev.loss, ev.extras};
    r.extras.resize(p.extra_names.size(), std::nan(""));
    result.rows.push_back(r);
    metrics.write(r);
    last_logged = result.updates;
    ++evals;
    if (!finite(ev)) {
      result.status = "diverged";
      result.message = "non-finite test loss";
      break;
    }
    if (cfg.checkpoint_every_evals > 0 && evals % cfg.checkpoint_every_evals == 0) checkpoint(result.updates);
  }
  if (result.status == "ok" && result.updates > 0 && last_logged != result.updates) {
    const double wall = clock.ms();
    clock.pause();
    const Evaluation ev = evaluate_dataset(p, result.theta, p.test);
    clock.resume();
    MetricsRecord r{wall, static_cast<double>(samples_seen) / static_cast<double>(p.epoch_size), result.updates,
                    last_train_loss, ev.loss, ev.extras};
    result.rows.push_back(r);
    metrics.write(r);
    if (!finite(ev)) {
      result.status = "diverged";
      result.message = "non-finite test loss";
    }
  }
  result.wall_ms = clock.ms();

  if (write_files) {
    nn::save_params(out / "params.bin", p.spec, cfg.seed, result.theta);
    Json meta;
    meta["config"] = config_to_json(cfg);
    meta["status"] = result.status;
    meta["message"] = result.message;
    meta["updates"] = result.updates;
    meta["wall_ms"] = result.wall_ms;
    meta["initial"] = eval_json(result.initial, p.extra_names);
    meta["final_test_loss"] = result.final_test_loss();
    meta["network"] = {{"layer_sizes", p.spec.layer_sizes},
                       {"hidden_activation", nn::activation_name(p.spec.hidden_activation)},
                       {"output_activation", "linear"},
                       {"param_count", nn::param_count(p.spec)},
                       {"initializer", p.spec.hidden_activation == nn::Activation::Tanh ? "glorot_uniform, zero bias"
                                                                                       : "he_normal, zero bias"}};
    meta["extras"] = p.extra_names;
    meta["optimizer_constants"] = {{"adam_beta1", 0.9}, {"adam_beta2", 0.999}, {"epsilon", 1e-7},
                                   {"adadelta_rho", 0.95}, {"rmsprop_rho", 0.9}, {"adagrad_initial", 0.1}};
    meta["data"] = {{"generator_version", data::kGeneratorVersion},
                    {"rng", Rng::kAlgorithm},
                    {"train_size", cfg.train_size},
                    {"test_size", cfg.test_size},
                    {"streamed_training_data", streamed}};
    meta["library_version"] = kLibraryVersion;
    meta["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION);
    meta["timing"] = "wall_ms is single-process steady-clock time from run start, excluding test-set evaluation";
    if (!parent.is_null()) meta["parent_run"] = parent;
    std::ofstream(out / "meta.json") << meta.dump(2) << '\n';
  }
  return result;
}

}  // namespace hig::harness
