// Command-line front end: run, sweep, diagnose, export-dataset.
//
// Exit status: 0 success, 1 runtime failure, 2 configuration error,
// 3 training diverged.

#include "hig/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using hig::harness::Json;

Json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw hig::harness::ConfigError("cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& ex) {
    throw hig::harness::ConfigError(path + ": " + ex.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Half-inverse gradient training lab"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Train one configuration");
  std::string config_path;
  Json overrides = Json::object();
  std::string experiment, optimizer, init_params, out_dir;
  double eta = 0, tau = 0, kappa = 0, beta = 0, gamma = 0, budget_seconds = 0;
  std::int64_t batch = 0, budget_updates = 0, train_size = 0, test_size = 0, eval_every_updates = 0, test_eval_every = 0;
  std::uint64_t seed = 0;
  run->add_option("--config", config_path, "JSON config file; flags override its keys");
  auto* o_exp = run->add_option("--experiment", experiment, "toy | oscillator | poisson | quantum");
  auto* o_opt = run->add_option("--optimizer", optimizer, "sgd | adagrad | adadelta | rmsprop | adam | gn | hig");
  auto* o_eta = run->add_option("--eta", eta, "learning rate");
  auto* o_batch = run->add_option("--batch", batch, "batch size");
  auto* o_tau = run->add_option("--tau", tau, "absolute singular value cutoff (gn, hig)");
  auto* o_kappa = run->add_option("--kappa", kappa, "Jacobian exponent (hig, default -0.5)");
  auto* o_beta = run->add_option("--beta", beta, "largest-singular-value prefactor exponent (hig, default 0)");
  auto* o_gamma = run->add_option("--gamma", gamma, "toy output scale");
  auto* o_seed = run->add_option("--seed", seed, "seed for data, initialization and shuffling");
  auto* o_bu = run->add_option("--budget-updates", budget_updates, "stop after this many updates");
  auto* o_bs = run->add_option("--budget-seconds", budget_seconds, "stop after this much training wall time");
  auto* o_init = run->add_option("--init-params", init_params, "start from a saved params.bin");
  auto* o_out = run->add_option("--out", out_dir, "output directory");
  auto* o_train = run->add_option("--train-size", train_size, "training set size (poisson: nominal epoch)");
  auto* o_test = run->add_option("--test-size", test_size, "test set size");
  auto* o_eeu = run->add_option("--eval-every-updates", eval_every_updates, "test evaluation cadence in updates");
  auto* o_tee = run->add_option("--test-eval-every", test_eval_every, "test evaluation cadence in epochs");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Run every point of a configuration grid");
  std::string grid_path, sweep_out;
  sw->add_option("--grid", grid_path, "grid JSON: {\"base\": {...}, \"grid\": {key: [values]}}")->required();
  sw->add_option("--out", sweep_out, "output directory")->required();

  // diagnose
  auto* dg = app.add_subcommand("diagnose", "Neuron saturation and probe trajectory of a finished run");
  std::string run_dir;
  dg->add_option("--run", run_dir, "run directory")->required();

  // export-dataset
  auto* ex = app.add_subcommand("export-dataset", "Write a generated data set as CSV with a JSON sidecar");
  std::string ex_experiment, ex_out;
  std::size_t ex_n = 0;
  std::uint64_t ex_seed = 0;
  ex->add_option("--experiment", ex_experiment)->required();
  ex->add_option("--n", ex_n)->required();
  ex->add_option("--seed", ex_seed)->required();
  ex->add_option("--out", ex_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      Json j = config_path.empty() ? Json::object() : read_json(config_path);
      auto set = [&](CLI::Option* opt, const char* key, const auto& value) {
        if (opt->count()) j[key] = value;
      };
      set(o_exp, "experiment", experiment);
      set(o_opt, "optimizer", optimizer);
      set(o_eta, "eta", eta);
      set(o_batch, "batch_size", batch);
      set(o_tau, "tau", tau);
      set(o_kappa, "kappa", kappa);
      set(o_beta, "beta", beta);
      set(o_gamma, "gamma", gamma);
      set(o_seed, "seed", seed);
      set(o_bu, "budget_updates", budget_updates);
      set(o_bs, "budget_seconds", budget_seconds);
      set(o_init, "init_params_path", init_params);
      set(o_out, "out_dir", out_dir);
      set(o_train, "train_size", train_size);
      set(o_test, "test_size", test_size);
      set(o_eeu, "eval_every_updates", eval_every_updates);
      set(o_tee, "test_eval_every", test_eval_every);
      auto cfg = hig::harness::config_from_json(j);
      if (cfg.out_dir.empty()) throw hig::harness::ConfigError("--out is required");
      const auto r = hig::harness::run_experiment(cfg);
      std::cout << r.status << ": " << r.updates << " updates, " << hig::harness::format_number(r.wall_ms / 1000.0)
                << " s, test loss " << hig::harness::format_number(r.initial.loss) << " -> "
                << hig::harness::format_number(r.final_test_loss()) << '\n';
      if (r.status != "ok") {
        std::cerr << r.message << '\n';
        return 3;
      }
      return 0;
    }
    if (*sw) {
      const auto points = hig::harness::sweep(read_json(grid_path), sweep_out);
      int failed = 0;
      for (const auto& p : points) {
        std::cout << p.name << ": " << p.status << ", final test loss " << hig::harness::format_number(p.final_test_loss)
                  << '\n';
        if (p.status != "ok") ++failed;
      }
      std::cout << points.size() << " points, " << failed << " not ok; summary in " << sweep_out << "/summary.csv\n";
      return 0;
    }
    if (*dg) {
      const auto d = hig::harness::diagnose(run_dir);
      std::cout << d.checkpoint_updates.size() << " checkpoints; " << d.saturated.size()
                << " saturated neurons at the last checkpoint";
      for (auto n : d.saturated) std::cout << ' ' << n;
      std::cout << '\n';
      if (!d.trajectory.empty())
        std::cout << "probe output " << d.trajectory.back().transpose() << " target " << d.probe_target.transpose()
                  << '\n';
      return 0;
    }
    if (*ex) {
      hig::data::Dataset d;
      const auto e = hig::harness::parse_experiment(ex_experiment);
      switch (e) {
        case hig::harness::Experiment::Toy: d = hig::data::gen_toy(ex_n, ex_seed); break;
        case hig::harness::Experiment::Oscillator: d = hig::data::gen_oscillator(ex_n, ex_seed); break;
        case hig::harness::Experiment::Poisson: d = hig::data::gen_poisson(ex_n, ex_seed); break;
        case hig::harness::Experiment::Quantum: d = hig::data::gen_quantum(ex_n, ex_seed); break;
      }
      hig::data::export_csv(d, ex_out);
      return 0;
    }
  } catch (const hig::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
