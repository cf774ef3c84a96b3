#pragma once

// Experiment runner: configuration, problem assembly (network + solver graph +
// data + loss), the training loop for every optimizer, metrics/metadata output,
// sweeps over configuration grids, and post-hoc diagnostics.

#include "hig/autodiff.hpp"
#include "hig/datasets.hpp"
#include "hig/nn.hpp"
#include "hig/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hig::harness {

using Json = nlohmann::json;

/// Invalid or inconsistent configuration; reported before any training.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Experiment { Toy, Oscillator, Poisson, Quantum };
const char* experiment_name(Experiment e);
Experiment parse_experiment(const std::string& name);

struct ExperimentConfig {
  std::string experiment = "toy";
  std::string optimizer = "adam";  // sgd | adagrad | adadelta | rmsprop | adam | gn | hig
  double eta = 1e-3;
  std::int64_t batch_size = 256;
  double tau = 0.0;
  double kappa = -0.5;
  double beta = 0.0;
  double gamma = 1.0;
  std::uint64_t seed = 0;
  std::int64_t budget_updates = 0;  // 0 = unlimited
  double budget_seconds = 0.0;      // 0 = unlimited
  std::int64_t test_eval_every = 1;     // epochs
  std::int64_t eval_every_updates = 0;  // overrides the epoch cadence when > 0; poisson defaults to 10
  std::string init_params_path;
  std::string out_dir;

  // Data and diagnostics knobs; 0 picks the experiment default.
  std::int64_t train_size = 0;
  std::int64_t test_size = 0;
  double oscillator_range = 1.0;
  std::int64_t poisson_modes = 4;
  std::int64_t poisson_max_wavenumber = 4;
  double saturation_threshold = 0.1;
  std::int64_t checkpoint_every_evals = -1;  // -1: every eval for toy, never otherwise
  double probe_x = 0.5;
  // Loss whose y-gradients fill the GN/HIG stack: "mean" (batch-mean loss) or
  // "sum" (summed per-sample losses).
  std::string loss_reduction = "mean";

  /// Resolves experiment-dependent defaults in place.
  void resolve_defaults();
  /// Throws ConfigError.
  void validate() const;
  bool uses_stack() const { return optimizer == "gn" || optimizer == "hig"; }
};

ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& cfg);

/// Network, differentiable model and data for one experiment.
struct Problem {
  Experiment kind = Experiment::Toy;
  nn::MlpSpec spec;
  ad::Graph graph;  // input: network input, output: physics output y
  data::Dataset train;  // empty for the streamed poisson source
  data::Dataset test;
  std::int64_t epoch_size = 0;
  std::vector<std::string> extra_names;

  Index out_dim() const { return graph.output_dim(); }
};

Problem make_problem(const ExperimentConfig& cfg);

/// Training batch `update` of the streamed poisson source.
data::Dataset poisson_batch(const ExperimentConfig& cfg, std::int64_t update);

/// Per-sample loss l(y, target); writes dl/dy when `grad` is non-null.
double sample_loss(const Problem& p, const Vector& y, const Vector& target, Vector* grad);

struct Evaluation {
  double loss = 0.0;
  std::vector<double> extras;
};

/// Mean loss and extras over a data set.
Evaluation evaluate_dataset(const Problem& p, const ad::ParamVector& theta, const data::Dataset& d);

struct MetricsRecord {
  double wall_ms = 0.0;
  double epoch = 0.0;
  std::int64_t update = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::vector<double> extras;
};

struct RunResult {
  std::string status = "ok";  // ok | diverged
  std::string message;
  std::vector<std::string> extra_names;
  std::vector<MetricsRecord> rows;
  ad::ParamVector theta;
  ad::ParamVector initial_theta;
  Evaluation initial;
  std::int64_t updates = 0;
  double wall_ms = 0.0;

  double final_test_loss() const { return rows.empty() ? initial.loss : rows.back().test_loss; }
};

/// Trains per `cfg`. When cfg.out_dir is non-empty writes metrics.csv,
/// meta.json, params.bin and checkpoints there. Divergence is reported through
/// the result status; configuration problems throw ConfigError.
RunResult run_experiment(ExperimentConfig cfg);

/// Loss and mean gradient of a batch (gradient-family path).
double batch_gradient(const Problem& p, ad::Tape& tape, const ad::ParamVector& theta, std::span<const Vector> inputs,
                      std::span<const Vector> targets, Vector& mean_grad);

enum class LossReduction { Mean, Sum };

/// Mean loss of a batch and its stacked Jacobian / loss gradients (GN/HIG
/// path). With Mean the stacked gradients belong to the batch-mean loss, so
/// jac^T * loss_grads is the ordinary mean batch gradient.
double batch_stack(const Problem& p, ad::Tape& tape, const ad::ParamVector& theta, std::span<const Vector> inputs,
                   std::span<const Vector> targets, ad::JacobianStack& stack,
                   LossReduction reduction = LossReduction::Mean);

struct SweepPoint {
  std::string name;
  std::string dir;
  std::string status;
  double final_test_loss = 0.0;
  std::int64_t updates = 0;
  double wall_ms = 0.0;
};

/// Grid file: {"base": {config}, "grid": {key: [values...]}}. One run directory
/// per Cartesian point plus summary.csv. Failed points are recorded and the
/// sweep continues.
std::vector<SweepPoint> sweep(const Json& grid, const std::filesystem::path& out_dir);

/// Recomputes neuron statistics for every checkpoint of a run and, for toy
/// runs, the output trajectory of the probe input. Writes saturation.csv and
/// trajectory.csv into the run directory.
struct Diagnosis {
  std::vector<std::int64_t> checkpoint_updates;
  std::vector<nn::NeuronStats> stats;
  std::vector<Index> saturated;  // relative to the first checkpoint
  std::vector<Vector> trajectory;
  Vector probe_target;
};
Diagnosis diagnose(const std::filesystem::path& run_dir);

std::string format_number(double v);

}  // namespace hig::harness
