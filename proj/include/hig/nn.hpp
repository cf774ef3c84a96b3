#pragma once

// Fully connected networks on top of the autodiff graph: layout of the flat
// parameter vector, initialization, forward graphs, hidden-neuron statistics
// and a small binary parameter file format.

#include "hig/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hig::nn {

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1 };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// Layer widths from input to output. Hidden layers use `hidden_activation`,
/// the output layer is linear.
struct MlpSpec {
  std::vector<Index> layer_sizes;
  Activation hidden_activation = Activation::Tanh;

  std::size_t layer_count() const { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }
  Index input_dim() const { return layer_sizes.front(); }
  Index output_dim() const { return layer_sizes.back(); }
  Index hidden_neurons() const;

  /// Throws std::invalid_argument unless there is at least one hidden layer
  /// and every width is positive.
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

Index param_count(const MlpSpec& spec);

/// Per-layer slices: weight block followed by bias, layer by layer.
std::vector<ad::LayerSlice> layout(const MlpSpec& spec);

/// Glorot-uniform weights for tanh networks, He-normal for relu networks,
/// zero biases.
ad::ParamVector init(const MlpSpec& spec, std::uint64_t seed);

/// Variance the initializer targets for the weights of `layer`.
double init_weight_variance(const MlpSpec& spec, std::size_t layer);

/// Appends the network to `g` reading from node `x`. If `hidden` is given it
/// receives the post-activation node of every hidden layer.
ad::NodeId append_mlp(ad::Graph& g, const MlpSpec& spec, ad::NodeId x, std::vector<ad::NodeId>* hidden = nullptr);

/// Graph whose input is the network input and whose output is the network
/// output.
ad::Graph build_forward_graph(const MlpSpec& spec);

/// Mean and standard deviation over an input set of every hidden neuron's
/// post-activation output, hidden layers concatenated in order. The standard
/// deviation is the population value.
struct NeuronStats {
  Vector mean;
  Vector stddev;
};

NeuronStats neuron_saturation_stats(const MlpSpec& spec, const ad::ParamVector& theta, std::span<const Vector> inputs);

/// Indices of neurons whose standard deviation fell below `threshold` times
/// its reference value.
std::vector<Index> saturated_neurons(const Vector& reference_std, const Vector& current_std, double threshold = 0.1);

// Parameter files: "HIGP", u32 version, u64 seed, u32 layer count + 1,
// u64 widths, u8 activation, u64 value count, little-endian doubles.

struct ParamFile {
  MlpSpec spec;
  std::uint64_t seed = 0;
  ad::ParamVector theta;
};

void save_params(const std::filesystem::path& path, const MlpSpec& spec, std::uint64_t seed,
                 const ad::ParamVector& theta);
ParamFile load_params(const std::filesystem::path& path);

}  // namespace hig::nn
