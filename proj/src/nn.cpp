#include "hig/nn.hpp"

#include "hig/rng.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace hig::nn {

static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");

const char* activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Index MlpSpec::hidden_neurons() const {
  Index n = 0;
  for (std::size_t i = 1; i + 1 < layer_sizes.size(); ++i) n += layer_sizes[i];
  return n;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 3) throw std::invalid_argument("MlpSpec: need input, at least one hidden layer and output");
  for (Index w : layer_sizes)
    if (w < 1) throw std::invalid_argument("MlpSpec: layer widths must be positive");
}

Index param_count(const MlpSpec& spec) {
  spec.validate();
  Index t = 0;
  for (std::size_t i = 0; i + 1 < spec.layer_sizes.size(); ++i)
    t += spec.layer_sizes[i] * spec.layer_sizes[i + 1] + spec.layer_sizes[i + 1];
  return t;
}

std::vector<ad::LayerSlice> layout(const MlpSpec& spec) {
  spec.validate();
  std::vector<ad::LayerSlice> out;
  Index offset = 0;
  for (std::size_t i = 0; i + 1 < spec.layer_sizes.size(); ++i) {
    ad::LayerSlice l;
    l.cols = spec.layer_sizes[i];
    l.rows = spec.layer_sizes[i + 1];
    l.weight_offset = offset;
    l.bias_offset = offset + l.weight_size();
    offset = l.bias_offset + l.rows;
    out.push_back(l);
  }
  return out;
}

double init_weight_variance(const MlpSpec& spec, std::size_t layer) {
  const double fan_in = static_cast<double>(spec.layer_sizes.at(layer));
  const double fan_out = static_cast<double>(spec.layer_sizes.at(layer + 1));
  return spec.hidden_activation == Activation::Tanh ? 2.0 / (fan_in + fan_out) : 2.0 / fan_in;
}

ad::ParamVector init(const MlpSpec& spec, std::uint64_t seed) {
  ad::ParamVector p;
  p.layers = layout(spec);
  p.values = Vector::Zero(param_count(spec));
  Rng rng(seed);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    const double var = init_weight_variance(spec, i);
    auto w = p.values.segment(l.weight_offset, l.weight_size());
    if (spec.hidden_activation == Activation::Tanh) {
      const double limit = std::sqrt(3.0 * var);
      for (Index k = 0; k < w.size(); ++k) w[k] = rng.uniform(-limit, limit);
    } else {
      const double sd = std::sqrt(var);
      for (Index k = 0; k < w.size(); ++k) w[k] = rng.normal(0.0, sd);
    }
  }
  return p;
}

ad::NodeId append_mlp(ad::Graph& g, const MlpSpec& spec, ad::NodeId x, std::vector<ad::NodeId>* hidden) {
  const auto slices = layout(spec);
  ad::NodeId h = x;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const std::string tag = "layer" + std::to_string(i);
    h = g.affine(h, slices[i], tag);
    if (i + 1 == slices.size()) break;
    h = spec.hidden_activation == Activation::Tanh ? g.tanh(h, tag + ".tanh") : g.relu(h, tag + ".relu");
    if (hidden) hidden->push_back(h);
  }
  return h;
}

ad::Graph build_forward_graph(const MlpSpec& spec) {
  ad::Graph g;
  const auto x = g.input(spec.input_dim(), "net_input");
  g.set_output(append_mlp(g, spec, x));
  return g;
}

NeuronStats neuron_saturation_stats(const MlpSpec& spec, const ad::ParamVector& theta, std::span<const Vector> inputs) {
  if (inputs.size() < 2) throw std::invalid_argument("neuron_saturation_stats: need at least two inputs");
  ad::Graph g;
  std::vector<ad::NodeId> hidden;
  const auto x = g.input(spec.input_dim(), "net_input");
  g.set_output(append_mlp(g, spec, x, &hidden));
  ad::Tape tape(g);

  const Index n_neurons = spec.hidden_neurons();
  Vector sum = Vector::Zero(n_neurons);
  Vector sq = Vector::Zero(n_neurons);
  Vector act(n_neurons);
  Vector first;
  // Shifting by the first sample keeps the one-pass variance accurate.
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    tape.forward(theta, inputs[s]);
    Index pos = 0;
    for (auto id : hidden) {
      auto v = tape.value(id);
      act.segment(pos, v.size()) = v;
      pos += v.size();
    }
    if (s == 0) first = act;
    const Vector d = act - first;
    sum += d;
    sq += d.cwiseAbs2();
  }
  const double n = static_cast<double>(inputs.size());
  NeuronStats st;
  st.mean = first + sum / n;
  st.stddev = (sq / n - (sum / n).cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  return st;
}

std::vector<Index> saturated_neurons(const Vector& reference_std, const Vector& current_std, double threshold) {
  if (reference_std.size() != current_std.size())
    throw std::invalid_argument("saturated_neurons: neuron counts differ");
  std::vector<Index> out;
  for (Index i = 0; i < current_std.size(); ++i)
    if (current_std[i] < threshold * reference_std[i] || (reference_std[i] == 0.0 && current_std[i] == 0.0))
      out.push_back(i);
  return out;
}

namespace {

constexpr char kMagic[4] = {'H', 'I', 'G', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error("truncated parameter file " + path.string());
  return v;
}

}  // namespace

void save_params(const std::filesystem::path& path, const MlpSpec& spec, std::uint64_t seed,
                 const ad::ParamVector& theta) {
  if (theta.size() != param_count(spec)) throw std::invalid_argument("save_params: parameter count does not match spec");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write parameter file " + path.string());
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, seed);
  put(os, static_cast<std::uint32_t>(spec.layer_sizes.size()));
  for (Index w : spec.layer_sizes) put(os, static_cast<std::uint64_t>(w));
  put(os, static_cast<std::uint8_t>(spec.hidden_activation));
  put(os, static_cast<std::uint64_t>(theta.size()));
  os.write(reinterpret_cast<const char*>(theta.values.data()), static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed writing parameter file " + path.string());
}

ParamFile load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open parameter file " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic))
    throw std::runtime_error("not a parameter file: " + path.string());
  if (get<std::uint32_t>(is, path) != kVersion) throw std::runtime_error("unsupported parameter file version in " + path.string());
  ParamFile f;
  f.seed = get<std::uint64_t>(is, path);
  const auto n_sizes = get<std::uint32_t>(is, path);
  if (n_sizes > 64) throw std::runtime_error("corrupt layer count in " + path.string());
  for (std::uint32_t i = 0; i < n_sizes; ++i) f.spec.layer_sizes.push_back(static_cast<Index>(get<std::uint64_t>(is, path)));
  const auto act = get<std::uint8_t>(is, path);
  if (act > 1) throw std::runtime_error("corrupt activation tag in " + path.string());
  f.spec.hidden_activation = static_cast<Activation>(act);
  const auto count = get<std::uint64_t>(is, path);
  if (static_cast<Index>(count) != param_count(f.spec))
    throw std::runtime_error("parameter count in " + path.string() + " does not match its layer sizes");
  f.theta.layers = layout(f.spec);
  f.theta.values.resize(static_cast<Index>(count));
  if (!is.read(reinterpret_cast<char*>(f.theta.values.data()), static_cast<std::streamsize>(count * sizeof(double))))
    throw std::runtime_error("truncated parameter file " + path.string());
  f.theta.validate();
  return f;
}

}  // namespace hig::nn
