#include "hig/nn.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace hig {
namespace {

using nn::Activation;
using nn::MlpSpec;
using test::max_abs;

const MlpSpec kToy{{1, 7, 2}, Activation::Tanh};
const MlpSpec kOscillator{{4, 20, 20, 20, 96}, Activation::Relu};
const MlpSpec kPoisson{{64, 64, 256, 64, 64}, Activation::Tanh};
const MlpSpec kQuantum{{28, 20, 20, 20, 384}, Activation::Tanh};

TEST(ParamCount, ExperimentNetworks) {
  EXPECT_EQ(nn::param_count(kOscillator), 2956);
  EXPECT_EQ(nn::param_count(kPoisson), 41408);
  EXPECT_EQ(nn::param_count(kQuantum), 9484);
  EXPECT_EQ(nn::param_count(kToy), 30);
}

TEST(ParamCount, EqualsInitLength) {
  for (const auto& s : {kToy, kOscillator, kPoisson, kQuantum}) EXPECT_EQ(nn::init(s, 1).size(), nn::param_count(s));
}

TEST(MlpSpecValidate, RejectsMissingHiddenLayerAndEmptyWidths) {
  EXPECT_THROW(nn::param_count(MlpSpec{{3, 2}, Activation::Tanh}), std::invalid_argument);
  EXPECT_THROW(nn::param_count(MlpSpec{{3, 0, 2}, Activation::Tanh}), std::invalid_argument);
  EXPECT_EQ(nn::parse_activation("relu"), Activation::Relu);
  EXPECT_THROW(nn::parse_activation("sigmoid"), std::invalid_argument);
}

TEST(Init, DeterministicZeroBiasAndTiled) {
  for (const auto& s : {kToy, kOscillator, kQuantum}) {
    const auto a = nn::init(s, 42);
    const auto b = nn::init(s, 42);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, nn::init(s, 43).values);
    EXPECT_NO_THROW(a.validate());
    for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(max_abs(a.bias(l)), 0.0);
  }
}

TEST(Init, WeightVarianceNearTarget) {
  for (const auto& s : {kOscillator, kPoisson, kQuantum}) {
    for (std::size_t l = 0; l < s.layer_count(); ++l) {
      double sum = 0.0, sq = 0.0;
      Index n = 0;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = nn::init(s, seed);
        const auto w = p.weight(l);
        sum += w.sum();
        sq += w.squaredNorm();
        n += w.size();
      }
      const double mean = sum / static_cast<double>(n);
      const double var = sq / static_cast<double>(n) - mean * mean;
      const double want = nn::init_weight_variance(s, l);
      EXPECT_NEAR(var / want, 1.0, 0.2) << "layer " << l;
    }
  }
  // Glorot for tanh, He for relu.
  EXPECT_DOUBLE_EQ(nn::init_weight_variance(kToy, 0), 2.0 / 8.0);
  EXPECT_DOUBLE_EQ(nn::init_weight_variance(kOscillator, 1), 2.0 / 20.0);
}

TEST(Init, TanhWeightsWithinGlorotLimit) {
  const auto p = nn::init(kQuantum, 3);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const double limit = std::sqrt(3.0 * nn::init_weight_variance(kQuantum, l));
    EXPECT_LE(p.weight(l).cwiseAbs().maxCoeff(), limit);
  }
}

TEST(ForwardGraph, ZeroWeightsGiveZeroOutput) {
  auto theta = nn::init(kQuantum, 0);
  theta.values.setZero();
  const auto g = nn::build_forward_graph(kQuantum);
  EXPECT_EQ(ad::evaluate(g, theta, Vector::Ones(28)), Vector::Zero(384));
}

TEST(ForwardGraph, ReluNetOnPositiveRegionIsMatrixProduct) {
  // With non-negative weights and inputs every relu passes its input through,
  // so the network collapses to a product of its layer matrices (zero bias).
  const MlpSpec s{{3, 4, 2}, Activation::Relu};
  auto theta = nn::init(s, 5);
  theta.values = theta.values.cwiseAbs();
  const Vector x{{0.2, 1.0, 0.7}};
  const Vector want = theta.weight(1) * (theta.weight(0) * x);
  EXPECT_LE(max_abs(ad::evaluate(nn::build_forward_graph(s), theta, x) - want), 1e-14);
}

TEST(ForwardGraph, ToyNetAgainstHandCodedForward) {
  Rng rng(6);
  auto theta = nn::init(kToy, 7);
  theta.values = test::random_vector(rng, 30);
  const auto g = nn::build_forward_graph(kToy);
  for (double x : {-0.9, -0.1, 0.0, 0.4, 1.0}) {
    double y0 = theta.values[28], y1 = theta.values[29];
    for (int h = 0; h < 7; ++h) {
      const double a = std::tanh(theta.values[h] * x + theta.values[7 + h]);
      y0 += theta.values[14 + 2 * h] * a;
      y1 += theta.values[14 + 2 * h + 1] * a;
    }
    const Vector got = ad::evaluate(g, theta, Vector::Constant(1, x));
    EXPECT_NEAR(got[0], y0, 1e-14);
    EXPECT_NEAR(got[1], y1, 1e-14);
  }
}

TEST(NeuronStats, ZeroWeightsGiveZeroStd) {
  auto theta = nn::init(kToy, 0);
  theta.values.setZero();
  const std::vector<Vector> inputs{Vector::Constant(1, -0.5), Vector::Constant(1, 0.25), Vector::Constant(1, 0.9)};
  const auto st = nn::neuron_saturation_stats(kToy, theta, inputs);
  EXPECT_EQ(st.stddev, Vector::Zero(7));
  EXPECT_EQ(nn::saturated_neurons(st.stddev, st.stddev).size(), 7u);
}

TEST(NeuronStats, SingleTanhNeuronOnSymmetricInputs) {
  const MlpSpec s{{1, 1, 1}, Activation::Tanh};
  auto theta = nn::init(s, 0);
  theta.values.setZero();
  theta.values[0] = 1.0;
  const std::vector<Vector> inputs{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  const auto st = nn::neuron_saturation_stats(s, theta, inputs);
  EXPECT_NEAR(st.mean[0], 0.0, 1e-15);
  EXPECT_NEAR(st.stddev[0], std::tanh(1.0), 1e-15);
}

TEST(NeuronStats, MatchesDirectRecomputation) {
  Rng rng(8);
  auto theta = nn::init(kToy, 9);
  theta.values += 0.5 * test::random_vector(rng, 30);  // a perturbed, mid-training-like snapshot
  std::vector<Vector> inputs;
  for (int i = 0; i < 200; ++i) inputs.push_back(Vector::Constant(1, rng.uniform(-1.0, 1.0)));
  const auto st = nn::neuron_saturation_stats(kToy, theta, inputs);
  for (int h = 0; h < 7; ++h) {
    std::vector<double> acts;
    for (const auto& x : inputs) acts.push_back(std::tanh(theta.values[h] * x[0] + theta.values[7 + h]));
    double mean = 0.0;
    for (double a : acts) mean += a;
    mean /= static_cast<double>(acts.size());
    double var = 0.0;
    for (double a : acts) var += (a - mean) * (a - mean);
    var /= static_cast<double>(acts.size());
    EXPECT_NEAR(st.mean[h], mean, 1e-13);
    EXPECT_NEAR(st.stddev[h], std::sqrt(var), 1e-12);
  }
}

TEST(NeuronStats, TanhActivationsInOpenInterval) {
  Rng rng(10);
  const auto theta = nn::init(kQuantum, 11);
  std::vector<Vector> inputs;
  for (int i = 0; i < 20; ++i) inputs.push_back(test::random_vector(rng, 28));
  const auto st = nn::neuron_saturation_stats(kQuantum, theta, inputs);
  EXPECT_EQ(st.mean.size(), 60);
  EXPECT_LT(st.mean.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_THROW(nn::neuron_saturation_stats(kQuantum, theta, std::span<const Vector>(inputs.data(), 1)),
               std::invalid_argument);
}

TEST(SaturatedNeurons, ThresholdIsRelativeToReference) {
  const Vector ref{{1.0, 1.0, 0.5, 0.0}};
  const Vector cur{{0.5, 0.05, 0.049, 0.0}};
  EXPECT_EQ(nn::saturated_neurons(ref, cur, 0.1), (std::vector<Index>{1, 2, 3}));
  EXPECT_EQ(nn::saturated_neurons(ref, cur, 0.6), (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_THROW(nn::saturated_neurons(ref, Vector::Zero(3)), std::invalid_argument);
}

TEST(ParamFile, RoundTrip) {
  test::TempDir dir("params");
  const auto theta = nn::init(kOscillator, 77);
  nn::save_params(dir / "p.bin", kOscillator, 77, theta);
  const auto f = nn::load_params(dir / "p.bin");
  EXPECT_EQ(f.spec, kOscillator);
  EXPECT_EQ(f.seed, 77u);
  EXPECT_EQ(f.theta.values, theta.values);
  EXPECT_EQ(f.theta.layers.size(), theta.layers.size());
  // Header: magic, version, seed, count, widths, activation, value count.
  EXPECT_EQ(std::filesystem::file_size(dir / "p.bin"),
            4u + 4u + 8u + 4u + 5u * 8u + 1u + 8u + 2956u * 8u);
}

TEST(ParamFile, RejectsCorruptFiles) {
  test::TempDir dir("params_bad");
  EXPECT_THROW(nn::load_params(dir / "missing.bin"), std::runtime_error);
  std::ofstream(dir / "junk.bin") << "not a parameter file";
  EXPECT_THROW(nn::load_params(dir / "junk.bin"), std::runtime_error);

  nn::save_params(dir / "ok.bin", kToy, 1, nn::init(kToy, 1));
  std::filesystem::resize_file(dir / "ok.bin", std::filesystem::file_size(dir / "ok.bin") - 8);
  EXPECT_THROW(nn::load_params(dir / "ok.bin"), std::runtime_error);
  EXPECT_THROW(nn::save_params(dir / "x.bin", kToy, 1, nn::init(kOscillator, 1)), std::invalid_argument);
}

}  // namespace
}  // namespace hig
