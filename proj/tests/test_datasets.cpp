#include "hig/datasets.hpp"
#include "hig/physics.hpp"

#include "support.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

namespace hig {
namespace {

using test::max_abs;

TEST(RngStream, MatchesReferenceEngine) {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the C++ standard.
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(RngStream, UniformAndNormalMoments) {
  Rng rng(1);
  double s = 0, sq = 0, ns = 0, nsq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    sq += u * u;
    const double z = rng.normal();
    ns += z;
    nsq += z * z;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - 0.25, 1.0 / 12.0, 0.002);
  EXPECT_NEAR(ns / n, 0.0, 0.01);
  EXPECT_NEAR(nsq / n, 1.0, 0.01);
}

TEST(RngStream, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (std::uint64_t role = 1; role <= 5; ++role) seen.insert(derive_seed(seed, role));
  EXPECT_EQ(seen.size(), 100u);
}

TEST(ToyData, TargetsAndInputRange) {
  const auto d = data::gen_toy(4000, 3);
  ASSERT_EQ(d.size(), 4000u);
  double mean = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = d.inputs[i][0];
    ASSERT_GE(x, -1.0);
    ASSERT_LT(x, 1.0);
    EXPECT_EQ(d.targets[i], (Vector{{std::sin(6.0 * x), std::cos(9.0 * x)}}));
    mean += x;
  }
  mean /= 4000.0;
  // Three standard errors of a U[-1, 1] mean.
  EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(1.0 / 3.0 / 4000.0));
}

TEST(ToyData, SeedDeterminism) {
  const auto a = data::gen_toy(100, 9), b = data::gen_toy(100, 9), c = data::gen_toy(100, 10);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_NE(a.inputs, c.inputs);
}

TEST(OscillatorData, RangeDeterminismAndDisjointSeeds) {
  const auto a = data::gen_oscillator(500, derive_seed(0, 1), 0.5);
  const auto b = data::gen_oscillator(500, derive_seed(0, 1), 0.5);
  const auto t = data::gen_oscillator(500, derive_seed(0, 2), 0.5);
  EXPECT_EQ(a.inputs, b.inputs);
  std::set<double> train_first;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.inputs[i], a.targets[i]);
    EXPECT_LE(a.inputs[i].cwiseAbs().maxCoeff(), 0.5);
    train_first.insert(a.inputs[i][0]);
  }
  for (const auto& v : t.inputs) EXPECT_EQ(train_first.count(v[0]), 0u);
}

TEST(PoissonData, ZeroMeanInsideModeSpan) {
  const auto d = data::gen_poisson(200, 4);
  const Matrix basis = data::poisson_mode_basis();
  EXPECT_LE(max_abs(basis.transpose() * basis - Matrix::Identity(16, 16)), 1e-13);
  for (const auto& rho : d.inputs) {
    ASSERT_EQ(rho.size(), 64);
    EXPECT_NEAR(rho.sum(), 0.0, 1e-12);
    EXPECT_LE(max_abs(rho - basis * (basis.transpose() * rho)), 1e-12);
    EXPECT_GT(rho.norm(), 0.0);
  }
  EXPECT_EQ(d.inputs, data::gen_poisson(200, 4).inputs);
  EXPECT_NE(d.inputs, data::gen_poisson(200, 5).inputs);
}

TEST(PoissonData, RejectsBadSpectrum) {
  EXPECT_THROW(data::gen_poisson(1, 0, {0, 4}), std::invalid_argument);
  EXPECT_THROW(data::gen_poisson(1, 0, {4, 9}), std::invalid_argument);
}

TEST(QuantumData, NormalizedSuperpositionsOfExcitedStates) {
  const auto d = data::gen_quantum(2000, 6);
  const auto& e = physics::eigenstates();
  double p1 = 0.0;
  for (const auto& pair : d.inputs) {
    ASSERT_EQ(pair.size(), 28);
    const auto psi = physics::from_pair(pair);
    EXPECT_NEAR(psi.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(physics::inner(e.state(0), psi)), 1e-12);
    const double w1 = std::norm(physics::inner(e.state(1), psi));
    const double w2 = std::norm(physics::inner(e.state(2), psi));
    EXPECT_NEAR(w1 + w2, 1.0, 1e-12);
    p1 += w1;
  }
  EXPECT_NEAR(p1 / 2000.0, 0.5, 0.05);
}

TEST(ExportCsv, RoundTripsExactlyWithSidecar) {
  test::TempDir dir("dataset");
  const auto d = data::gen_quantum(5, 2);
  data::export_csv(d, dir / "q.csv");
  std::ifstream in(dir / "q.csv");
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    ASSERT_EQ(vals.size(), 56u);
    for (Index k = 0; k < 28; ++k) {
      EXPECT_EQ(vals[static_cast<std::size_t>(k)], d.inputs[row][k]);
      EXPECT_EQ(vals[static_cast<std::size_t>(28 + k)], d.targets[row][k]);
    }
    ++row;
  }
  EXPECT_EQ(row, 5u);
  std::ifstream meta_in(dir / "q.csv.json");
  const auto meta = nlohmann::json::parse(meta_in);
  EXPECT_EQ(meta.at("experiment"), "quantum");
  EXPECT_EQ(meta.at("seed"), 2);
  EXPECT_EQ(meta.at("n"), 5);
  EXPECT_EQ(meta.at("input_width"), 28);
  EXPECT_EQ(meta.at("generator_version"), data::kGeneratorVersion);
}

}  // namespace
}  // namespace hig
