#include "hig/datasets.hpp"

#include "hig/physics.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace hig::data {

namespace {

Vector sine_mode(int kr, int kc) {
  Vector m(physics::kPoissonSize);
  const double side = static_cast<double>(physics::kPoissonSide + 1);
  for (Index r = 0; r < physics::kPoissonSide; ++r)
    for (Index c = 0; c < physics::kPoissonSide; ++c)
      m[r * physics::kPoissonSide + c] = std::sin(std::numbers::pi * kr * static_cast<double>(r + 1) / side) *
                                         std::sin(std::numbers::pi * kc * static_cast<double>(c + 1) / side);
  return m;
}

}  // namespace

Dataset gen_toy(std::size_t n, std::uint64_t seed) {
  Dataset d{"toy", seed, {}, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    d.inputs.push_back(Vector::Constant(1, x));
    d.targets.push_back(Vector{{std::sin(6.0 * x), std::cos(9.0 * x)}});
  }
  return d;
}

Dataset gen_oscillator(std::size_t n, std::uint64_t seed, double range) {
  Dataset d{"oscillator", seed, {}, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Vector t(4);
    for (Index k = 0; k < 4; ++k) t[k] = rng.uniform(-range, range);
    d.inputs.push_back(t);
    d.targets.push_back(t);
  }
  return d;
}

Matrix poisson_mode_basis(int max_wavenumber) {
  Matrix b(physics::kPoissonSize, max_wavenumber * max_wavenumber);
  Index col = 0;
  for (int kr = 1; kr <= max_wavenumber; ++kr)
    for (int kc = 1; kc <= max_wavenumber; ++kc) b.col(col++) = sine_mode(kr, kc).normalized();
  return b;
}

Dataset gen_poisson(std::size_t n, std::uint64_t seed, const PoissonSpectrum& spectrum) {
  if (spectrum.modes < 1 || spectrum.max_wavenumber < 1 || spectrum.max_wavenumber > physics::kPoissonSide)
    throw std::invalid_argument("gen_poisson: invalid spectrum");
  Dataset d{"poisson", seed, {}, {}};
  // Removing the mean along the span's own projection of the constant field
  // keeps every sample inside the admissible span while zeroing its mean.
  const Matrix basis = poisson_mode_basis(spectrum.max_wavenumber);
  const Vector ones = Vector::Ones(physics::kPoissonSize);
  const Vector shift = basis * (basis.transpose() * ones);
  const double shift_mean = shift.sum();

  Rng rng(seed);
  const auto kmax = static_cast<std::uint64_t>(spectrum.max_wavenumber);
  for (std::size_t i = 0; i < n; ++i) {
    Vector rho = Vector::Zero(physics::kPoissonSize);
    for (int k = 0; k < spectrum.modes; ++k) {
      const int kr = 1 + static_cast<int>(rng.below(kmax));
      const int kc = 1 + static_cast<int>(rng.below(kmax));
      rho += rng.normal() * sine_mode(kr, kc);
    }
    rho -= (rho.sum() / shift_mean) * shift;
    d.inputs.push_back(rho);
    d.targets.push_back(rho);
  }
  return d;
}

Dataset gen_quantum(std::size_t n, std::uint64_t seed) {
  Dataset d{"quantum", seed, {}, {}};
  const auto& eig = physics::eigenstates();
  const auto psi1 = eig.state(1);
  const auto psi2 = eig.state(2);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = rng.uniform(0.0, 0.5 * std::numbers::pi);
    const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    linalg::ComplexVector psi = std::cos(theta) * std::polar(1.0, p1) * psi1 + std::sin(theta) * std::polar(1.0, p2) * psi2;
    psi.normalize();
    const Vector pair = physics::to_pair(psi);
    d.inputs.push_back(pair);
    d.targets.push_back(pair);
  }
  return d;
}

void export_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write dataset file " + path.string());
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    bool first = true;
    for (const Vector* v : {&d.inputs[i], &d.targets[i]}) {
      for (Index k = 0; k < v->size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", (*v)[k]);
        if (!first) os << ',';
        os << buf;
        first = false;
      }
    }
    os << '\n';
  }
  nlohmann::json meta = {
      {"experiment", d.experiment},
      {"seed", d.seed},
      {"n", d.size()},
      {"input_width", d.size() ? d.inputs.front().size() : 0},
      {"target_width", d.size() ? d.targets.front().size() : 0},
      {"column_order", "inputs then targets"},
      {"generator_version", kGeneratorVersion},
      {"rng", Rng::kAlgorithm},
  };
  std::ofstream(path.string() + ".json") << meta.dump(2) << '\n';
}

}  // namespace hig::data
