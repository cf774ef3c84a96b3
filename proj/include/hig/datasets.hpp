#pragma once

// Seeded data generators. Every generator is a pure function of (n, seed):
// regenerating with the same arguments gives bit-identical samples.

#include "hig/linalg.hpp"
#include "hig/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hig::data {

inline constexpr const char* kGeneratorVersion = "hig-datasets/1";

struct Dataset {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<Vector> inputs;
  std::vector<Vector> targets;

  std::size_t size() const { return inputs.size(); }
};

/// x ~ U[-1, 1], target (sin 6x, cos 9x).
Dataset gen_toy(std::size_t n, std::uint64_t seed);

/// Targets (x1, x2, p1, p2) ~ U[-range, range]^4; the network input is the
/// target itself.
Dataset gen_oscillator(std::size_t n, std::uint64_t seed, double range = 1.0);

struct PoissonSpectrum {
  int modes = 4;
  int max_wavenumber = 4;
};

/// Sources built from random low-frequency sine modes with N(0, 1)
/// amplitudes, shifted to zero mean inside the admissible mode span. Input and
/// target are both the source.
Dataset gen_poisson(std::size_t n, std::uint64_t seed, const PoissonSpectrum& spectrum = {});

/// Random superpositions cos(t) e^{i p1} Psi1 + sin(t) e^{i p2} Psi2, pair
/// encoded; input and target coincide.
Dataset gen_quantum(std::size_t n, std::uint64_t seed);

/// Orthonormal basis (64 x k) of the sine modes the Poisson generator draws from.
Matrix poisson_mode_basis(int max_wavenumber = 4);

/// One record per line, inputs then targets as %.17g, plus a JSON sidecar at
/// `<path>.json` naming experiment, seed, n, widths and generator version.
void export_csv(const Dataset& d, const std::filesystem::path& path);

}  // namespace hig::data
