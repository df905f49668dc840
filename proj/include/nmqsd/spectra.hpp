#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "nmqsd/common.hpp"

namespace nmqsd {

enum class PotentialKind { Harmonic, Morse };

struct Grid {
  double r_min = -7.4;
  double r_max = 20.0;
  double step = 1e-3;

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] double at(std::size_t i) const { return r_min + static_cast<double>(i) * step; }
};

/// One-dimensional confining potential in units with hbar = 1.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::Harmonic;
  double mass = 1.0;
  double omega = 1.0;  // harmonic
  double depth = 30.0;  // Morse D_e
  double a = 0.08;  // Morse inverse length
  double r_e = 0.0;  // Morse equilibrium position
  Grid grid{};

  [[nodiscard]] double operator()(double r) const;
  /// Throws ConfigError when a field violates its range.
  void validate() const;

  static PotentialSpec harmonic(double omega, double mass, Grid grid);
  static PotentialSpec morse(double depth, double a, double r_e, double mass, Grid grid);
};

enum class SpectrumProvenance { AnalyticHO, Numerov };

/// Eigenbasis of the system Hamiltonian. Level labels are 1-based in the
/// physics; storage is 0-based.
struct SystemSpectrum {
  RealVector energies;
  RealMatrix q;  // position matrix elements, real symmetric
  ComplexMatrix p;  // momentum matrix elements, Hermitian and purely imaginary
  SpectrumProvenance provenance = SpectrumProvenance::AnalyticHO;
  /// Eigenfunctions on `grid_r` (Numerov provenance only), one column per level.
  RealMatrix wavefunctions;
  RealVector grid_r;

  [[nodiscard]] int n_max() const { return static_cast<int>(energies.size()); }
  [[nodiscard]] bool has_momentum() const { return p.size() > 0; }
  /// Keep levels [first, last] (1-based, inclusive).
  [[nodiscard]] SystemSpectrum truncated(int first, int last) const;
};

SystemSpectrum ho_spectrum(double omega, double mass, int n_max);

enum class Direction { LeftToRight, RightToLeft };

struct NumerovSolution {
  RealVector psi;
  int node_count = 0;
};

/// Three-term Numerov recurrence for psi'' = 2m(V - E) psi on the potential's
/// grid, zero at the starting end and seeded with a small value one step in.
/// Nodes are counted in the classically allowed region only.
NumerovSolution numerov_integrate(const PotentialSpec& potential, double energy,
                                  Direction direction);

struct LevelWindow {
  int first = 1;
  int last = 0;  // 0 = all bound levels
};

/// All bound levels whose outer classical turning point lies inside the grid.
SystemSpectrum morse_eigensolve(const PotentialSpec& potential,
                                std::optional<LevelWindow> window = std::nullopt);

/// Closed-form Morse level energy for level label n >= 1 (quantum number n-1).
double morse_energy_analytic(int n, const PotentialSpec& potential);

/// Highest level label for which the closed form is still increasing.
int morse_bound_level_count(const PotentialSpec& potential);

/// Composite Simpson weights for `n` uniformly spaced samples (odd n uses pure
/// Simpson; even n closes with a 3/8 panel).
RealVector simpson_weights(std::size_t n, double step);

}  // namespace nmqsd
