#pragma once

#include <vector>

#include "nmqsd/common.hpp"
#include "nmqsd/spectra.hpp"

namespace nmqsd {

/// Ensemble-averaged observables on the sample grid.
struct ObservableSeries {
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> position;
  std::vector<double> momentum;
  std::vector<double> trace;
  std::vector<double> purity;
  std::vector<double> purity_normalized;
  /// level_energies[k][n] = e_n * M[|c_n(t_k)|^2]
  std::vector<RealVector> level_energies;

  [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// rho_{nm}(t) = M[c_n c_m^*] per sampled time.
struct ReducedDensity {
  std::vector<ComplexMatrix> rho;
};

double energy_expectation(const ComplexVector& c, const SystemSpectrum& spectrum,
                          bool trace_normalized = false);
double position_expectation(const ComplexVector& c, const SystemSpectrum& spectrum);
double momentum_expectation(const ComplexVector& c, const SystemSpectrum& spectrum);

/// P = sum_{nm} rho_nm rho_mn.
double purity(const ComplexMatrix& rho);
double purity(const ReducedDensity& rho, std::size_t time_index);

/// Fills every observable column at one time from a density matrix.
void append_observables(ObservableSeries& series, double t, const ComplexMatrix& rho,
                        const SystemSpectrum& spectrum);

/// e_n * rho_nn(t) for every level and sampled time.
RealMatrix level_energy_series(const ReducedDensity& rho, const SystemSpectrum& spectrum);

}  // namespace nmqsd
