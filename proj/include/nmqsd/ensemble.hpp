#pragma once

#include <cstdint>

#include "nmqsd/bath.hpp"
#include "nmqsd/dynamics.hpp"
#include "nmqsd/observables.hpp"
#include "nmqsd/spectra.hpp"

namespace nmqsd {

struct EnsembleConfig {
  int n_realizations = 500;
  std::uint64_t master_seed = 2024;
  int parallel_degree = 0;  // 0 = available parallelism

  void validate() const;
};

struct EnsembleResult {
  ObservableSeries observables;
  ReducedDensity rho;
  /// max over realizations and samples of |sum |c_n|^2 - 1|
  double max_norm_drift = 0.0;
};

/// Realizations are integrated in fixed-size blocks; the reduction over
/// blocks runs in block order, so results do not depend on parallel_degree.
inline constexpr int kRealizationBlock = 16;

EnsembleResult run_ensemble(const InitialState& init, const BathSpec& bath,
                            const SystemSpectrum& spectrum, const IntegratorConfig& integrator,
                            const EnsembleConfig& ensemble);

/// Resolves parallel_degree = 0 to the machine's parallelism.
int effective_parallelism(int requested);

}  // namespace nmqsd
