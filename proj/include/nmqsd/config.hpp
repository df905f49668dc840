#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmqsd/bath.hpp"
#include "nmqsd/dynamics.hpp"
#include "nmqsd/ensemble.hpp"
#include "nmqsd/fitting.hpp"
#include "nmqsd/spectra.hpp"

namespace nmqsd {

struct InitialChoice {
  InitialKind kind = InitialKind::UniformEntangled;
  double center = 16.0;
  double sigma = 3.0;
  int first = 9;
  int last = 23;
};

struct BathParams {
  int n = 10;
  double spectral_exponent = 1.0;
  double omega_min = 1.1;
  double omega_max = 2.1;
  double coupling = 0.01;
  std::uint64_t frequency_seed = 1;
  /// Non-empty pins the frequencies and overrides n / sampling.
  std::vector<double> frequencies;
};

struct SweepParams {
  std::vector<int> n_values;
  std::vector<double> s_values;
};

struct FitParams {
  std::string column = "energy";  // energy | purity
  std::vector<FitModel> models{FitModel::Exponential, FitModel::PowerLaw};
  int max_segments = 2;
};

struct OutputParams {
  std::string dir = "out";
  bool write_rho = false;
  bool write_phase = true;
};

struct ExperimentConfig {
  PotentialSpec potential = PotentialSpec::harmonic(1.0, 1.0, Grid{});
  int n_max = 15;
  InitialChoice initial;
  BathParams bath;
  IntegratorConfig integrator;
  EnsembleConfig ensemble;
  SweepParams sweep;
  FitParams fit;
  OutputParams output;
  /// Baths with N >= large_n_threshold use large_n_realizations.
  int large_n_threshold = 100;
  int large_n_realizations = 500;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

ExperimentConfig default_config(PotentialKind kind);

/// Sections `[name]` and `key = value` lines; keys may also be written
/// dotted (`system.kind = morse`). `#` starts a comment.
ExperimentConfig parse_config(const std::string& text);

/// Inverse of parse_config; doubles use the shortest round-trip form.
std::string serialize_config(const ExperimentConfig& cfg);

/// Build the bath, spectrum and initial state the config describes.
BathSpec make_bath(const ExperimentConfig& cfg);
SystemSpectrum make_spectrum(const ExperimentConfig& cfg);
InitialState make_initial_state(const ExperimentConfig& cfg);
/// Realization count for a given bath size (Morse N=100 uses fewer).
int realizations_for(const ExperimentConfig& cfg, int n_bath);

}  // namespace nmqsd
