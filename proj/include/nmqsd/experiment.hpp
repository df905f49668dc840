#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nmqsd/config.hpp"
#include "nmqsd/fitting.hpp"
#include "nmqsd/observables.hpp"

namespace nmqsd {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

/// Maps the error taxonomy onto exit codes (1 for anything else).
int exit_code_for(const std::exception& e);

struct RunSummary {
  std::filesystem::path dir;
  int n_bath = 0;
  double spectral_exponent = 1.0;
  std::optional<RegimeSegmentation> fit;
  std::string fit_error;
};

/// One ensemble run into `dir`: observables, levels, optional rho and phase
/// portrait, fits, manifest, frequencies and the config echo.
RunSummary run_single(const ExperimentConfig& cfg, const SystemSpectrum& spectrum,
                      const std::filesystem::path& dir);

/// Runs every (s, N) pair of the sweep into subdirectories of output.dir and
/// writes scaling.csv plus scaling_fits.csv.
std::vector<RunSummary> run_sweep(const ExperimentConfig& cfg);

/// Single run or sweep, whichever the config asks for. Errors are reported
/// on stderr and turned into exit codes.
int run_experiment(const ExperimentConfig& cfg);

void write_spectrum(const SystemSpectrum& spectrum, const std::filesystem::path& dir);

/// Exact small-bath reference into dir/oracle.csv (observables.csv layout).
void run_oracle(const ExperimentConfig& cfg, int fock_cut, const std::filesystem::path& dir);

void write_observables(const ObservableSeries& obs, const std::filesystem::path& file,
                       const std::string& kind = "observables");
ObservableSeries read_observables(const std::filesystem::path& file);
void write_fits(const RegimeSegmentation& seg, const std::filesystem::path& file);
void write_fit_list(const std::vector<FitResult>& fits, const std::filesystem::path& file);

/// Segments one observable column. With `window`, samples outside it are dropped.
RegimeSegmentation fit_series(const ObservableSeries& obs, const std::string& column,
                              const std::vector<FitModel>& models, int max_segments,
                              std::optional<FitWindow> window = std::nullopt);

/// Shortest round-trip decimal form.
std::string format_double(double x);

}  // namespace nmqsd
