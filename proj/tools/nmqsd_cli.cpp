// nmqsd: spectra, ensemble runs, sweeps, fits and the exact small-bath oracle.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmqsd/config.hpp"
#include "nmqsd/experiment.hpp"

namespace {

using namespace nmqsd;

struct Overrides {
  std::string config_file;
  std::string kind = "harmonic";
  std::string out;
  std::optional<int> n_bath;
  std::optional<double> spectral_exponent;
  std::vector<double> omega_window;
  std::optional<double> coupling;
  std::optional<std::uint64_t> freq_seed;
  std::vector<double> freq_override;
  std::optional<int> threads;
  std::optional<int> realizations;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_max;
  std::optional<double> dt;
  std::optional<int> n_max;
  std::vector<int> sweep_n;
  std::vector<double> sweep_s;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_file, "Configuration file");
  cmd->add_option("--kind", o.kind, "Potential when no config file is given")
      ->check(CLI::IsMember({"harmonic", "morse"}));
  cmd->add_option("-o,--out", o.out, "Output directory");
  cmd->add_option("--n-max", o.n_max, "Number of system levels");
}

void add_bath_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--n-bath", o.n_bath, "Number of bath oscillators");
  cmd->add_option("--spectral-exponent", o.spectral_exponent, "Spectral exponent s in [0,2]");
  cmd->add_option("--omega-window", o.omega_window, "Frequency window lo,hi")
      ->delimiter(',')
      ->expected(2);
  cmd->add_option("--coupling", o.coupling, "Uniform coupling g");
  cmd->add_option("--freq-seed", o.freq_seed, "Seed of the frequency draw");
  cmd->add_option("--freq-override", o.freq_override, "Pinned frequencies w1,w2,...")
      ->delimiter(',');
}

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--threads", o.threads, "Worker threads (default: NMQSD_THREADS or all cores)");
  cmd->add_option("--realizations", o.realizations, "Noise realizations");
  cmd->add_option("--seed", o.seed, "Master noise seed");
  cmd->add_option("--t-max", o.t_max, "Final time");
  cmd->add_option("--dt", o.dt, "RK4 step");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig load(const Overrides& o) {
  ExperimentConfig cfg = o.config_file.empty() ? parse_config("system.kind = " + o.kind + "\n")
                                               : parse_config(read_file(o.config_file));
  if (!o.out.empty()) cfg.output.dir = o.out;
  if (o.n_max) cfg.n_max = *o.n_max;
  if (o.n_bath) cfg.bath.n = *o.n_bath;
  if (o.spectral_exponent) cfg.bath.spectral_exponent = *o.spectral_exponent;
  if (o.omega_window.size() == 2) {
    cfg.bath.omega_min = o.omega_window[0];
    cfg.bath.omega_max = o.omega_window[1];
  }
  if (o.coupling) cfg.bath.coupling = *o.coupling;
  if (o.freq_seed) cfg.bath.frequency_seed = *o.freq_seed;
  if (!o.freq_override.empty()) cfg.bath.frequencies = o.freq_override;
  if (o.realizations) {
    cfg.ensemble.n_realizations = *o.realizations;
    cfg.large_n_realizations = std::min(cfg.large_n_realizations, *o.realizations);
  }
  if (o.seed) cfg.ensemble.master_seed = *o.seed;
  if (o.t_max) cfg.integrator.t_max = *o.t_max;
  if (o.dt) cfg.integrator.dt = *o.dt;
  if (!o.sweep_n.empty()) cfg.sweep.n_values = o.sweep_n;
  if (!o.sweep_s.empty()) cfg.sweep.s_values = o.sweep_s;
  if (o.threads) {
    cfg.ensemble.parallel_degree = *o.threads;
  } else if (const char* env = std::getenv("NMQSD_THREADS")) {
    try {
      cfg.ensemble.parallel_degree = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("NMQSD_THREADS: not an integer: ") + env);
    }
  }
  cfg.validate();
  return cfg;
}

std::vector<FitModel> models_from(const std::string& model, int max_segments) {
  if (model == "exp") return {FitModel::Exponential};
  if (model == "pow") return {FitModel::PowerLaw};
  if (max_segments >= 3) return {FitModel::Exponential, FitModel::Exponential, FitModel::PowerLaw};
  return {FitModel::Exponential, FitModel::PowerLaw};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Markovian quantum state diffusion with a finite oscillator bath"};
  app.require_subcommand(1);

  Overrides spec_o;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Write level energies and q/p matrix elements");
  add_config_options(spectrum_cmd, spec_o);

  Overrides run_o;
  auto* run_cmd = app.add_subcommand("run", "One ensemble run");
  add_config_options(run_cmd, run_o);
  add_bath_options(run_cmd, run_o);
  add_run_options(run_cmd, run_o);

  Overrides sweep_o;
  auto* sweep_cmd = app.add_subcommand("sweep", "Ensemble runs over bath sizes and/or spectral exponents");
  add_config_options(sweep_cmd, sweep_o);
  add_bath_options(sweep_cmd, sweep_o);
  add_run_options(sweep_cmd, sweep_o);
  sweep_cmd->add_option("--n", sweep_o.sweep_n, "Bath sizes")->delimiter(',');
  sweep_cmd->add_option("--s", sweep_o.sweep_s, "Spectral exponents")->delimiter(',');

  Overrides oracle_o;
  int fock_cut = 12;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exact system + bath reference (N <= 2)");
  add_config_options(oracle_cmd, oracle_o);
  add_bath_options(oracle_cmd, oracle_o);
  add_run_options(oracle_cmd, oracle_o);
  oracle_cmd->add_option("--fock-cut", fock_cut, "Fock states per bath oscillator");

  std::string fit_input;
  std::string fit_out;
  std::string fit_column = "energy";
  std::string fit_model = "auto";
  std::vector<double> fit_window;
  int fit_segments = 2;
  auto* fit_cmd = app.add_subcommand("fit", "Segment an observables.csv into decay regimes");
  fit_cmd->add_option("input", fit_input, "observables.csv")->required();
  fit_cmd->add_option("-o,--out", fit_out, "fits.csv path (default: stdout)");
  fit_cmd->add_option("--column", fit_column)->check(CLI::IsMember({"energy", "purity"}));
  fit_cmd->add_option("--model", fit_model)->check(CLI::IsMember({"exp", "pow", "auto"}));
  fit_cmd->add_option("--window", fit_window, "lo,hi")->delimiter(',')->expected(2);
  fit_cmd->add_option("--max-segments", fit_segments)->check(CLI::Range(1, 3));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*spectrum_cmd) {
      const ExperimentConfig cfg = load(spec_o);
      write_spectrum(make_spectrum(cfg), cfg.output.dir);
    } else if (*run_cmd) {
      ExperimentConfig cfg = load(run_o);
      cfg.sweep = {};
      return run_experiment(cfg);
    } else if (*sweep_cmd) {
      const ExperimentConfig cfg = load(sweep_o);
      run_sweep(cfg);
    } else if (*oracle_cmd) {
      const ExperimentConfig cfg = load(oracle_o);
      run_oracle(cfg, fock_cut, cfg.output.dir);
    } else if (*fit_cmd) {
      const int segments = fit_model == "auto" ? fit_segments : 1;
      std::optional<FitWindow> window;
      if (fit_window.size() == 2) window = FitWindow{fit_window[0], fit_window[1]};
      const RegimeSegmentation seg = fit_series(read_observables(fit_input), fit_column,
                                                models_from(fit_model, segments), segments, window);
      if (fit_out.empty()) {
        std::cout << "segment,model,t_lo,t_hi,exponent,prefactor,sse\n";
        for (std::size_t i = 0; i < seg.segments.size(); ++i) {
          const FitResult& r = seg.segments[i];
          std::cout << i + 1 << ',' << to_string(r.model) << ',' << format_double(r.window.lo)
                    << ',' << format_double(r.window.hi) << ',' << format_double(r.exponent)
                    << ',' << format_double(r.prefactor) << ',' << format_double(r.sse) << '\n';
        }
        if (seg.single_segment && segments > 1) std::cout << "# single segment\n";
      } else {
        write_fits(seg, fit_out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
