#include "nmqsd/experiment.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nmqsd/bath.hpp"
#include "nmqsd/dynamics.hpp"
#include "nmqsd/ensemble.hpp"

namespace nmqsd {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
  return 1;
}

namespace {

// Output file that reports failures as IoError.
class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& kind, const std::string& columns)
      : path_(path), out_(path) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    out_ << "# nmqsd " << kind << " v" << kSchemaVersion << "\n" << columns << "\n";
  }
  ~CsvFile() = default;
  CsvFile(const CsvFile&) = delete;
  CsvFile& operator=(const CsvFile&) = delete;

  std::ostream& row() { return out_; }

  void close() {
    out_.close();
    if (!out_) throw IoError("write to " + path_.string() + " failed");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

const std::vector<double>& column_of(const ObservableSeries& obs, const std::string& name) {
  if (name == "energy") return obs.energy;
  if (name == "purity") return obs.purity;
  if (name == "purity_normalized") return obs.purity_normalized;
  if (name == "position") return obs.position;
  if (name == "trace") return obs.trace;
  throw ConfigError("unknown observable column '" + name + "'");
}

void write_levels(const ObservableSeries& obs, const fs::path& file) {
  CsvFile f(file, "levels", "t,n,level_energy");
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const std::string t = format_double(obs.times[k]);
    const RealVector& lv = obs.level_energies[k];
    for (Eigen::Index n = 0; n < lv.size(); ++n) {
      f.row() << t << ',' << n + 1 << ',' << format_double(lv[n]) << '\n';
    }
  }
  f.close();
}

void write_rho(const ReducedDensity& rho, const std::vector<double>& times, const fs::path& file) {
  CsvFile f(file, "rho", "t,n,m,re,im");
  for (std::size_t k = 0; k < rho.rho.size(); ++k) {
    const std::string t = format_double(times[k]);
    const ComplexMatrix& r = rho.rho[k];
    for (Eigen::Index n = 0; n < r.rows(); ++n)
      for (Eigen::Index m = 0; m < r.cols(); ++m) {
        f.row() << t << ',' << n + 1 << ',' << m + 1 << ',' << format_double(r(n, m).real())
                << ',' << format_double(r(n, m).imag()) << '\n';
      }
  }
  f.close();
}

void write_phase(const TrajectorySeries& traj, const SystemSpectrum& spectrum, const fs::path& file) {
  CsvFile f(file, "phase", "t,q,p");
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const ComplexVector& c = traj.states[k];
    const double norm = c.squaredNorm();
    const double q = position_expectation(c, spectrum) / norm;
    const double p = spectrum.has_momentum() ? momentum_expectation(c, spectrum) / norm : 0.0;
    f.row() << format_double(traj.times[k]) << ',' << format_double(q) << ','
            << format_double(p) << '\n';
  }
  f.close();
}

void write_frequencies(const BathSpec& bath, const fs::path& file) {
  CsvFile f(file, "frequencies", "lambda,omega");
  for (int l = 0; l < bath.size(); ++l) {
    f.row() << l + 1 << ',' << format_double(bath.frequencies[static_cast<std::size_t>(l)]) << '\n';
  }
  f.close();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write to " + file.string() + " failed");
}

void write_manifest(const ExperimentConfig& cfg, const BathSpec& bath, int realizations,
                    const fs::path& file) {
  CsvFile f(file, "manifest", "key,value");
  auto kv = [&f](const std::string& k, const std::string& v) { f.row() << k << ',' << v << '\n'; };
  kv("version", kVersion);
  kv("schema", std::to_string(kSchemaVersion));
  kv("config", "config.ini");
  kv("master_seed", std::to_string(cfg.ensemble.master_seed));
  kv("frequency_seed", std::to_string(cfg.bath.frequency_seed));
  kv("realizations", std::to_string(realizations));
  kv("realization_block", std::to_string(kRealizationBlock));
  kv("n_bath", std::to_string(bath.size()));
  kv("coupling", format_double(bath.coupling));
  for (int l = 0; l < bath.size(); ++l) {
    kv("omega_" + std::to_string(l + 1), format_double(bath.frequencies[static_cast<std::size_t>(l)]));
  }
  f.close();
}

}  // namespace

void write_observables(const ObservableSeries& obs, const fs::path& file, const std::string& kind) {
  CsvFile f(file, kind, "t,energy,position,momentum,trace,purity,purity_normalized");
  for (std::size_t k = 0; k < obs.size(); ++k) {
    f.row() << format_double(obs.times[k]) << ',' << format_double(obs.energy[k]) << ','
            << format_double(obs.position[k]) << ',' << format_double(obs.momentum[k]) << ','
            << format_double(obs.trace[k]) << ',' << format_double(obs.purity[k]) << ','
            << format_double(obs.purity_normalized[k]) << '\n';
  }
  f.close();
}

ObservableSeries read_observables(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  const std::vector<std::string> expected{"t",     "energy", "position",         "momentum",
                                          "trace", "purity", "purity_normalized"};
  ObservableSeries obs;
  std::string line;
  bool header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      if (cells != expected) {
        throw ConfigError(file.string() + ": unexpected columns '" + line + "'");
      }
      header = true;
      continue;
    }
    if (cells.size() != expected.size()) {
      throw ConfigError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(expected.size()) + " fields");
    }
    std::vector<double> v(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const char* end = cells[i].data() + cells[i].size();
      const auto [ptr, ec] = std::from_chars(cells[i].data(), end, v[i]);
      if (ec != std::errc() || ptr != end) {
        throw ConfigError(file.string() + ":" + std::to_string(line_no) + ": bad number '" +
                          cells[i] + "'");
      }
    }
    obs.times.push_back(v[0]);
    obs.energy.push_back(v[1]);
    obs.position.push_back(v[2]);
    obs.momentum.push_back(v[3]);
    obs.trace.push_back(v[4]);
    obs.purity.push_back(v[5]);
    obs.purity_normalized.push_back(v[6]);
  }
  if (!header) throw ConfigError(file.string() + ": missing header row");
  return obs;
}

void write_fit_list(const std::vector<FitResult>& fits, const fs::path& file) {
  CsvFile f(file, "fits", "segment,model,t_lo,t_hi,exponent,prefactor,sse");
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const FitResult& r = fits[i];
    f.row() << i + 1 << ',' << to_string(r.model) << ',' << format_double(r.window.lo) << ','
            << format_double(r.window.hi) << ',' << format_double(r.exponent) << ','
            << format_double(r.prefactor) << ',' << format_double(r.sse) << '\n';
  }
  f.close();
}

void write_fits(const RegimeSegmentation& seg, const fs::path& file) {
  write_fit_list(seg.segments, file);
}

RegimeSegmentation fit_series(const ObservableSeries& obs, const std::string& column,
                              const std::vector<FitModel>& models, int max_segments,
                              std::optional<FitWindow> window) {
  const std::vector<double>& y = column_of(obs, column);
  std::vector<double> t, v;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    if (window && (obs.times[k] < window->lo || obs.times[k] > window->hi)) continue;
    t.push_back(obs.times[k]);
    v.push_back(y[k]);
  }
  return detect_regimes(t, v, max_segments, models);
}

void write_spectrum(const SystemSpectrum& spectrum, const fs::path& dir) {
  ensure_dir(dir);
  CsvFile levels(dir / "spectrum.csv", "spectrum", "n,energy");
  for (int n = 0; n < spectrum.n_max(); ++n) {
    levels.row() << n + 1 << ',' << format_double(spectrum.energies[n]) << '\n';
  }
  levels.close();
  CsvFile elems(dir / "matrix_elements.csv", "matrix_elements", "n,m,q_nm,re_p_nm,im_p_nm");
  for (int n = 0; n < spectrum.n_max(); ++n)
    for (int m = 0; m < spectrum.n_max(); ++m) {
      const Complex p = spectrum.has_momentum() ? spectrum.p(n, m) : Complex{};
      elems.row() << n + 1 << ',' << m + 1 << ',' << format_double(spectrum.q(n, m)) << ','
                  << format_double(p.real()) << ',' << format_double(p.imag()) << '\n';
    }
  elems.close();
}

RunSummary run_single(const ExperimentConfig& cfg, const SystemSpectrum& spectrum,
                      const fs::path& dir) {
  cfg.validate();
  ensure_dir(dir);
  const BathSpec bath = make_bath(cfg);
  const InitialState init = make_initial_state(cfg);
  EnsembleConfig ens = cfg.ensemble;
  ens.n_realizations = realizations_for(cfg, bath.size());

  ExperimentConfig echo = cfg;
  echo.output.dir = dir.string();
  echo.sweep = {};
  echo.ensemble.n_realizations = ens.n_realizations;
  echo.large_n_realizations = ens.n_realizations;
  write_text(dir / "config.ini", serialize_config(echo));
  write_manifest(cfg, bath, ens.n_realizations, dir / "manifest.csv");
  write_frequencies(bath, dir / "frequencies.csv");

  const EnsembleResult result = run_ensemble(init, bath, spectrum, cfg.integrator, ens);
  write_observables(result.observables, dir / "observables.csv");
  write_levels(result.observables, dir / "levels.csv");
  if (cfg.output.write_rho) write_rho(result.rho, result.observables.times, dir / "rho.csv");
  if (cfg.output.write_phase) {
    // realization 0 of the ensemble
    const NoiseRealization noise =
        NoiseRealization::draw(bath.size(), realization_seed(cfg.ensemble.master_seed, 0));
    const TrajectorySeries traj = integrate_trajectory(init, bath, spectrum, noise, cfg.integrator);
    write_phase(traj, spectrum, dir / "phase.csv");
  }

  RunSummary summary;
  summary.dir = dir;
  summary.n_bath = bath.size();
  summary.spectral_exponent = cfg.bath.spectral_exponent;
  try {
    summary.fit = fit_series(result.observables, cfg.fit.column, cfg.fit.models, cfg.fit.max_segments);
    write_fits(*summary.fit, dir / "fits.csv");
  } catch (const ConfigError& e) {
    // a series that cannot be segmented (e.g. N = 0) still yields a run
    summary.fit_error = e.what();
    write_fit_list({}, dir / "fits.csv");
  }
  return summary;
}

std::vector<RunSummary> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path root(cfg.output.dir);
  ensure_dir(root);
  const SystemSpectrum spectrum = make_spectrum(cfg);
  write_spectrum(spectrum, root);

  const std::vector<int> ns = cfg.sweep.n_values.empty() ? std::vector<int>{cfg.bath.n}
                                                         : cfg.sweep.n_values;
  const bool s_sweep = !cfg.sweep.s_values.empty();
  const std::vector<double> ss = s_sweep ? cfg.sweep.s_values
                                         : std::vector<double>{cfg.bath.spectral_exponent};
  std::vector<RunSummary> runs;
  for (double s : ss) {
    for (int n : ns) {
      ExperimentConfig one = cfg;
      one.sweep = {};
      one.bath.n = n;
      one.bath.spectral_exponent = s;
      fs::path dir = root;
      if (s_sweep) dir /= "s" + format_double(s);
      dir /= "N" + std::to_string(n);
      std::clog << "run N=" << n << " s=" << format_double(s) << " -> " << dir.string() << "\n";
      runs.push_back(run_single(one, spectrum, dir));
    }
  }

  CsvFile scaling(root / "scaling.csv", "scaling",
                  "s,n,alpha,segments,breakpoint,single_segment");
  for (const RunSummary& r : runs) {
    scaling.row() << format_double(r.spectral_exponent) << ',' << r.n_bath << ',';
    if (r.fit) {
      const double bp = r.fit->breakpoints.empty() ? 0.0 : r.fit->breakpoints.front();
      scaling.row() << format_double(r.fit->segments.front().exponent) << ','
                    << r.fit->segments.size() << ',' << format_double(bp) << ','
                    << (r.fit->single_segment ? 1 : 0) << '\n';
    } else {
      scaling.row() << "nan,0,nan,1\n";
    }
  }
  scaling.close();

  // alpha(N) laws for every s with enough fitted points
  std::vector<FitResult> laws;
  for (double s : ss) {
    std::vector<double> n, alpha;
    for (const RunSummary& r : runs) {
      if (r.spectral_exponent != s || !r.fit || r.n_bath == 0) continue;
      n.push_back(r.n_bath);
      alpha.push_back(r.fit->segments.front().exponent);
    }
    if (n.size() >= 3) {
      const auto q = fit_exponent_scaling(n, alpha, ScalingModel::Quadratic);
      laws.insert(laws.end(), q.begin(), q.end());
    }
    bool positive = true;
    for (double a : alpha) positive = positive && a > 0.0;
    if (positive && n.size() >= 2 * static_cast<std::size_t>(kMinScalingPointsPerSide)) {
      const auto two = fit_exponent_scaling(n, alpha, ScalingModel::TwoPowerLaws);
      laws.insert(laws.end(), two.begin(), two.end());
    }
  }
  write_fit_list(laws, root / "scaling_fits.csv");
  return runs;
}

int run_experiment(const ExperimentConfig& cfg) {
  try {
    if (!cfg.sweep.n_values.empty() || !cfg.sweep.s_values.empty()) {
      run_sweep(cfg);
    } else {
      const SystemSpectrum spectrum = make_spectrum(cfg);
      run_single(cfg, spectrum, cfg.output.dir);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

void run_oracle(const ExperimentConfig& cfg, int fock_cut, const fs::path& dir) {
  cfg.validate();
  ensure_dir(dir);
  const BathSpec bath = make_bath(cfg);
  const SystemSpectrum spectrum = make_spectrum(cfg);
  const InitialState init = make_initial_state(cfg);
  const ObservableSeries obs = exact_small_bath_reference(init, bath, spectrum, fock_cut, cfg.integrator);
  write_observables(obs, dir / "oracle.csv", "oracle");
  write_frequencies(bath, dir / "frequencies.csv");
}

}  // namespace nmqsd
