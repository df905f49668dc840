#include "nmqsd/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace nmqsd {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
  throw ConfigError(key + ": " + msg);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    fail(key, "expected " + std::string(std::is_integral_v<T> ? "an integer" : "a number") +
                  ", got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  fail(key, "expected true/false, got '" + v + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(parse_number<T>(key, item));
  return out;
}

FitModel parse_model(const std::string& key, const std::string& v) {
  if (v == "exp") return FitModel::Exponential;
  if (v == "pow") return FitModel::PowerLaw;
  fail(key, "unknown model '" + v + "' (exp|pow)");
}

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& v)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const std::string& k, auto field) {
      t[k] = [field](ExperimentConfig& c, const std::string& key, const std::string& v) {
        field(c) = parse_number<double>(key, v);
      };
    };
    auto integer = [&t](const std::string& k, auto field) {
      t[k] = [field](ExperimentConfig& c, const std::string& key, const std::string& v) {
        field(c) = parse_number<int>(key, v);
      };
    };
    auto boolean = [&t](const std::string& k, auto field) {
      t[k] = [field](ExperimentConfig& c, const std::string& key, const std::string& v) {
        field(c) = parse_bool(key, v);
      };
    };

    t["system.kind"] = [](ExperimentConfig&, const std::string&, const std::string&) {};
    real("system.mass", [](ExperimentConfig& c) -> double& { return c.potential.mass; });
    real("system.omega", [](ExperimentConfig& c) -> double& { return c.potential.omega; });
    real("system.depth", [](ExperimentConfig& c) -> double& { return c.potential.depth; });
    real("system.a", [](ExperimentConfig& c) -> double& { return c.potential.a; });
    real("system.r_e", [](ExperimentConfig& c) -> double& { return c.potential.r_e; });
    real("system.r_min", [](ExperimentConfig& c) -> double& { return c.potential.grid.r_min; });
    real("system.r_max", [](ExperimentConfig& c) -> double& { return c.potential.grid.r_max; });
    real("system.step", [](ExperimentConfig& c) -> double& { return c.potential.grid.step; });
    integer("system.n_max", [](ExperimentConfig& c) -> int& { return c.n_max; });

    t["initial.kind"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      if (v == "uniform") {
        c.initial.kind = InitialKind::UniformEntangled;
      } else if (v == "gaussian") {
        c.initial.kind = InitialKind::GaussianPacket;
      } else {
        fail(key, "expected uniform|gaussian, got '" + v + "'");
      }
    };
    real("initial.center", [](ExperimentConfig& c) -> double& { return c.initial.center; });
    real("initial.sigma", [](ExperimentConfig& c) -> double& { return c.initial.sigma; });
    integer("initial.first", [](ExperimentConfig& c) -> int& { return c.initial.first; });
    integer("initial.last", [](ExperimentConfig& c) -> int& { return c.initial.last; });

    integer("bath.n", [](ExperimentConfig& c) -> int& { return c.bath.n; });
    real("bath.spectral_exponent",
         [](ExperimentConfig& c) -> double& { return c.bath.spectral_exponent; });
    real("bath.omega_min", [](ExperimentConfig& c) -> double& { return c.bath.omega_min; });
    real("bath.omega_max", [](ExperimentConfig& c) -> double& { return c.bath.omega_max; });
    real("bath.coupling", [](ExperimentConfig& c) -> double& { return c.bath.coupling; });
    t["bath.frequency_seed"] = [](ExperimentConfig& c, const std::string& key,
                                  const std::string& v) {
      c.bath.frequency_seed = parse_number<std::uint64_t>(key, v);
    };
    t["bath.frequencies"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      c.bath.frequencies = parse_list<double>(key, v);
    };

    real("integrator.dt", [](ExperimentConfig& c) -> double& { return c.integrator.dt; });
    real("integrator.t_max", [](ExperimentConfig& c) -> double& { return c.integrator.t_max; });
    integer("integrator.sample_stride",
            [](ExperimentConfig& c) -> int& { return c.integrator.sample_stride; });
    t["integrator.normalization"] = [](ExperimentConfig& c, const std::string& key,
                                       const std::string& v) {
      if (v == "raw") {
        c.integrator.normalization = NormalizationPolicy::Raw;
      } else if (v == "trace") {
        c.integrator.normalization = NormalizationPolicy::TraceNormalized;
      } else {
        fail(key, "expected raw|trace, got '" + v + "'");
      }
    };
    t["integrator.picture"] = [](ExperimentConfig& c, const std::string& key,
                                 const std::string& v) {
      if (v == "interaction") {
        c.integrator.picture = Picture::Interaction;
      } else if (v == "schrodinger") {
        c.integrator.picture = Picture::Schrodinger;
      } else {
        fail(key, "expected interaction|schrodinger, got '" + v + "'");
      }
    };

    integer("ensemble.realizations",
            [](ExperimentConfig& c) -> int& { return c.ensemble.n_realizations; });
    t["ensemble.seed"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      c.ensemble.master_seed = parse_number<std::uint64_t>(key, v);
    };
    integer("ensemble.threads",
            [](ExperimentConfig& c) -> int& { return c.ensemble.parallel_degree; });
    integer("ensemble.large_n_threshold",
            [](ExperimentConfig& c) -> int& { return c.large_n_threshold; });
    integer("ensemble.large_n_realizations",
            [](ExperimentConfig& c) -> int& { return c.large_n_realizations; });

    t["sweep.n"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      c.sweep.n_values = parse_list<int>(key, v);
    };
    t["sweep.s"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      c.sweep.s_values = parse_list<double>(key, v);
    };

    t["fit.column"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      if (v != "energy" && v != "purity") fail(key, "expected energy|purity, got '" + v + "'");
      c.fit.column = v;
    };
    t["fit.models"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      c.fit.models.clear();
      for (const auto& m : split_list(v)) c.fit.models.push_back(parse_model(key, m));
    };
    integer("fit.max_segments", [](ExperimentConfig& c) -> int& { return c.fit.max_segments; });

    t["output.dir"] = [](ExperimentConfig& c, const std::string& key, const std::string& v) {
      if (v.empty()) fail(key, "empty path");
      c.output.dir = v;
    };
    boolean("output.rho", [](ExperimentConfig& c) -> bool& { return c.output.write_rho; });
    boolean("output.phase", [](ExperimentConfig& c) -> bool& { return c.output.write_phase; });
    return t;
  }();
  return table;
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

}  // namespace

ExperimentConfig default_config(PotentialKind kind) {
  ExperimentConfig c;
  if (kind == PotentialKind::Harmonic) {
    c.potential = PotentialSpec::harmonic(1.0, 1.0, Grid{});
    c.n_max = 15;
    c.initial = InitialChoice{};
    c.bath.coupling = 0.01;
    c.large_n_realizations = c.ensemble.n_realizations;
    return c;
  }
  c.potential = PotentialSpec::morse(30.0, 0.08, 0.0, 1.0, Grid{});
  c.n_max = 38;
  c.initial.kind = InitialKind::GaussianPacket;
  c.initial.center = 16.0;
  c.initial.sigma = 3.0;
  c.initial.first = 9;
  c.initial.last = 23;
  c.bath.coupling = 0.001;
  c.large_n_threshold = 100;
  c.large_n_realizations = 200;
  return c;
}

void ExperimentConfig::validate() const {
  try {
    potential.validate();
  } catch (const ConfigError& e) {
    fail("system.kind", e.what());
  }
  if (n_max < 1) fail("system.n_max", "must be >= 1");
  if (initial.kind == InitialKind::GaussianPacket) {
    if (initial.first < 1 || initial.last > n_max || initial.first > initial.last) {
      fail("initial.first", "packet window [" + std::to_string(initial.first) + "," +
                                std::to_string(initial.last) + "] must lie inside 1.." +
                                std::to_string(n_max));
    }
    if (!(initial.sigma > 0.0)) fail("initial.sigma", "must be positive");
  }
  if (bath.n < 0) fail("bath.n", "must be >= 0");
  if (!(bath.spectral_exponent >= 0.0 && bath.spectral_exponent <= 2.0)) {
    fail("bath.spectral_exponent", "must lie in [0, 2], got " + fmt(bath.spectral_exponent));
  }
  if (!(bath.omega_min > 0.0 && bath.omega_max > bath.omega_min)) {
    fail("bath.omega_min", "need 0 < omega_min < omega_max");
  }
  if (!(bath.coupling > 0.0)) fail("bath.coupling", "must be positive");
  for (double w : bath.frequencies) {
    if (!(w > 0.0)) fail("bath.frequencies", "frequencies must be positive");
  }
  try {
    integrator.validate();
  } catch (const ConfigError& e) {
    fail("integrator.dt", e.what());
  }
  if (ensemble.n_realizations < 1) fail("ensemble.realizations", "must be >= 1");
  if (ensemble.parallel_degree < 0) fail("ensemble.threads", "must be >= 0");
  if (large_n_realizations < 1) fail("ensemble.large_n_realizations", "must be >= 1");
  for (int n : sweep.n_values) {
    if (n < 0) fail("sweep.n", "bath sizes must be >= 0");
  }
  for (double s : sweep.s_values) {
    if (!(s >= 0.0 && s <= 2.0)) fail("sweep.s", "spectral exponents must lie in [0, 2]");
  }
  if (!bath.frequencies.empty() && (!sweep.n_values.empty() || !sweep.s_values.empty())) {
    fail("bath.frequencies", "pinned frequencies cannot be combined with a sweep");
  }
  if (fit.max_segments < 1 || fit.max_segments > 3) fail("fit.max_segments", "must be 1, 2 or 3");
  if (fit.models.empty()) fail("fit.models", "empty model sequence");
  if (fit.max_segments > 1 && static_cast<int>(fit.models.size()) < fit.max_segments) {
    fail("fit.models", "needs at least max_segments entries");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<Entry> entries;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  auto at = [](int line, const std::string& msg) {
    return ConfigError("line " + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw at(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw at(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw at(line_no, "expected 'key = value'");
    const std::string name = trim(line.substr(0, eq));
    if (name.empty()) throw at(line_no, "missing key");
    const std::string key =
        name.find('.') == std::string::npos && !section.empty() ? section + "." + name : name;
    if (!setters().contains(key)) throw at(line_no, "unknown key '" + key + "'");
    if (auto it = seen.find(key); it != seen.end()) {
      throw at(line_no, "duplicate key '" + key + "' (first set on line " +
                            std::to_string(it->second) + ")");
    }
    seen[key] = line_no;
    entries.push_back({key, trim(line.substr(eq + 1)), line_no});
  }

  PotentialKind kind = PotentialKind::Harmonic;
  for (const Entry& e : entries) {
    if (e.key != "system.kind") continue;
    if (e.value == "harmonic") {
      kind = PotentialKind::Harmonic;
    } else if (e.value == "morse") {
      kind = PotentialKind::Morse;
    } else {
      throw at(e.line, "system.kind: expected harmonic|morse, got '" + e.value + "'");
    }
  }
  ExperimentConfig cfg = default_config(kind);
  bool realizations_set = false;
  for (const Entry& e : entries) {
    try {
      setters().at(e.key)(cfg, e.key, e.value);
    } catch (const ConfigError& err) {
      throw at(e.line, err.what());
    }
    realizations_set = realizations_set || e.key == "ensemble.realizations";
  }
  // the HO large-N count follows an explicitly set realization count
  if (kind == PotentialKind::Harmonic && realizations_set &&
      !seen.contains("ensemble.large_n_realizations")) {
    cfg.large_n_realizations = cfg.ensemble.n_realizations;
  }
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    const std::string msg = err.what();
    const std::string key = msg.substr(0, msg.find(':'));
    const auto it = seen.find(key);
    throw it != seen.end() ? at(it->second, msg) : ConfigError("config: " + msg);
  }
  return cfg;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  const bool morse = c.potential.kind == PotentialKind::Morse;
  o << "[system]\n"
    << "kind = " << (morse ? "morse" : "harmonic") << "\n"
    << "mass = " << fmt(c.potential.mass) << "\n"
    << "omega = " << fmt(c.potential.omega) << "\n"
    << "depth = " << fmt(c.potential.depth) << "\n"
    << "a = " << fmt(c.potential.a) << "\n"
    << "r_e = " << fmt(c.potential.r_e) << "\n"
    << "r_min = " << fmt(c.potential.grid.r_min) << "\n"
    << "r_max = " << fmt(c.potential.grid.r_max) << "\n"
    << "step = " << fmt(c.potential.grid.step) << "\n"
    << "n_max = " << c.n_max << "\n\n";
  o << "[initial]\n"
    << "kind = " << (c.initial.kind == InitialKind::GaussianPacket ? "gaussian" : "uniform") << "\n"
    << "center = " << fmt(c.initial.center) << "\n"
    << "sigma = " << fmt(c.initial.sigma) << "\n"
    << "first = " << c.initial.first << "\n"
    << "last = " << c.initial.last << "\n\n";
  o << "[bath]\n"
    << "n = " << c.bath.n << "\n"
    << "spectral_exponent = " << fmt(c.bath.spectral_exponent) << "\n"
    << "omega_min = " << fmt(c.bath.omega_min) << "\n"
    << "omega_max = " << fmt(c.bath.omega_max) << "\n"
    << "coupling = " << fmt(c.bath.coupling) << "\n"
    << "frequency_seed = " << c.bath.frequency_seed << "\n"
    << "frequencies = " << join(c.bath.frequencies) << "\n\n";
  o << "[integrator]\n"
    << "dt = " << fmt(c.integrator.dt) << "\n"
    << "t_max = " << fmt(c.integrator.t_max) << "\n"
    << "sample_stride = " << c.integrator.sample_stride << "\n"
    << "normalization = "
    << (c.integrator.normalization == NormalizationPolicy::Raw ? "raw" : "trace") << "\n"
    << "picture = " << (c.integrator.picture == Picture::Interaction ? "interaction" : "schrodinger")
    << "\n\n";
  o << "[ensemble]\n"
    << "realizations = " << c.ensemble.n_realizations << "\n"
    << "seed = " << c.ensemble.master_seed << "\n"
    << "threads = " << c.ensemble.parallel_degree << "\n"
    << "large_n_threshold = " << c.large_n_threshold << "\n"
    << "large_n_realizations = " << c.large_n_realizations << "\n\n";
  o << "[sweep]\n"
    << "n = " << join(c.sweep.n_values) << "\n"
    << "s = " << join(c.sweep.s_values) << "\n\n";
  std::string models;
  for (std::size_t i = 0; i < c.fit.models.size(); ++i) {
    if (i) models += ",";
    models += to_string(c.fit.models[i]);
  }
  o << "[fit]\n"
    << "column = " << c.fit.column << "\n"
    << "models = " << models << "\n"
    << "max_segments = " << c.fit.max_segments << "\n\n";
  o << "[output]\n"
    << "dir = " << c.output.dir << "\n"
    << "rho = " << (c.output.write_rho ? "true" : "false") << "\n"
    << "phase = " << (c.output.write_phase ? "true" : "false") << "\n";
  return o.str();
}

BathSpec make_bath(const ExperimentConfig& cfg) {
  const BathParams& b = cfg.bath;
  if (!b.frequencies.empty()) return BathSpec::pinned(b.frequencies, b.coupling);
  if (b.n == 0) return BathSpec::empty();
  return BathSpec::sampled(b.n, b.spectral_exponent, b.omega_min, b.omega_max, b.coupling,
                           b.frequency_seed);
}

SystemSpectrum make_spectrum(const ExperimentConfig& cfg) {
  if (cfg.potential.kind == PotentialKind::Harmonic) {
    return ho_spectrum(cfg.potential.omega, cfg.potential.mass, cfg.n_max);
  }
  return morse_eigensolve(cfg.potential, LevelWindow{1, cfg.n_max});
}

InitialState make_initial_state(const ExperimentConfig& cfg) {
  if (cfg.initial.kind == InitialKind::UniformEntangled) return uniform_initial_state(cfg.n_max);
  return gaussian_initial_state(cfg.n_max, cfg.initial.center, cfg.initial.sigma,
                                cfg.initial.first, cfg.initial.last);
}

int realizations_for(const ExperimentConfig& cfg, int n_bath) {
  return n_bath >= cfg.large_n_threshold ? cfg.large_n_realizations : cfg.ensemble.n_realizations;
}

}  // namespace nmqsd
