// Acceptance run: one PASS/FAIL line per criterion, observables kept under
// ./acceptance_out for inspection.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nmqsd/config.hpp"
#include "nmqsd/ensemble.hpp"
#include "nmqsd/experiment.hpp"
#include "nmqsd/fitting.hpp"

using namespace nmqsd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int id, const std::string& name, const Verdict& v, double secs) {
  std::printf("[%s] criterion %2d  %-34s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name.c_str(),
              v.detail.c_str(), secs);
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

// Runs `check` and reports it; exceptions count as failures.
void criterion(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto start = Clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what()};
  }
  report(id, name, v, seconds_since(start));
}

std::string num(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

const fs::path kOut = "acceptance_out";

struct Run {
  ObservableSeries obs;
  double seconds = 0.0;
};

Run ensemble(const ExperimentConfig& cfg, const std::string& label) {
  const auto start = Clock::now();
  const SystemSpectrum spectrum = make_spectrum(cfg);
  const BathSpec bath = make_bath(cfg);
  EnsembleConfig ens = cfg.ensemble;
  ens.n_realizations = realizations_for(cfg, bath.size());
  EnsembleResult r = run_ensemble(make_initial_state(cfg), bath, spectrum, cfg.integrator, ens);
  fs::create_directories(kOut / label);
  write_observables(r.observables, kOut / label / "observables.csv");
  Run out{std::move(r.observables), seconds_since(start)};
  std::printf("  run %-14s N=%-3d R=%-3d %.1f s\n", label.c_str(), bath.size(), ens.n_realizations,
              out.seconds);
  std::fflush(stdout);
  return out;
}

ExperimentConfig harmonic(int n_bath, double s = 1.0) {
  ExperimentConfig c = default_config(PotentialKind::Harmonic);
  c.bath.n = n_bath;
  c.bath.spectral_exponent = s;
  c.output.write_phase = false;
  return c;
}

ExperimentConfig morse(int n_bath) {
  ExperimentConfig c = default_config(PotentialKind::Morse);
  c.bath.n = n_bath;
  c.output.write_phase = false;
  return c;
}

std::size_t argmin_in(const std::vector<double>& t, const std::vector<double>& y, double lo, double hi) {
  std::size_t best = t.size();
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < lo || t[k] > hi) continue;
    if (best == t.size() || y[k] < y[best]) best = k;
  }
  return best;
}

std::size_t argmax_in(const std::vector<double>& t, const std::vector<double>& y, double lo, double hi) {
  std::size_t best = t.size();
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < lo || t[k] > hi) continue;
    if (best == t.size() || y[k] > y[best]) best = k;
  }
  return best;
}

// max |y| over a sliding window of the given width
std::vector<double> envelope(const std::vector<double>& t, const std::vector<double>& y, double width) {
  std::vector<double> out(y.size(), 0.0);
  for (std::size_t k = 0; k < y.size(); ++k) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (std::abs(t[j] - t[k]) <= 0.5 * width) out[k] = std::max(out[k], std::abs(y[j]));
    }
  }
  return out;
}

// first time y drops to `level`, linearly interpolated; negative if never
double first_crossing(const std::vector<double>& t, const std::vector<double>& y, double level) {
  for (std::size_t k = 1; k < y.size(); ++k) {
    if (y[k] <= level && y[k - 1] > level) {
      return t[k - 1] + (t[k] - t[k - 1]) * (y[k - 1] - level) / (y[k - 1] - y[k]);
    }
  }
  return -1.0;
}

std::string describe(const RegimeSegmentation& r) {
  std::string s;
  for (std::size_t i = 0; i < r.segments.size(); ++i) {
    if (i) s += " | ";
    s += to_string(r.segments[i].model) + " " + num(r.segments[i].exponent);
  }
  if (!r.breakpoints.empty()) {
    s += " @";
    for (double b : r.breakpoints) s += " " + num(b);
  }
  return s;
}

template <typename F>
Complex simpson(F f, double t, int panels) {
  const double h = t / panels;
  Complex sum = f(0.0) + f(t);
  for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return sum * h / 3.0;
}

}  // namespace

int main() {
  const auto total = Clock::now();
  fs::create_directories(kOut);

  // ---- cheap criteria first
  criterion(8, "Morse spectrum", [] {
    const auto start = Clock::now();
    const ExperimentConfig cfg = default_config(PotentialKind::Morse);
    const SystemSpectrum all = morse_eigensolve(cfg.potential);
    const double secs = seconds_since(start);
    double worst = 0.0;
    for (int n = 1; n <= all.n_max(); ++n) {
      worst = std::max(worst, std::abs(all.energies[n - 1] - morse_energy_analytic(n, cfg.potential)));
    }
    const bool count = all.n_max() == 38;
    const double e9 = count ? all.energies[8] : 0.0;
    const double e23 = count ? all.energies[22] : 0.0;
    const bool pass = count && std::abs(e9 - 5.03) <= 1e-2 && std::abs(e23 - 12.32) <= 1e-2 &&
                      worst <= 1e-3 && secs < 30.0;
    return Verdict{pass, "levels=" + std::to_string(all.n_max()) + " e9=" + num(e9, 6) +
                             " e23=" + num(e23, 6) + " max|dE|=" + num(worst, 3) +
                             " solve=" + num(secs, 3) + "s"};
  });

  criterion(1, "no-bath conservation", [] {
    ExperimentConfig cfg = harmonic(0);
    cfg.ensemble.n_realizations = 1;
    const Run r = ensemble(cfg, "ho_N0");
    double de = 0.0, dp = 0.0;
    for (std::size_t k = 0; k < r.obs.size(); ++k) {
      de = std::max(de, std::abs(r.obs.energy[k] - 7.5) / 7.5);
      dp = std::max(dp, std::abs(r.obs.purity[k] - 1.0));
    }
    return Verdict{de <= 1e-8 && dp <= 1e-10 && r.seconds < 5.0,
                   "max rel dE=" + num(de, 3) + " max |P-1|=" + num(dp, 3) + " run=" +
                       num(r.seconds, 3) + "s"};
  });

  criterion(10, "numerics properties", [] {
    std::vector<std::string> bad;
    const SystemSpectrum ho = ho_spectrum(1.0, 1.0, 15);
    const BathSpec bath = BathSpec::sampled(10, 1.0, 1.1, 2.1, 0.05, 5);
    const NoiseRealization noise = NoiseRealization::draw(10, 21);
    const InitialState init = uniform_initial_state(15);

    auto terminal = [&](double dt, const InitialState& start) {
      IntegratorConfig c;
      c.dt = dt;
      c.t_max = 16.0;
      c.sample_stride = static_cast<int>(std::lround(16.0 / dt));
      return integrate_trajectory(start, bath, ho, noise, c).states.back();
    };
    const ComplexVector ref = terminal(0.01, init);
    const double order =
        std::log2((terminal(0.08, init) - ref).norm() / (terminal(0.04, init) - ref).norm());
    if (!within(order, 3.7, 4.3)) bad.push_back("order");

    InitialState scaled = init;
    const Complex alpha(-0.7, 2.3);
    scaled.coefficients *= alpha;
    const ComplexVector base = terminal(0.04, init);
    const double lin = (terminal(0.04, scaled) - alpha * base).norm() / (std::abs(alpha) * base.norm());
    if (!(lin <= 1e-12)) bad.push_back("linearity");

    const BathSpec weak = BathSpec::sampled(10, 1.0, 1.1, 2.1, 0.01, 1);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> level(1, 15);
    std::uniform_real_distribution<double> time(0.1, 60.0);
    double quad_err = 0.0;
    for (int probed = 0; probed < 20;) {
      const int m = level(rng), mp = level(rng);
      if (ho.q(m - 1, mp - 1) == 0.0) continue;
      const double t = time(rng);
      const double gap = ho.energies[m - 1] - ho.energies[mp - 1];
      const Complex q = ho.q(m - 1, mp - 1) *
                        simpson([&](double tau) { return kernel(weak, tau) * std::polar(1.0, -gap * tau); },
                                t, 20000);
      quad_err = std::max(quad_err, std::abs(obar_element(weak, ho, m, mp, t) - q));
      ++probed;
    }
    if (!(quad_err <= 1e-9)) bad.push_back("quadrature");

    double branch = 0.0;
    for (double t : {0.5, 10.0, 100.0, 500.0}) {
      const Complex d = resonant_factor_direct(kThetaTolerance, t);
      branch = std::max(branch, std::abs(d - resonant_factor_series(kThetaTolerance, t)) / std::abs(d));
    }
    if (!(branch <= 1e-10)) bad.push_back("branch");

    IntegratorConfig c;
    c.t_max = 20.0;
    c.sample_stride = 10;
    EnsembleConfig e;
    e.n_realizations = 40;
    e.parallel_degree = 1;
    const EnsembleResult one = run_ensemble(init, weak, ho, c, e);
    const EnsembleResult again = run_ensemble(init, weak, ho, c, e);
    e.parallel_degree = 4;
    const EnsembleResult four = run_ensemble(init, weak, ho, c, e);
    bool identical = one.observables.energy == again.observables.energy &&
                     one.observables.energy == four.observables.energy &&
                     one.observables.purity == four.observables.purity;
    for (std::size_t k = 0; k < one.rho.rho.size(); ++k) identical = identical && one.rho.rho[k] == four.rho.rho[k];
    if (!identical) bad.push_back("determinism");

    std::string detail = "order=" + num(order) + " lin=" + num(lin, 3) + " quad=" + num(quad_err, 3) +
                         " branch=" + num(branch, 3) + " bit-identical=" + (identical ? "yes" : "no");
    for (const auto& b : bad) detail += " !" + b;
    return Verdict{bad.empty(), detail};
  });

  // ---- harmonic oscillator, one pinned oscillator at 2.09
  ExperimentConfig one_cfg = harmonic(1);
  one_cfg.bath.frequencies = {2.09};
  const Run ho1 = ensemble(one_cfg, "ho_N1");

  criterion(2, "N=1 revival", [&] {
    const auto& t = ho1.obs.times;
    const auto& e = ho1.obs.energy;
    const std::size_t kmin = argmin_in(t, e, 0.0, t.back());
    const double dip = (e[0] - e[kmin]) / e[0];
    const std::size_t kmax = argmax_in(t, e, t[kmin], t.back());
    const std::vector<double> env = envelope(t, ho1.obs.position, 2.0 * 3.141592653589793);
    const std::size_t kq = argmin_in(t, env, 3.2, t.back() - 3.2);
    const bool pass = within(dip, 0.10, 0.30) && within(t[kmin], 145.0, 195.0) &&
                      within(t[kmax], 270.0, 370.0) && std::abs(t[kq] - t[kmin]) <= 25.0 &&
                      ho1.seconds < 600.0;
    return Verdict{pass, "dip=" + num(100.0 * dip, 3) + "% at t=" + num(t[kmin]) + " max at t=" +
                             num(t[kmax]) + " <q> envelope min at t=" + num(t[kq]) +
                             " run=" + num(ho1.seconds, 3) + "s"};
  });

  criterion(3, "oracle equivalence", [&] {
    ExperimentConfig cfg = one_cfg;
    cfg.integrator.t_max = 200.0;
    const SystemSpectrum spectrum = make_spectrum(cfg);
    const BathSpec bath = make_bath(cfg);
    const InitialState init = make_initial_state(cfg);
    ObservableSeries exact;
    int cut = 4;
    double conv = 1.0;
    exact = exact_small_bath_reference(init, bath, spectrum, cut, cfg.integrator);
    while (cut < 16) {
      const ObservableSeries finer = exact_small_bath_reference(init, bath, spectrum, cut + 2, cfg.integrator);
      conv = 0.0;
      for (std::size_t k = 0; k < finer.size(); ++k) {
        conv = std::max(conv, std::abs(finer.energy[k] - exact.energy[k]) / std::abs(finer.energy[k]));
      }
      exact = finer;
      cut += 2;
      if (conv < 1e-4) break;
    }
    fs::create_directories(kOut / "ho_N1");
    write_observables(exact, kOut / "ho_N1" / "oracle.csv", "oracle");
    double de = 0.0, dq = 0.0, amp = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k) {
      de = std::max(de, std::abs(ho1.obs.energy[k] - exact.energy[k]) / std::abs(exact.energy[k]));
      dq = std::max(dq, std::abs(ho1.obs.position[k] - exact.position[k]));
      amp = std::max(amp, std::abs(exact.position[k]));
    }
    const bool pass = conv < 1e-4 && de < 0.05 && dq < 0.1 * amp;
    return Verdict{pass, "fock cut " + std::to_string(cut) + " (conv " + num(conv, 3) + ") max rel dE=" +
                             num(de, 3) + " max dq/amp=" + num(dq / amp, 3)};
  });

  // ---- harmonic oscillator, sampled ohmic baths
  const Run ho10 = ensemble(harmonic(10), "ho_N10");
  const Run ho20 = ensemble(harmonic(20), "ho_N20");

  criterion(4, "N=10 two regimes", [&] {
    const RegimeSegmentation r =
        fit_series(ho10.obs, "energy", {FitModel::Exponential, FitModel::PowerLaw}, 2);
    const bool shape = r.segments.size() == 2 && r.segments[0].model == FitModel::Exponential &&
                       r.segments[1].model == FitModel::PowerLaw;
    const bool pass = shape && within(r.segments[0].exponent, 0.012, 0.024) &&
                      within(r.segments[1].exponent, 0.8, 1.7) && within(r.breakpoints[0], 150.0, 350.0);
    return Verdict{pass, describe(r)};
  });

  criterion(5, "N=20 three regimes", [&] {
    const RegimeSegmentation r = fit_series(
        ho20.obs, "energy", {FitModel::Exponential, FitModel::Exponential, FitModel::PowerLaw}, 3);
    const bool shape = r.segments.size() == 3 && r.segments[0].model == FitModel::Exponential &&
                       r.segments[1].model == FitModel::Exponential &&
                       r.segments[2].model == FitModel::PowerLaw;
    const bool pass = shape && within(r.segments[0].exponent, 0.020, 0.040) &&
                      within(r.segments[1].exponent, 0.015, 0.030) &&
                      within(r.segments[2].exponent, 0.35, 0.80);
    return Verdict{pass, describe(r)};
  });

  criterion(6, "purity floor", [&] {
    const double floor = 1.0 / 15.0;
    const double t20 = first_crossing(ho20.obs.times, ho20.obs.purity, floor);
    const double t10 = first_crossing(ho10.obs.times, ho10.obs.purity, floor);
    const double p0 = std::max(std::abs(ho10.obs.purity[0] - 1.0), std::abs(ho20.obs.purity[0] - 1.0));
    const bool pass = within(t20, 45.0, 90.0) && within(t10, 95.0, 185.0) && p0 <= 1e-10;
    const double last10 = ho10.obs.purity.back(), last20 = ho20.obs.purity.back();
    return Verdict{pass, "t_dec N=20: " + (t20 < 0 ? "none (P(500)=" + num(last20) + ")" : num(t20)) +
                             ", N=10: " + (t10 < 0 ? "none (P(500)=" + num(last10) + ")" : num(t10)) +
                             " |P(0)-1|=" + num(p0, 3)};
  });

  criterion(7, "N=10 level inversion", [&] {
    const auto& t = ho10.obs.times;
    const auto& lv = ho10.obs.level_energies;
    const Eigen::Index n = lv.front().size();
    RealVector late = RealVector::Zero(n);
    int count = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k] >= t.back() - 50.0) {
        late += lv[k];
        ++count;
      }
    }
    late /= count;
    int inversions = 0;  // pairs ordered opposite to t = 0
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a + 1; b < n; ++b) inversions += late[a] > late[b] ? 1 : 0;
    const int pairs = static_cast<int>(n * (n - 1) / 2);

    // early slopes by least squares over t <= 20
    std::vector<double> slope(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      double st = 0, sy = 0, stt = 0, sty = 0, m = 0;
      for (std::size_t k = 0; k < t.size() && t[k] <= 20.0; ++k) {
        st += t[k];
        sy += lv[k][i];
        stt += t[k] * t[k];
        sty += t[k] * lv[k][i];
        m += 1;
      }
      slope[static_cast<std::size_t>(i)] = (m * sty - st * sy) / (m * stt - st * st);
    }
    bool ordered = true;
    for (auto i = static_cast<std::size_t>(n - 5); i + 1 < static_cast<std::size_t>(n); ++i) {
      ordered = ordered && slope[i + 1] <= slope[i];
    }
    std::string top;
    for (auto i = static_cast<std::size_t>(n - 5); i < static_cast<std::size_t>(n); ++i) top += " " + num(slope[i], 3);
    return Verdict{inversions == pairs && ordered, "inverted pairs " + std::to_string(inversions) + "/" +
                                                       std::to_string(pairs) + ", top-5 early slopes" + top};
  });

  criterion(11, "bath-type insensitivity", [&] {
    std::map<double, double> alpha;
    std::string detail;
    for (double s : {0.1, 1.0, 1.9}) {
      const ObservableSeries& obs =
          s == 1.0 ? ho20.obs : ensemble(harmonic(20, s), "ho_N20_s" + format_double(s)).obs;
      const RegimeSegmentation r = fit_series(
          obs, "energy", {FitModel::Exponential, FitModel::Exponential, FitModel::PowerLaw}, 3);
      alpha[s] = r.segments.front().exponent;
      detail += " s=" + num(s, 2) + ": " + num(alpha[s]);
    }
    double worst = 0.0;
    for (const auto& [sa, a] : alpha)
      for (const auto& [sb, b] : alpha) worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    return Verdict{worst <= 0.5, "alpha" + detail + " max pairwise rel=" + num(worst, 3)};
  });

  // ---- Morse sweep
  criterion(9, "Morse decay monotonicity", [&] {
    std::vector<std::string> bad;
    const Run m0 = ensemble([] {
      ExperimentConfig c = morse(0);
      c.ensemble.n_realizations = 1;
      return c;
    }(), "morse_N0");
    double de = 0.0;
    for (double e : m0.obs.energy) de = std::max(de, std::abs(e - m0.obs.energy[0]) / m0.obs.energy[0]);
    if (!(de <= 1e-8)) bad.push_back("N=0 drift");

    std::vector<double> ns, alphas;
    std::string detail;
    double t_return = -1.0;
    for (int n : {1, 10, 50, 100}) {
      const Run r = ensemble(morse(n), "morse_N" + std::to_string(n));
      if (n == 1) {
        const auto& t = r.obs.times;
        const auto& e = r.obs.energy;
        const std::size_t k = argmin_in(t, e, 0.0, 300.0);
        const std::size_t back = argmax_in(t, e, t[k], std::min(t.back(), t[k] + 150.0));
        // a return means the energy climbs back by at least half the dip
        if (e[back] - e[k] >= 0.5 * (e[0] - e[k]) && e[0] > e[k]) t_return = t[k];
      }
      try {
        const RegimeSegmentation fit =
            fit_series(r.obs, "energy", {FitModel::Exponential, FitModel::PowerLaw}, 2);
        ns.push_back(n);
        alphas.push_back(fit.segments.front().exponent);
        detail += " N=" + std::to_string(n) + ": " + num(alphas.back());
      } catch (const ConfigError& e) {
        bad.push_back("fit N=" + std::to_string(n));
        detail += " N=" + std::to_string(n) + ": no fit";
      }
    }
    bool increasing = alphas.size() == 4;
    for (std::size_t i = 1; i < alphas.size(); ++i) increasing = increasing && alphas[i] > alphas[i - 1];
    if (!increasing) bad.push_back("alpha not increasing");
    double curvature = 0.0, rel_resid = 1.0;
    if (alphas.size() >= 3) {
      const FitResult q = fit_exponent_scaling(ns, alphas, ScalingModel::Quadratic).front();
      curvature = q.coefficients[0];
      double scale = 0.0;
      for (double a : alphas) scale += a * a;
      rel_resid = std::sqrt(q.sse / scale);
    }
    if (!(curvature > 0.0)) bad.push_back("curvature");
    if (!(rel_resid <= 0.1)) bad.push_back("quadratic residual");
    if (!within(t_return, 110.0, 190.0)) bad.push_back("return time");
    detail = "alpha" + detail + " curvature=" + num(curvature, 3) + " resid=" + num(rel_resid, 3) +
             " N=0 drift=" + num(de, 3) + " N=1 return at " + (t_return < 0 ? "none" : num(t_return));
    for (const auto& b : bad) detail += " !" + b;
    return Verdict{bad.empty(), detail};
  });

  std::printf("%d criteria failed, total %.0f s\n", failures, seconds_since(total));
  return failures == 0 ? 0 : 1;
}
