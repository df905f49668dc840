#include "nmqsd/bath.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace nmqsd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<double> sample_frequencies(int n, double s, double omega_min, double omega_max,
                                       std::uint64_t seed) {
  if (n < 0) throw ConfigError("sample_frequencies: N must be non-negative");
  if (!(s >= 0.0 && s <= 2.0)) {
    throw ConfigError("sample_frequencies: spectral exponent " + std::to_string(s) +
                      " outside [0, 2]");
  }
  if (!(omega_min > 0.0 && omega_min < omega_max)) {
    throw ConfigError("sample_frequencies: require 0 < omega_min < omega_max");
  }
  // Inverse CDF of p(w) ~ w^k / k with k = s + 2.
  const double k = s + 2.0;
  const double lo = std::pow(omega_min, k);
  const double hi = std::pow(omega_max, k);
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(out.size()) < n) {
    const double u = uniform(engine);
    const double w = std::pow(lo + u * (hi - lo), 1.0 / k);
    if (w > omega_min && w < omega_max) out.push_back(w);
  }
  std::sort(out.begin(), out.end());
  return out;
}

BathSpec BathSpec::sampled(int n, double s, double omega_min, double omega_max, double coupling,
                           std::uint64_t seed) {
  BathSpec b;
  b.spectral_exponent = s;
  b.omega_min = omega_min;
  b.omega_max = omega_max;
  b.coupling = coupling;
  b.frequency_seed = seed;
  b.frequencies = sample_frequencies(n, s, omega_min, omega_max, seed);
  b.validate();
  return b;
}

BathSpec BathSpec::pinned(std::vector<double> frequencies, double coupling) {
  BathSpec b;
  b.coupling = coupling;
  b.frequencies = std::move(frequencies);
  std::sort(b.frequencies.begin(), b.frequencies.end());
  if (!b.frequencies.empty()) {
    b.omega_min = std::min(b.omega_min, b.frequencies.front() * 0.5);
    b.omega_max = std::max(b.omega_max, b.frequencies.back() * 2.0);
  }
  b.validate();
  return b;
}

void BathSpec::validate() const {
  if (frequencies.empty()) return;  // no bath
  if (!(coupling > 0.0)) throw ConfigError("bath: coupling must be positive");
  for (double w : frequencies) {
    if (!(w > omega_min && w < omega_max)) {
      throw ConfigError("bath: frequency " + std::to_string(w) + " outside the window");
    }
  }
}

Complex NoiseRealization::zstar(int lambda) const {
  const auto l = static_cast<std::size_t>(lambda);
  return Complex(x[l], y[l]) / std::sqrt(2.0);
}

NoiseRealization NoiseRealization::draw(int n, std::uint64_t seed) {
  NoiseRealization r;
  r.seed = seed;
  r.x.resize(static_cast<std::size_t>(n));
  r.y.resize(static_cast<std::size_t>(n));
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < n; ++l) {
    r.x[static_cast<std::size_t>(l)] = normal(engine);
    r.y[static_cast<std::size_t>(l)] = normal(engine);
  }
  return r;
}

std::uint64_t realization_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

Complex noise_value(const NoiseRealization& noise, const BathSpec& bath, double t) {
  Complex sum{0.0, 0.0};
  for (int l = 0; l < bath.size(); ++l) {
    sum += noise.zstar(l) * std::polar(1.0, bath.frequencies[static_cast<std::size_t>(l)] * t);
  }
  return -kI * bath.coupling * sum;
}

Complex kernel(const BathSpec& bath, double tau) {
  Complex sum{0.0, 0.0};
  for (double w : bath.frequencies) sum += std::polar(1.0, -w * tau);
  return bath.coupling * bath.coupling * sum;
}

double counterterm_A(const BathSpec& bath, double t) {
  double sum = 0.0;
  for (double w : bath.frequencies) sum += (std::cos(w * t) - 1.0) / w;
  return bath.coupling * bath.coupling * sum;
}

Complex resonant_factor_direct(double theta, double t) {
  // (exp(-ix) - 1)/(-i theta) = 2 sin(x/2) exp(-ix/2) / theta, free of the
  // cancellation in the numerator.
  const double half = 0.5 * theta * t;
  return 2.0 * std::sin(half) * std::polar(1.0, -half) / theta;
}

Complex resonant_factor_series(double theta, double t) {
  const double x = theta * t;
  return t * Complex(1.0 - x * x / 6.0, -x / 2.0);
}

Complex resonant_factor(double theta, double t) {
  return std::abs(theta) < kThetaTolerance ? resonant_factor_series(theta, t)
                                           : resonant_factor_direct(theta, t);
}

Complex obar_element(const BathSpec& bath, const SystemSpectrum& spectrum, int m, int m_prime,
                     double t) {
  const double q = spectrum.q(m - 1, m_prime - 1);
  const double gap = spectrum.energies[m - 1] - spectrum.energies[m_prime - 1];
  Complex sum{0.0, 0.0};
  for (double w : bath.frequencies) sum += resonant_factor(w + gap, t);
  return q * bath.coupling * bath.coupling * sum;
}

MemoryTable::MemoryTable(const BathSpec& bath, const SystemSpectrum& spectrum)
    : q_(spectrum.q), omega_(bath.frequencies), g2_(bath.coupling * bath.coupling) {
  const int n = spectrum.n_max();
  const double scale = std::max(1.0, spectrum.energies.cwiseAbs().maxCoeff());
  const double merge_tol = 1e-12 * scale;

  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(n * n));
  for (int m = 0; m < n; ++m)
    for (int mp = 0; mp < n; ++mp) all.push_back(spectrum.energies[m] - spectrum.energies[mp]);
  std::sort(all.begin(), all.end());
  for (double d : all) {
    if (gaps_.empty() || d - gaps_.back() > merge_tol) gaps_.push_back(d);
  }
  index_.resize(n, n);
  for (int m = 0; m < n; ++m) {
    for (int mp = 0; mp < n; ++mp) {
      const double d = spectrum.energies[m] - spectrum.energies[mp];
      auto it = std::lower_bound(gaps_.begin(), gaps_.end(), d - merge_tol);
      index_(m, mp) = static_cast<int>(it - gaps_.begin());
    }
  }
  const std::size_t nb = omega_.size();
  inv_theta_.assign(gaps_.size() * nb, 0.0);
  for (std::size_t g = 0; g < gaps_.size(); ++g) {
    for (std::size_t l = 0; l < nb; ++l) {
      const double theta = omega_[l] + gaps_[g];
      if (std::abs(theta) < kThetaTolerance) {
        resonant_.push_back({static_cast<int>(g), theta});
      } else {
        inv_theta_[g * nb + l] = 1.0 / theta;
      }
    }
  }
}

void MemoryTable::sums(double t, std::vector<Complex>& out) const {
  const std::size_t nb = omega_.size();
  out.assign(gaps_.size(), Complex{0.0, 0.0});
  if (nb == 0) return;
  // exp(-i theta t/2) = exp(-i w t/2) exp(-i gap t/2)
  std::vector<Complex> bath_phase(nb);
  for (std::size_t l = 0; l < nb; ++l) bath_phase[l] = std::polar(1.0, -0.5 * omega_[l] * t);
  for (std::size_t g = 0; g < gaps_.size(); ++g) {
    const Complex gap_phase = std::polar(1.0, -0.5 * gaps_[g] * t);
    const double* inv = &inv_theta_[g * nb];
    double re = 0.0;
    double im = 0.0;
    for (std::size_t l = 0; l < nb; ++l) {
      const Complex e = bath_phase[l] * gap_phase;
      const double two_sin = -2.0 * e.imag() * inv[l];
      re += two_sin * e.real();
      im += two_sin * e.imag();
    }
    out[g] = Complex(re, im);
  }
  for (const Resonant& r : resonant_) {
    out[static_cast<std::size_t>(r.gap)] += resonant_factor_series(r.theta, t);
  }
  for (Complex& s : out) s *= g2_;
}

ComplexMatrix MemoryTable::obar(double t) const {
  std::vector<Complex> s;
  sums(t, s);
  const Eigen::Index n = q_.rows();
  ComplexMatrix o(n, n);
  for (Eigen::Index mp = 0; mp < n; ++mp)
    for (Eigen::Index m = 0; m < n; ++m)
      o(m, mp) = q_(m, mp) * s[static_cast<std::size_t>(index_(m, mp))];
  return o;
}

Complex MemoryTable::element(int m, int m_prime, double t) const {
  std::vector<Complex> s;
  sums(t, s);
  return q_(m - 1, m_prime - 1) * s[static_cast<std::size_t>(index_(m - 1, m_prime - 1))];
}

}  // namespace nmqsd
