#pragma once

#include <cstdint>
#include <vector>

#include "nmqsd/common.hpp"
#include "nmqsd/spectra.hpp"

namespace nmqsd {

/// Finite bath of uncoupled oscillators with uniform coupling g. The
/// frequency sample is drawn once and then frozen.
struct BathSpec {
  double spectral_exponent = 1.0;
  double omega_min = 1.1;
  double omega_max = 2.1;
  double coupling = 0.01;
  std::uint64_t frequency_seed = 1;
  std::vector<double> frequencies;

  [[nodiscard]] int size() const { return static_cast<int>(frequencies.size()); }

  /// Draws N frequencies from the density proportional to omega^(s+1).
  static BathSpec sampled(int n, double s, double omega_min, double omega_max, double coupling,
                          std::uint64_t seed);
  /// Pins the given frequencies (used for the single-oscillator runs).
  static BathSpec pinned(std::vector<double> frequencies, double coupling);
  static BathSpec empty() { return pinned({}, 0.0); }

  void validate() const;
};

std::vector<double> sample_frequencies(int n, double s, double omega_min, double omega_max,
                                       std::uint64_t seed);

/// Gaussian pairs (x, y) for one realization; z*_l = (x_l + i y_l)/sqrt(2).
struct NoiseRealization {
  std::vector<double> x;
  std::vector<double> y;
  std::uint64_t seed = 0;

  [[nodiscard]] Complex zstar(int lambda) const;
  static NoiseRealization draw(int n, std::uint64_t seed);
};

/// Counter-based seed for realization `index` of an ensemble.
std::uint64_t realization_seed(std::uint64_t master_seed, std::uint64_t index);

/// z*_t = -i sum_l g z*_l exp(+i w_l t).
Complex noise_value(const NoiseRealization& noise, const BathSpec& bath, double t);

/// K(tau) = sum_l g^2 exp(-i w_l tau).
Complex kernel(const BathSpec& bath, double tau);

/// A(t) = sum_l (g^2 / w_l)(cos(w_l t) - 1).
double counterterm_A(const BathSpec& bath, double t);

inline constexpr double kThetaTolerance = 1e-6;

/// (exp(-i theta t) - 1) / (-i theta), switching to its Taylor series for
/// |theta| < kThetaTolerance.
Complex resonant_factor(double theta, double t);
Complex resonant_factor_direct(double theta, double t);
Complex resonant_factor_series(double theta, double t);

/// Uncached memory-operator matrix element O_{mm'}(t) (1-based labels).
Complex obar_element(const BathSpec& bath, const SystemSpectrum& spectrum, int m, int m_prime,
                     double t);

/// Shifted denominators theta = w_l + (e_m - e_m') grouped by distinct level
/// gap, so every (m, m') pair with the same gap shares one bath sum.
class MemoryTable {
 public:
  MemoryTable(const BathSpec& bath, const SystemSpectrum& spectrum);

  [[nodiscard]] int gap_count() const { return static_cast<int>(gaps_.size()); }
  [[nodiscard]] const std::vector<double>& gaps() const { return gaps_; }
  [[nodiscard]] int gap_index(int m, int m_prime) const {
    return index_(m, m_prime);
  }
  /// Bath sums S_g(t) = g^2 sum_l F(theta_gl, t), one per distinct gap.
  void sums(double t, std::vector<Complex>& out) const;
  /// Full O(t) matrix, O_{mm'} = q_{mm'} S_{gap(m,m')}(t).
  [[nodiscard]] ComplexMatrix obar(double t) const;
  /// Cached single element (1-based labels).
  [[nodiscard]] Complex element(int m, int m_prime, double t) const;

 private:
  std::vector<double> gaps_;
  Eigen::MatrixXi index_;
  RealMatrix q_;
  std::vector<double> omega_;
  double g2_ = 0.0;
  // inv_theta_[gap * N + lambda]; zero where the series branch applies.
  std::vector<double> inv_theta_;
  struct Resonant {
    int gap;
    double theta;
  };
  std::vector<Resonant> resonant_;
};

}  // namespace nmqsd
