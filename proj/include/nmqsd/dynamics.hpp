#pragma once

#include <optional>
#include <vector>

#include "nmqsd/bath.hpp"
#include "nmqsd/common.hpp"
#include "nmqsd/observables.hpp"
#include "nmqsd/spectra.hpp"

namespace nmqsd {

enum class NormalizationPolicy { Raw, TraceNormalized };

/// Frame in which RK4 is applied. In the interaction frame the coefficients
/// are b_n = exp(+i e_n t) c_n, which removes the free phase rotation from
/// the stepper; results are always reported as lab-frame c_n.
enum class Picture { Interaction, Schrodinger };

struct IntegratorConfig {
  double dt = 0.01;
  double t_max = 500.0;
  int sample_stride = 10;
  NormalizationPolicy normalization = NormalizationPolicy::Raw;
  Picture picture = Picture::Interaction;

  [[nodiscard]] long steps() const;
  [[nodiscard]] long samples() const { return steps() / sample_stride + 1; }
  void validate() const;
};

enum class InitialKind { UniformEntangled, GaussianPacket };

struct InitialState {
  InitialKind kind = InitialKind::UniformEntangled;
  double center = 16.0;
  double sigma = 3.0;
  int window_first = 9;
  int window_last = 23;
  ComplexVector coefficients;

  [[nodiscard]] int n_max() const { return static_cast<int>(coefficients.size()); }
};

InitialState uniform_initial_state(int n_max);
/// c_n ~ exp(-(n - center)^2 / sigma^2) on levels [first, last], zero outside.
InitialState gaussian_initial_state(int n_max, double center, double sigma, int first, int last);

struct TrajectoryState {
  double t = 0.0;
  ComplexVector c;
};

struct TrajectorySeries {
  std::vector<double> times;
  std::vector<ComplexVector> states;
  /// max_t |sum |c_n|^2 - 1|
  double max_norm_drift = 0.0;
};

/// Right-hand side of the coefficient equation in the lab frame,
///   dc_n/dt = -i e_n c_n - i A(t) (q^2 c)_n + z*_t (q c)_n - (q O(t) c)_n.
ComplexVector derivative(const TrajectoryState& state, const BathSpec& bath,
                         const SystemSpectrum& spectrum, const NoiseRealization& noise, double t);

/// Time-local generator of the linear equation, dB/dt = drift B + (noise B) diag(z).
struct Generator {
  ComplexMatrix drift;
  ComplexMatrix noise;
};

/// Shared, immutable pieces of the coefficient equation for one (bath,
/// spectrum) pair; safe to use from many threads.
class Propagator {
 public:
  Propagator(const BathSpec& bath, const SystemSpectrum& spectrum, Picture picture);

  [[nodiscard]] int n_max() const { return static_cast<int>(energies_.size()); }
  [[nodiscard]] int bath_size() const { return static_cast<int>(omega_.size()); }
  [[nodiscard]] Picture picture() const { return picture_; }
  [[nodiscard]] Generator generator(double t) const;
  /// exp(+i w_l t) for every bath oscillator.
  [[nodiscard]] ComplexVector bath_phases(double t) const;
  /// z*_t for every row of `zstar` (realizations x oscillators).
  [[nodiscard]] ComplexVector noise_values(const ComplexMatrix& zstar,
                                           const ComplexVector& phases) const;
  /// Converts frame coefficients to lab-frame c at time t (in place).
  void to_lab(ComplexMatrix& b, double t) const;
  void from_lab(ComplexMatrix& c, double t) const;

  struct Workspace {
    ComplexMatrix k1, k2, k3, k4, y, tmp;
  };

  /// One classic RK4 step for a batch of columns.
  void rk4_step(ComplexMatrix& b, double dt, const Generator& g0, const Generator& gh,
                const Generator& g1, const ComplexVector& z0, const ComplexVector& zh,
                const ComplexVector& z1, Workspace& ws) const;

  [[nodiscard]] const MemoryTable& memory() const { return memory_; }

 private:
  static void apply(const Generator& g, const ComplexVector& z, const ComplexMatrix& b,
                    ComplexMatrix& out, ComplexMatrix& tmp);

  Picture picture_;
  RealVector energies_;
  RealMatrix q_;
  RealMatrix q2_;
  std::vector<double> omega_;
  double coupling_ = 0.0;
  MemoryTable memory_;
};

/// Noise amplitudes z*_l of one realization as a row vector.
ComplexMatrix zstar_rows(const std::vector<NoiseRealization>& noises, int n_bath);

/// Overflow guard for the linear (non norm-preserving) equation.
inline constexpr double kCoefficientOverflow = 1e6;

TrajectorySeries integrate_trajectory(const InitialState& init, const BathSpec& bath,
                                      const SystemSpectrum& spectrum,
                                      const NoiseRealization& noise, const IntegratorConfig& cfg);

/// Conservative dynamics of the full system + bath Hamiltonian in a truncated
/// Fock basis (N <= 2), bath initially in its ground state.
ObservableSeries exact_small_bath_reference(const InitialState& init, const BathSpec& bath,
                                            const SystemSpectrum& spectrum, int fock_cut,
                                            const IntegratorConfig& cfg);

}  // namespace nmqsd
