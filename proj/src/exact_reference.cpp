// Exact small-bath dynamics: diagonalise the full system + bath Hamiltonian
// once and propagate the factorised initial state analytically.

#include <cmath>
#include <string>

#include "nmqsd/dynamics.hpp"

namespace nmqsd {

namespace {

ObservableSeries propagate_exact(const InitialState& init, const BathSpec& bath,
                                 const SystemSpectrum& spectrum, int fock_cut,
                                 const IntegratorConfig& cfg, bool final_only) {
  const int n = spectrum.n_max();
  const int n_bath = bath.size();
  const int levels = fock_cut + 1;
  int bath_dim = 1;
  for (int l = 0; l < n_bath; ++l) bath_dim *= levels;
  const int dim = n * bath_dim;

  // Basis index = s * bath_dim + b, b = sum_l occ_l * levels^l.
  auto occupation = [&](int b, int l) {
    for (int k = 0; k < l; ++k) b /= levels;
    return b % levels;
  };
  int stride_of[2] = {1, levels};

  RealMatrix h = RealMatrix::Zero(dim, dim);
  for (int s = 0; s < n; ++s) {
    for (int b = 0; b < bath_dim; ++b) {
      const int i = s * bath_dim + b;
      double diag = spectrum.energies[s];
      for (int l = 0; l < n_bath; ++l) diag += bath.frequencies[l] * occupation(b, l);
      h(i, i) = diag;
      // g q (a_l + a_l^dagger): raise bath occupation, any system transition
      for (int l = 0; l < n_bath; ++l) {
        const int occ = occupation(b, l);
        if (occ + 1 >= levels) continue;
        const int b_up = b + stride_of[l];
        const double amp = bath.coupling * std::sqrt(double(occ + 1));
        for (int sp = 0; sp < n; ++sp) {
          const double q = spectrum.q(sp, s);
          if (q == 0.0) continue;
          const int j = sp * bath_dim + b_up;
          h(j, i) += amp * q;
          h(i, j) += amp * q;
        }
      }
    }
  }

  const Eigen::SelfAdjointEigenSolver<RealMatrix> eig(h);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("exact_small_bath_reference: eigen-decomposition failed");
  }
  ComplexVector psi0 = ComplexVector::Zero(dim);
  for (int s = 0; s < n; ++s) psi0[s * bath_dim] = init.coefficients[s];
  const ComplexMatrix v = eig.eigenvectors().cast<Complex>();
  const ComplexVector amp0 = v.adjoint() * psi0;

  ObservableSeries out;
  const long samples = cfg.samples();
  for (long k = final_only ? samples - 1 : 0; k < samples; ++k) {
    const double t = static_cast<double>(k * cfg.sample_stride) * cfg.dt;
    ComplexVector amp(dim);
    for (int i = 0; i < dim; ++i) amp[i] = amp0[i] * std::polar(1.0, -eig.eigenvalues()[i] * t);
    const ComplexVector psi = v * amp;
    // Psi(s, b) -> rho_s = Psi Psi^dagger
    const Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        grid(psi.data(), n, bath_dim);
    const ComplexMatrix rho = grid * grid.adjoint();
    append_observables(out, t, rho, spectrum);
  }
  return out;
}

}  // namespace

ObservableSeries exact_small_bath_reference(const InitialState& init, const BathSpec& bath,
                                            const SystemSpectrum& spectrum, int fock_cut,
                                            const IntegratorConfig& cfg) {
  cfg.validate();
  if (bath.size() > 2) throw ConfigError("exact_small_bath_reference: requires N <= 2");
  if (fock_cut < 4) throw ConfigError("exact_small_bath_reference: requires fock_cut >= 4");
  if (init.n_max() != spectrum.n_max()) {
    throw ConfigError("exact_small_bath_reference: initial state and spectrum sizes differ");
  }
  ObservableSeries base = propagate_exact(init, bath, spectrum, fock_cut, cfg, false);
  if (bath.size() == 0) return base;
  const ObservableSeries finer = propagate_exact(init, bath, spectrum, fock_cut + 2, cfg, true);
  const double e0 = base.energy.back();
  const double e1 = finer.energy.back();
  if (std::abs(e1 - e0) > 1e-4 * std::abs(e1)) {
    throw NumericalError("exact_small_bath_reference: Fock cutoff " + std::to_string(fock_cut) +
                         " not converged (<E>(t_max) changes by " +
                         std::to_string(std::abs(e1 - e0) / std::abs(e1)) + " relative)");
  }
  return base;
}

}  // namespace nmqsd
