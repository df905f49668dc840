#include "nmqsd/dynamics.hpp"

#include <cmath>
#include <string>

namespace nmqsd {

long IntegratorConfig::steps() const { return std::lround(t_max / dt); }

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("integrator: dt must be positive");
  if (!(t_max >= 0.0)) throw ConfigError("integrator: t_max must be non-negative");
  if (sample_stride < 1) throw ConfigError("integrator: sample_stride must be >= 1");
  const double ratio = t_max / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 * std::max(1.0, ratio)) {
    throw ConfigError("integrator: t_max must be an integer multiple of dt");
  }
}

InitialState uniform_initial_state(int n_max) {
  if (n_max < 1) throw ConfigError("initial state: n_max must be >= 1");
  InitialState s;
  s.kind = InitialKind::UniformEntangled;
  s.window_first = 1;
  s.window_last = n_max;
  s.coefficients = ComplexVector::Constant(n_max, Complex(1.0 / std::sqrt(double(n_max)), 0.0));
  return s;
}

InitialState gaussian_initial_state(int n_max, double center, double sigma, int first, int last) {
  if (first < 1 || last > n_max || first > last) {
    throw ConfigError("initial state: packet window [" + std::to_string(first) + "," +
                      std::to_string(last) + "] is empty or outside 1.." + std::to_string(n_max));
  }
  if (!(sigma > 0.0)) throw ConfigError("initial state: sigma must be positive");
  InitialState s;
  s.kind = InitialKind::GaussianPacket;
  s.center = center;
  s.sigma = sigma;
  s.window_first = first;
  s.window_last = last;
  s.coefficients = ComplexVector::Zero(n_max);
  for (int n = first; n <= last; ++n) {
    const double x = (n - center) / sigma;
    s.coefficients[n - 1] = std::exp(-x * x);
  }
  s.coefficients /= s.coefficients.norm();
  return s;
}

ComplexVector derivative(const TrajectoryState& state, const BathSpec& bath,
                         const SystemSpectrum& spectrum, const NoiseRealization& noise, double t) {
  const int n = spectrum.n_max();
  if (state.c.size() != n) throw ConfigError("derivative: coefficient length != n_max");
  const ComplexMatrix q = spectrum.q.cast<Complex>();
  ComplexVector out = (-kI * spectrum.energies.cast<Complex>()).cwiseProduct(state.c);
  if (bath.size() == 0) return out;
  const double a = counterterm_A(bath, t);
  const Complex z = noise_value(noise, bath, t);
  const ComplexVector qc = q * state.c;
  ComplexMatrix obar(n, n);
  for (int m = 1; m <= n; ++m)
    for (int mp = 1; mp <= n; ++mp) obar(m - 1, mp - 1) = obar_element(bath, spectrum, m, mp, t);
  out += -kI * a * (q * qc) + z * qc - q * (obar * state.c);
  return out;
}

Propagator::Propagator(const BathSpec& bath, const SystemSpectrum& spectrum, Picture picture)
    : picture_(picture),
      energies_(spectrum.energies),
      q_(spectrum.q),
      q2_(spectrum.q * spectrum.q),
      omega_(bath.frequencies),
      coupling_(bath.coupling),
      memory_(bath, spectrum) {}

Generator Propagator::generator(double t) const {
  const Eigen::Index n = energies_.size();
  Generator g;
  if (omega_.empty()) {
    g.drift = ComplexMatrix::Zero(n, n);
    g.noise = ComplexMatrix::Zero(n, n);
  } else {
    double a = 0.0;
    for (double w : omega_) a += (std::cos(w * t) - 1.0) / w;
    a *= coupling_ * coupling_;
    g.drift.noalias() = -(q_.cast<Complex>() * memory_.obar(t));
    g.drift += (Complex(0.0, -a) * q2_).cast<Complex>();
    g.noise = q_.cast<Complex>();
  }
  if (picture_ == Picture::Schrodinger) {
    g.drift.diagonal() += (-kI * energies_.cast<Complex>());
    return g;
  }
  // X_I = V X V^dagger with V = diag(exp(i e_n t))
  ComplexVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = std::polar(1.0, energies_[i] * t);
  const ComplexVector vc = v.conjugate();
  g.drift = v.asDiagonal() * g.drift * vc.asDiagonal();
  g.noise = v.asDiagonal() * g.noise * vc.asDiagonal();
  return g;
}

ComplexVector Propagator::bath_phases(double t) const {
  ComplexVector p(static_cast<Eigen::Index>(omega_.size()));
  for (std::size_t l = 0; l < omega_.size(); ++l) {
    p[static_cast<Eigen::Index>(l)] = std::polar(1.0, omega_[l] * t);
  }
  return p;
}

ComplexVector Propagator::noise_values(const ComplexMatrix& zstar,
                                       const ComplexVector& phases) const {
  if (omega_.empty()) return ComplexVector::Zero(zstar.rows());
  return (-kI * coupling_) * (zstar * phases);
}

void Propagator::to_lab(ComplexMatrix& b, double t) const {
  if (picture_ == Picture::Schrodinger) return;
  for (Eigen::Index i = 0; i < b.rows(); ++i) b.row(i) *= std::polar(1.0, -energies_[i] * t);
}

void Propagator::from_lab(ComplexMatrix& c, double t) const {
  if (picture_ == Picture::Schrodinger) return;
  for (Eigen::Index i = 0; i < c.rows(); ++i) c.row(i) *= std::polar(1.0, energies_[i] * t);
}

void Propagator::apply(const Generator& g, const ComplexVector& z, const ComplexMatrix& b,
                       ComplexMatrix& out, ComplexMatrix& tmp) {
  out.noalias() = g.drift * b;
  tmp.noalias() = g.noise * b;
  out.noalias() += tmp * z.asDiagonal();
}

void Propagator::rk4_step(ComplexMatrix& b, double dt, const Generator& g0, const Generator& gh,
                          const Generator& g1, const ComplexVector& z0, const ComplexVector& zh,
                          const ComplexVector& z1, Workspace& ws) const {
  apply(g0, z0, b, ws.k1, ws.tmp);
  ws.y = b + (0.5 * dt) * ws.k1;
  apply(gh, zh, ws.y, ws.k2, ws.tmp);
  ws.y = b + (0.5 * dt) * ws.k2;
  apply(gh, zh, ws.y, ws.k3, ws.tmp);
  ws.y = b + dt * ws.k3;
  apply(g1, z1, ws.y, ws.k4, ws.tmp);
  b += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

ComplexMatrix zstar_rows(const std::vector<NoiseRealization>& noises, int n_bath) {
  ComplexMatrix z(static_cast<Eigen::Index>(noises.size()), n_bath);
  for (std::size_t r = 0; r < noises.size(); ++r)
    for (int l = 0; l < n_bath; ++l) z(static_cast<Eigen::Index>(r), l) = noises[r].zstar(l);
  return z;
}

TrajectorySeries integrate_trajectory(const InitialState& init, const BathSpec& bath,
                                      const SystemSpectrum& spectrum,
                                      const NoiseRealization& noise, const IntegratorConfig& cfg) {
  cfg.validate();
  if (init.n_max() != spectrum.n_max()) {
    throw ConfigError("integrate_trajectory: initial state and spectrum sizes differ");
  }
  if (static_cast<int>(noise.x.size()) != bath.size()) {
    throw ConfigError("integrate_trajectory: noise realization does not match bath size");
  }
  const Propagator prop(bath, spectrum, cfg.picture);
  const ComplexMatrix zrow = zstar_rows({noise}, bath.size());
  const long steps = cfg.steps();
  const double dt = cfg.dt;

  TrajectorySeries out;
  ComplexMatrix b = init.coefficients;
  auto record = [&](double t) {
    ComplexMatrix c = b;
    prop.to_lab(c, t);
    out.times.push_back(t);
    out.states.emplace_back(c.col(0));
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(c.squaredNorm() - 1.0));
  };
  record(0.0);

  Propagator::Workspace ws;
  Generator g0 = prop.generator(0.0);
  ComplexVector z0 = prop.noise_values(zrow, prop.bath_phases(0.0));
  const double half = 0.5 * dt;
  for (long k = 0; k < steps; ++k) {
    const double th = static_cast<double>(2 * k + 1) * half;
    const double t1 = static_cast<double>(2 * k + 2) * half;
    const Generator gh = prop.generator(th);
    Generator g1 = prop.generator(t1);
    const ComplexVector zh = prop.noise_values(zrow, prop.bath_phases(th));
    ComplexVector z1 = prop.noise_values(zrow, prop.bath_phases(t1));
    prop.rk4_step(b, dt, g0, gh, g1, z0, zh, z1, ws);
    if (b.cwiseAbs().maxCoeff() > kCoefficientOverflow || !b.allFinite()) {
      throw NumericalError("integrate_trajectory: coefficient overflow at t=" +
                           std::to_string(t1) + " (dt too large?)");
    }
    if ((k + 1) % cfg.sample_stride == 0) record(t1);
    g0 = std::move(g1);
    z0 = std::move(z1);
  }
  return out;
}

}  // namespace nmqsd
