#include "nmqsd/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace nmqsd {

namespace {

constexpr double kOverflow = 1e100;
constexpr double kSeed = 1e-20;
constexpr double kBisectTol = 1e-10;
constexpr double kScanStep = 0.05;
// Tail action (integral of kappa dr) the padded domain must provide beyond the
// user grid: psi decays by exp(-35) ~ 6e-16 before the artificial wall.
constexpr double kTailAction = 35.0;

// Potential sampled on a uniform grid, r_i = r0 + i*h.
struct SampledDomain {
  double r0 = 0.0;
  double h = 0.0;
  double mass = 1.0;
  RealVector v;
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(v.size()); }
  [[nodiscard]] double r(std::size_t i) const { return r0 + static_cast<double>(i) * h; }
};

SampledDomain sample(const PotentialSpec& pot, double r0, std::size_t n) {
  SampledDomain d{r0, pot.grid.step, pot.mass, RealVector(static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) d.v[static_cast<Eigen::Index>(i)] = pot(d.r(i));
  return d;
}

// Numerov weight w_i = 1 - h^2 f_i / 12 with f = 2m(V - E).
inline double weight(const SampledDomain& d, std::size_t i, double energy) {
  return 1.0 - d.h * d.h * 2.0 * d.mass * (d.v[static_cast<Eigen::Index>(i)] - energy) / 12.0;
}

// Sign changes of the outward solution over the full domain, including the
// value at the far wall. For the discrete Dirichlet problem this equals the
// number of eigenvalues below `energy`.
int sturm_count(const SampledDomain& d, double energy) {
  const std::size_t n = d.size();
  double prev = 0.0;
  double cur = kSeed;
  double w_prev = weight(d, 0, energy);
  double w_cur = weight(d, 1, energy);
  int count = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double w_next = weight(d, i + 1, energy);
    const double next = ((12.0 - 10.0 * w_cur) * cur - w_prev * prev) / w_next;
    if ((next < 0.0) != (cur < 0.0)) ++count;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kOverflow) {
      prev /= kOverflow;
      cur /= kOverflow;
    }
    w_prev = w_cur;
    w_cur = w_next;
  }
  return count;
}

// Runs the recurrence over indices [begin, end] in the given direction,
// writing into psi. Returns nothing; psi is rescaled in place on overflow.
void shoot(const SampledDomain& d, double energy, std::size_t from, std::size_t to,
           RealVector& psi) {
  const bool forward = to > from;
  const auto step = [&](std::size_t i) { return forward ? i + 1 : i - 1; };
  auto at = [&](std::size_t i) -> double& { return psi[static_cast<Eigen::Index>(i)]; };
  at(from) = 0.0;
  std::size_t i1 = step(from);
  at(i1) = kSeed;
  std::size_t im = from;
  std::size_t i = i1;
  while (i != to) {
    const std::size_t in = step(i);
    at(in) = ((12.0 - 10.0 * weight(d, i, energy)) * at(i) - weight(d, im, energy) * at(im)) /
             weight(d, in, energy);
    if (std::abs(at(in)) > kOverflow) {
      const std::size_t lo = std::min(from, in);
      const std::size_t hi = std::max(from, in);
      psi.segment(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo + 1)) /=
          kOverflow;
    }
    im = i;
    i = in;
  }
}

int allowed_region_nodes(const SampledDomain& d, const RealVector& psi, double energy,
                         std::size_t lo, std::size_t hi) {
  int nodes = 0;
  double last_sign = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) {
    const double value = psi[static_cast<Eigen::Index>(i)];
    if (value == 0.0) continue;
    const bool allowed = d.v[static_cast<Eigen::Index>(i)] <= energy ||
                         (i > lo && d.v[static_cast<Eigen::Index>(i - 1)] <= energy);
    const double s = value > 0.0 ? 1.0 : -1.0;
    if (last_sign != 0.0 && s != last_sign && allowed) ++nodes;
    last_sign = s;
  }
  return nodes;
}

// Number of steps to extend beyond the user grid on one side so the tail
// action above `ceiling` reaches kTailAction.
std::size_t padding_steps(const PotentialSpec& pot, double edge, double direction,
                          double ceiling) {
  const double h = pot.grid.step;
  const double width = pot.grid.r_max - pot.grid.r_min;
  const auto max_steps = static_cast<std::size_t>(std::ceil(4.0 * width / h));
  double action = 0.0;
  std::size_t k = 0;
  while (action < kTailAction && k < max_steps) {
    ++k;
    const double r = edge + direction * static_cast<double>(k) * h;
    const double excess = pot(r) - ceiling;
    if (excess > 0.0) action += std::sqrt(2.0 * pot.mass * excess) * h;
  }
  return k;
}

// Fourth-order central difference, second order at the two outermost points.
RealVector derivative4(const RealVector& f, double h) {
  const Eigen::Index n = f.size();
  RealVector df = RealVector::Zero(n);
  for (Eigen::Index i = 2; i + 2 < n; ++i) {
    df[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
  }
  if (n >= 3) {
    df[1] = (f[2] - f[0]) / (2.0 * h);
    df[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * h);
  }
  return df;
}

}  // namespace

std::size_t Grid::size() const {
  return static_cast<std::size_t>(std::llround((r_max - r_min) / step)) + 1;
}

double PotentialSpec::operator()(double r) const {
  if (kind == PotentialKind::Harmonic) return 0.5 * mass * omega * omega * r * r;
  const double x = 1.0 - std::exp(-a * (r - r_e));
  return depth * x * x;
}

void PotentialSpec::validate() const {
  if (!(mass > 0.0)) throw ConfigError("potential: mass must be positive");
  if (!(grid.step > 0.0)) throw ConfigError("potential: grid step must be positive");
  if (!(grid.r_min < grid.r_max)) throw ConfigError("potential: grid requires r_min < r_max");
  if (kind == PotentialKind::Harmonic) {
    if (!(omega > 0.0)) throw ConfigError("potential: omega must be positive");
  } else {
    if (!(depth > 0.0)) throw ConfigError("potential: Morse depth must be positive");
    if (!(a > 0.0)) throw ConfigError("potential: Morse a must be positive");
    if (!(grid.r_min < r_e && r_e < grid.r_max)) {
      throw ConfigError("potential: r_e must lie strictly inside the grid");
    }
  }
}

PotentialSpec PotentialSpec::harmonic(double omega, double mass, Grid grid) {
  PotentialSpec p;
  p.kind = PotentialKind::Harmonic;
  p.omega = omega;
  p.mass = mass;
  p.grid = grid;
  return p;
}

PotentialSpec PotentialSpec::morse(double depth, double a, double r_e, double mass, Grid grid) {
  PotentialSpec p;
  p.kind = PotentialKind::Morse;
  p.depth = depth;
  p.a = a;
  p.r_e = r_e;
  p.mass = mass;
  p.grid = grid;
  return p;
}

SystemSpectrum SystemSpectrum::truncated(int first, int last) const {
  if (first < 1 || last > n_max() || first > last) {
    throw ConfigError("spectrum: level window [" + std::to_string(first) + "," +
                      std::to_string(last) + "] outside 1.." + std::to_string(n_max()));
  }
  const int k = last - first + 1;
  const int o = first - 1;
  SystemSpectrum s;
  s.provenance = provenance;
  s.energies = energies.segment(o, k);
  s.q = q.block(o, o, k, k);
  if (has_momentum()) s.p = p.block(o, o, k, k);
  if (wavefunctions.size() > 0) {
    s.wavefunctions = wavefunctions.middleCols(o, k);
    s.grid_r = grid_r;
  }
  return s;
}

SystemSpectrum ho_spectrum(double omega, double mass, int n_max) {
  if (!(omega > 0.0)) throw ConfigError("ho_spectrum: omega must be positive");
  if (!(mass > 0.0)) throw ConfigError("ho_spectrum: mass must be positive");
  if (n_max < 1) throw ConfigError("ho_spectrum: n_max must be >= 1");
  SystemSpectrum s;
  s.provenance = SpectrumProvenance::AnalyticHO;
  s.energies.resize(n_max);
  s.q = RealMatrix::Zero(n_max, n_max);
  s.p = ComplexMatrix::Zero(n_max, n_max);
  for (int n = 1; n <= n_max; ++n) {
    s.energies[n - 1] = omega * (n - 0.5);
    if (n < n_max) {
      const double qn = std::sqrt(n / (2.0 * mass * omega));
      const double pn = std::sqrt(n * mass * omega / 2.0);
      s.q(n - 1, n) = s.q(n, n - 1) = qn;
      s.p(n - 1, n) = Complex(0.0, -pn);
      s.p(n, n - 1) = Complex(0.0, pn);
    }
  }
  return s;
}

RealVector simpson_weights(std::size_t n, double step) {
  RealVector w = RealVector::Zero(static_cast<Eigen::Index>(n));
  if (n < 2) return w;
  if (n == 2) {
    w.setConstant(step / 2.0);
    return w;
  }
  // Simpson over the first m points (m odd), 3/8 rule over the trailing 4 if
  // the count is even.
  const std::size_t m = (n % 2 == 1) ? n : n - 3;
  for (std::size_t i = 0; m > 1 && i < m; ++i) {
    double c = (i == 0 || i == m - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    w[static_cast<Eigen::Index>(i)] += c * step / 3.0;
  }
  if (m != n) {
    const double c = 3.0 * step / 8.0;
    const auto b = static_cast<Eigen::Index>(m - 1);
    w[b] += c;
    w[b + 1] += 3.0 * c;
    w[b + 2] += 3.0 * c;
    w[b + 3] += c;
  }
  return w;
}

NumerovSolution numerov_integrate(const PotentialSpec& potential, double energy,
                                  Direction direction) {
  potential.validate();
  const std::size_t n = potential.grid.size();
  if (n < 3) throw ConfigError("numerov_integrate: grid needs at least 3 points");
  const SampledDomain d = sample(potential, potential.grid.r_min, n);
  if (!(energy < d.v[0]) || !(energy < d.v[static_cast<Eigen::Index>(n - 1)])) {
    throw ConfigError("numerov_integrate: energy " + std::to_string(energy) +
                         " is not below the potential at both grid endpoints");
  }
  NumerovSolution out;
  out.psi = RealVector::Zero(static_cast<Eigen::Index>(n));
  if (direction == Direction::LeftToRight) {
    shoot(d, energy, 0, n - 1, out.psi);
  } else {
    shoot(d, energy, n - 1, 0, out.psi);
  }
  out.node_count = allowed_region_nodes(d, out.psi, energy, 0, n - 1);
  return out;
}

double morse_energy_analytic(int n, const PotentialSpec& potential) {
  if (potential.kind != PotentialKind::Morse) {
    throw ConfigError("morse_energy_analytic: potential is not Morse");
  }
  if (n < 1) throw ConfigError("morse_energy_analytic: level label must be >= 1");
  if (n > morse_bound_level_count(potential)) {
    throw ConfigError("morse_energy_analytic: level " + std::to_string(n) +
                      " lies above the bound spectrum");
  }
  const double x = potential.a * std::sqrt(2.0 * potential.depth / potential.mass) * (n - 0.5);
  return x - x * x / (4.0 * potential.depth);
}

int morse_bound_level_count(const PotentialSpec& potential) {
  const double w0 = potential.a * std::sqrt(2.0 * potential.depth / potential.mass);
  // energy increases while w0 (v + 1/2) < 2 D_e
  return static_cast<int>(std::floor(2.0 * potential.depth / w0 - 0.5)) + 1;
}

SystemSpectrum morse_eigensolve(const PotentialSpec& potential, std::optional<LevelWindow> window) {
  if (potential.kind != PotentialKind::Morse) {
    throw ConfigError("morse_eigensolve: potential is not Morse");
  }
  potential.validate();
  const Grid& g = potential.grid;
  const double h = g.step;
  // Both turning points must lie inside the user grid.
  const double ceiling = std::min(potential(g.r_min), potential(g.r_max));

  const std::size_t pad_left = padding_steps(potential, g.r_min, -1.0, ceiling);
  const std::size_t pad_right = padding_steps(potential, g.r_max, +1.0, ceiling);
  const std::size_t n = g.size() + pad_left + pad_right;
  const SampledDomain d = sample(potential, g.r_min - static_cast<double>(pad_left) * h, n);

  const double v_min = d.v.minCoeff();
  const std::function<int(double)> count = [&](double e) { return sturm_count(d, e); };

  std::vector<double> levels;
  // Bisection inside a bracket holding exactly one eigenvalue.
  auto bisect = [&](double lo, double hi, int c_lo) {
    while (hi - lo > kBisectTol) {
      const double mid = 0.5 * (lo + hi);
      if (count(mid) > c_lo) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
  };
  std::function<void(double, double, int, int)> resolve = [&](double lo, double hi, int c_lo,
                                                              int c_hi) {
    if (c_hi == c_lo) return;
    if (c_hi - c_lo == 1) {
      levels.push_back(bisect(lo, hi, c_lo));
      return;
    }
    if (hi - lo < 1e-9) {
      throw NumericalError("morse_eigensolve: grid too coarse to separate levels near E=" +
                           std::to_string(lo));
    }
    const double mid = 0.5 * (lo + hi);
    const int c_mid = count(mid);
    resolve(lo, mid, c_lo, c_mid);
    resolve(mid, hi, c_mid, c_hi);
  };

  double e = v_min;
  int c = count(e);
  if (c != 0) throw NumericalError("morse_eigensolve: nodes below the potential minimum");
  double step = kScanStep;
  while (e < ceiling) {
    const double next = std::min(e + step, ceiling);
    const int c_next = count(next);
    resolve(e, next, c, c_next);
    if (levels.size() >= 2) {
      const double gap = levels[levels.size() - 1] - levels[levels.size() - 2];
      step = std::min(kScanStep, gap / 4.0);
    }
    e = next;
    c = c_next;
  }
  // An eigenvalue sitting exactly at the ceiling has its turning point on the
  // grid edge; keep only levels strictly below.
  while (!levels.empty() && !(levels.back() < ceiling)) levels.pop_back();
  if (levels.empty()) throw NumericalError("morse_eigensolve: no bound levels on grid");

  const int n_levels = static_cast<int>(levels.size());
  const auto ni = static_cast<Eigen::Index>(n);
  const RealVector w = simpson_weights(n, h);
  RealVector r(ni);
  for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = d.r(i);

  SystemSpectrum s;
  s.provenance = SpectrumProvenance::Numerov;
  s.energies = Eigen::Map<const RealVector>(levels.data(), n_levels);
  s.wavefunctions.resize(ni, n_levels);
  s.grid_r = r;

  for (int k = 0; k < n_levels; ++k) {
    const double energy = levels[static_cast<std::size_t>(k)];
    // Match at the outer classical turning point.
    std::size_t m = n - 1;
    while (m > 0 && d.v[static_cast<Eigen::Index>(m)] > energy) --m;
    m = std::clamp<std::size_t>(m, 2, n - 3);

    RealVector left = RealVector::Zero(ni);
    RealVector right = RealVector::Zero(ni);
    shoot(d, energy, 0, m + 1, left);
    shoot(d, energy, n - 1, m - 1, right);
    const auto mi = static_cast<Eigen::Index>(m);
    if (right[mi] == 0.0 || left[mi] == 0.0) {
      throw NumericalError("morse_eigensolve: node at matching point for level " +
                           std::to_string(k + 1));
    }
    RealVector phi(ni);
    phi.head(mi) = left.head(mi);
    phi.tail(ni - mi) = right.tail(ni - mi) * (left[mi] / right[mi]);
    const double norm = std::sqrt(w.dot(phi.cwiseProduct(phi)));
    phi /= norm;
    // Sign convention: positive on the first lobe from the left.
    const double peak = phi.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < ni; ++i) {
      if (std::abs(phi[i]) > 1e-3 * peak) {
        if (phi[i] < 0.0) phi = -phi;
        break;
      }
    }
    const int nodes = allowed_region_nodes(d, phi, energy, 0, n - 1);
    if (nodes != k) {
      throw NumericalError("morse_eigensolve: missing level, level " + std::to_string(k + 1) +
                           " has " + std::to_string(nodes) + " nodes");
    }
    s.wavefunctions.col(k) = phi;
  }

  s.q.resize(n_levels, n_levels);
  s.p.resize(n_levels, n_levels);
  const RealMatrix weighted = w.asDiagonal() * s.wavefunctions;  // w_i phi_n(r_i)
  const RealMatrix r_phi = r.asDiagonal() * s.wavefunctions;
  RealMatrix dphi(ni, n_levels);
  for (int k = 0; k < n_levels; ++k) dphi.col(k) = derivative4(s.wavefunctions.col(k), h);
  s.q = weighted.transpose() * r_phi;
  const RealMatrix dmat = weighted.transpose() * dphi;  // integral phi_n phi_m'
  s.p = Complex(0.0, -1.0) * dmat.cast<Complex>();

  if (window) {
    const int last = window->last == 0 ? n_levels : window->last;
    return s.truncated(window->first, last);
  }
  return s;
}

}  // namespace nmqsd
