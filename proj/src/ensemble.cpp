#include "nmqsd/ensemble.hpp"

#include <omp.h>

#include <algorithm>
#include <limits>
#include <string>
#include <thread>

namespace nmqsd {

double energy_expectation(const ComplexVector& c, const SystemSpectrum& spectrum,
                          bool trace_normalized) {
  const double e = c.cwiseAbs2().dot(spectrum.energies);
  return trace_normalized ? e / c.squaredNorm() : e;
}

double position_expectation(const ComplexVector& c, const SystemSpectrum& spectrum) {
  return (c.adjoint() * spectrum.q.cast<Complex>() * c).value().real();
}

double momentum_expectation(const ComplexVector& c, const SystemSpectrum& spectrum) {
  if (!spectrum.has_momentum()) throw ConfigError("momentum_expectation: spectrum has no p");
  return (c.adjoint() * spectrum.p * c).value().real();
}

double purity(const ComplexMatrix& rho) {
  // sum_nm rho_nm rho_mn = Tr(rho^2)
  return rho.cwiseProduct(rho.transpose()).sum().real();
}

double purity(const ReducedDensity& rho, std::size_t time_index) {
  return purity(rho.rho.at(time_index));
}

void append_observables(ObservableSeries& series, double t, const ComplexMatrix& rho,
                        const SystemSpectrum& spectrum) {
  const RealVector pop = rho.diagonal().real();
  const double tr = pop.sum();
  const double p = purity(rho);
  series.times.push_back(t);
  series.energy.push_back(pop.dot(spectrum.energies));
  // Tr(rho X) = sum_nm rho_nm X_mn
  series.position.push_back(
      rho.cwiseProduct(spectrum.q.transpose().cast<Complex>()).sum().real());
  series.momentum.push_back(
      spectrum.has_momentum() ? rho.cwiseProduct(spectrum.p.transpose()).sum().real() : 0.0);
  series.trace.push_back(tr);
  series.purity.push_back(p);
  series.purity_normalized.push_back(p / (tr * tr));
  series.level_energies.emplace_back(pop.cwiseProduct(spectrum.energies));
}

RealMatrix level_energy_series(const ReducedDensity& rho, const SystemSpectrum& spectrum) {
  RealMatrix out(spectrum.n_max(), static_cast<Eigen::Index>(rho.rho.size()));
  for (std::size_t k = 0; k < rho.rho.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) =
        rho.rho[k].diagonal().real().cwiseProduct(spectrum.energies);
  }
  return out;
}

void EnsembleConfig::validate() const {
  if (n_realizations < 1) throw ConfigError("ensemble: n_realizations must be >= 1");
  if (parallel_degree < 0) throw ConfigError("ensemble: parallel_degree must be >= 0");
}

int effective_parallelism(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

struct Block {
  int first = 0;  // realization index of column 0
  ComplexMatrix b;  // frame coefficients, one column per realization
  ComplexMatrix zstar;  // realizations x oscillators
  ComplexMatrix rho_raw;
  ComplexMatrix rho_norm;
  double drift = 0.0;
  long failed_realization = -1;
  double failed_time = 0.0;
  Propagator::Workspace ws;
};

}  // namespace

EnsembleResult run_ensemble(const InitialState& init, const BathSpec& bath,
                            const SystemSpectrum& spectrum, const IntegratorConfig& integrator,
                            const EnsembleConfig& ensemble) {
  integrator.validate();
  ensemble.validate();
  if (init.n_max() != spectrum.n_max()) {
    throw ConfigError("run_ensemble: initial state and spectrum sizes differ");
  }
  const int threads = effective_parallelism(ensemble.parallel_degree);
  const Propagator prop(bath, spectrum, integrator.picture);
  const int n = spectrum.n_max();
  const int n_bath = bath.size();
  const int r_total = ensemble.n_realizations;
  const int n_blocks = (r_total + kRealizationBlock - 1) / kRealizationBlock;
  const bool normalized_policy = integrator.normalization == NormalizationPolicy::TraceNormalized;

  std::vector<Block> blocks(static_cast<std::size_t>(n_blocks));
  for (int k = 0; k < n_blocks; ++k) {
    Block& blk = blocks[static_cast<std::size_t>(k)];
    blk.first = k * kRealizationBlock;
    const int cols = std::min(kRealizationBlock, r_total - blk.first);
    blk.b = init.coefficients.replicate(1, cols);
    std::vector<NoiseRealization> noises;
    noises.reserve(static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c) {
      const auto index = static_cast<std::uint64_t>(blk.first + c);
      noises.push_back(NoiseRealization::draw(n_bath, realization_seed(ensemble.master_seed, index)));
    }
    blk.zstar = zstar_rows(noises, n_bath);
  }

  EnsembleResult result;
  const double inv_r = 1.0 / static_cast<double>(r_total);

  auto sample = [&](double t) {
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int k = 0; k < n_blocks; ++k) {
      Block& blk = blocks[static_cast<std::size_t>(k)];
      ComplexMatrix c = blk.b;
      prop.to_lab(c, t);
      blk.rho_raw.noalias() = c * c.adjoint();
      const RealVector norms = c.colwise().squaredNorm().transpose();
      for (Eigen::Index j = 0; j < norms.size(); ++j) {
        blk.drift = std::max(blk.drift, std::abs(norms[j] - 1.0));
      }
      if (normalized_policy) {
        const ComplexMatrix cn = c * norms.cwiseSqrt().cwiseInverse().asDiagonal();
        blk.rho_norm.noalias() = cn * cn.adjoint();
      }
    }
    ComplexMatrix raw = ComplexMatrix::Zero(n, n);
    ComplexMatrix norm = ComplexMatrix::Zero(n, n);
    for (const Block& blk : blocks) {
      raw += blk.rho_raw;
      if (normalized_policy) norm += blk.rho_norm;
    }
    raw *= inv_r;
    norm *= inv_r;
    if (normalized_policy) {
      append_observables(result.observables, t, norm, spectrum);
      const RealVector pop = raw.diagonal().real();
      const double tr = pop.sum();
      const double p = purity(raw);
      result.observables.trace.back() = tr;
      result.observables.purity.back() = p;
      result.observables.purity_normalized.back() = p / (tr * tr);
    } else {
      append_observables(result.observables, t, raw, spectrum);
    }
    result.rho.rho.push_back(std::move(raw));
  };

  sample(0.0);

  const int stride = integrator.sample_stride;
  const long steps = integrator.steps();
  const double half = 0.5 * integrator.dt;
  const long intervals = steps / stride;
  const long tail = steps % stride;
  std::vector<Generator> gens(static_cast<std::size_t>(2 * stride + 1));
  std::vector<ComplexVector> phases(gens.size());

  auto advance = [&](long first_step, int n_steps) {
    const int n_times = 2 * n_steps + 1;
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int i = 0; i < n_times; ++i) {
      const double t = static_cast<double>(2 * first_step + i) * half;
      gens[static_cast<std::size_t>(i)] = prop.generator(t);
      phases[static_cast<std::size_t>(i)] = prop.bath_phases(t);
    }
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
    for (int k = 0; k < n_blocks; ++k) {
      Block& blk = blocks[static_cast<std::size_t>(k)];
      if (blk.failed_realization >= 0) continue;
      ComplexVector z0 = prop.noise_values(blk.zstar, phases[0]);
      for (int s = 0; s < n_steps; ++s) {
        const auto i0 = static_cast<std::size_t>(2 * s);
        const ComplexVector zh = prop.noise_values(blk.zstar, phases[i0 + 1]);
        ComplexVector z1 = prop.noise_values(blk.zstar, phases[i0 + 2]);
        prop.rk4_step(blk.b, 2.0 * half, gens[i0], gens[i0 + 1], gens[i0 + 2], z0, zh, z1,
                      blk.ws);
        const Eigen::VectorXd col_max = blk.b.cwiseAbs().colwise().maxCoeff().transpose();
        for (Eigen::Index j = 0; j < col_max.size(); ++j) {
          if (!(col_max[j] <= kCoefficientOverflow)) {
            blk.failed_realization = blk.first + j;
            blk.failed_time = static_cast<double>(2 * (first_step + s + 1)) * half;
            break;
          }
        }
        if (blk.failed_realization >= 0) break;
        z0 = std::move(z1);
      }
    }
    for (const Block& blk : blocks) {
      if (blk.failed_realization >= 0) {
        throw NumericalError("run_ensemble: coefficient overflow in realization " +
                             std::to_string(blk.failed_realization) + " at t=" +
                             std::to_string(blk.failed_time) + " (dt too large?)");
      }
    }
  };

  for (long j = 0; j < intervals; ++j) {
    advance(j * stride, stride);
    sample(static_cast<double>(2 * (j + 1) * stride) * half);
  }
  // Steps past the last full sample interval are integrated but not sampled.
  if (tail > 0) advance(intervals * stride, static_cast<int>(tail));

  for (const Block& blk : blocks) result.max_norm_drift = std::max(result.max_norm_drift, blk.drift);
  return result;
}

}  // namespace nmqsd
