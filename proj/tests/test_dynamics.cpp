#include <doctest.h>

#include <cmath>

#include "nmqsd/dynamics.hpp"

using namespace nmqsd;

namespace {

IntegratorConfig short_run(double dt, double t_max, Picture picture = Picture::Interaction) {
  IntegratorConfig c;
  c.dt = dt;
  c.t_max = t_max;
  c.sample_stride = static_cast<int>(std::lround(t_max / dt));
  c.picture = picture;
  return c;
}

ComplexVector terminal(const InitialState& init, const BathSpec& bath, const SystemSpectrum& spec,
                       const NoiseRealization& noise, const IntegratorConfig& cfg) {
  return integrate_trajectory(init, bath, spec, noise, cfg).states.back();
}

}  // namespace

TEST_CASE("initial states") {
  const InitialState u = uniform_initial_state(15);
  CHECK(u.n_max() == 15);
  for (int n = 0; n < 15; ++n) CHECK(u.coefficients[n].real() == doctest::Approx(0.2581989).epsilon(1e-7));
  CHECK(u.coefficients.squaredNorm() == doctest::Approx(1.0).epsilon(1e-15));

  const InitialState g = gaussian_initial_state(38, 16.0, 3.0, 9, 23);
  Eigen::Index peak = 0;
  g.coefficients.cwiseAbs().maxCoeff(&peak);
  CHECK(peak + 1 == 16);
  CHECK(g.coefficients.squaredNorm() == doctest::Approx(1.0).epsilon(1e-15));
  for (int k = 1; k <= 7; ++k) {
    CHECK(std::abs(g.coefficients[15 - k]) == doctest::Approx(std::abs(g.coefficients[15 + k])).epsilon(1e-14));
  }
  for (int n = 1; n <= 38; ++n) {
    if (n < 9 || n > 23) CHECK(g.coefficients[n - 1] == Complex{});
  }
  CHECK_THROWS_AS(gaussian_initial_state(38, 16.0, 3.0, 23, 9), ConfigError);
  CHECK_THROWS_AS(gaussian_initial_state(20, 16.0, 3.0, 9, 23), ConfigError);
  CHECK_THROWS_AS(uniform_initial_state(0), ConfigError);
}

TEST_CASE("integrator config") {
  IntegratorConfig c;
  CHECK(c.steps() == 50000);
  CHECK(c.samples() == 5001);
  c.dt = 0.03;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = IntegratorConfig{};
  c.sample_stride = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = IntegratorConfig{};
  c.dt = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("derivative examples") {
  const SystemSpectrum spec = ho_spectrum(1.0, 1.0, 6);
  const BathSpec bath = BathSpec::sampled(4, 1.0, 1.1, 2.1, 0.05, 3);
  const NoiseRealization noise = NoiseRealization::draw(4, 8);
  TrajectoryState st{0.0, uniform_initial_state(6).coefficients};
  st.c[2] = Complex(0.1, -0.4);
  const ComplexVector free = (-kI * spec.energies.cast<Complex>()).cwiseProduct(st.c);

  CHECK((derivative(st, BathSpec::empty(), spec, NoiseRealization::draw(0, 1), 1.7) - free).norm() == 0.0);

  const ComplexVector at0 = derivative(st, bath, spec, noise, 0.0);
  const ComplexVector expect0 = free + noise_value(noise, bath, 0.0) * (spec.q.cast<Complex>() * st.c);
  CHECK((at0 - expect0).norm() < 1e-15);

  const SystemSpectrum one = ho_spectrum(1.0, 1.0, 1);
  TrajectoryState s1{2.0, ComplexVector::Constant(1, Complex(0.6, 0.8))};
  CHECK((derivative(s1, bath, one, noise, 2.0) - (-kI * 0.5 * s1.c)).norm() < 1e-16);

  // explicit index form of the full equation
  const double t = 3.3;
  st.t = t;
  const ComplexVector d = derivative(st, bath, spec, noise, t);
  const double a = counterterm_A(bath, t);
  const Complex z = noise_value(noise, bath, t);
  for (int n = 0; n < 6; ++n) {
    Complex sum = -kI * spec.energies[n] * st.c[n];
    for (int m = 0; m < 6; ++m) {
      sum += z * spec.q(n, m) * st.c[m];
      for (int mp = 0; mp < 6; ++mp) {
        sum += -kI * a * spec.q(n, m) * spec.q(m, mp) * st.c[mp];
        sum -= spec.q(n, m) * obar_element(bath, spec, m + 1, mp + 1, t) * st.c[mp];
      }
    }
    CHECK(std::abs(d[n] - sum) < 1e-14);
  }

  SUBCASE("propagator generator reproduces the derivative in both frames") {
    for (Picture pic : {Picture::Schrodinger, Picture::Interaction}) {
      const Propagator prop(bath, spec, pic);
      const Generator g = prop.generator(t);
      const ComplexVector zv = prop.noise_values(zstar_rows({noise}, 4), prop.bath_phases(t));
      CHECK(std::abs(zv[0] - z) < 1e-16);
      ComplexMatrix b = st.c;
      prop.from_lab(b, t);
      ComplexMatrix db = g.drift * b + (g.noise * b) * zv[0];
      if (pic == Picture::Interaction) {
        // d/dt (V c) = V (dc/dt) + i E V c
        ComplexMatrix vd = d;
        prop.from_lab(vd, t);
        vd += kI * spec.energies.cast<Complex>().asDiagonal() * b;
        CHECK((db - vd).norm() < 1e-14);
      } else {
        CHECK((db.col(0) - d).norm() < 1e-14);
      }
    }
  }
}

TEST_CASE("free evolution") {
  const SystemSpectrum spec = ho_spectrum(1.0, 1.0, 15);
  const InitialState init = uniform_initial_state(15);
  IntegratorConfig cfg;
  cfg.sample_stride = 1000;
  const auto series = integrate_trajectory(init, BathSpec::empty(), spec, NoiseRealization::draw(0, 1), cfg);
  CHECK(series.times.size() == 51);
  CHECK(series.max_norm_drift < 1e-9);
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const double t = series.times[k];
    for (int n = 0; n < 15; ++n) {
      const Complex expect = init.coefficients[n] * std::polar(1.0, -spec.energies[n] * t);
      CHECK(std::abs(series.states[k][n] - expect) < 1e-9);
    }
  }
}

TEST_CASE("rk4 self-convergence order") {
  const SystemSpectrum spec = ho_spectrum(1.0, 1.0, 15);
  const BathSpec bath = BathSpec::sampled(10, 1.0, 1.1, 2.1, 0.05, 5);
  const NoiseRealization noise = NoiseRealization::draw(10, 21);
  const InitialState init = uniform_initial_state(15);
  for (Picture pic : {Picture::Interaction, Picture::Schrodinger}) {
    // the lab frame must resolve e_15 dt before the asymptotic regime sets in
    const double dt = pic == Picture::Interaction ? 0.08 : 0.02;
    const double t_max = 16.0;
    const ComplexVector ref = terminal(init, bath, spec, noise, short_run(dt / 8.0, t_max, pic));
    const double e1 = (terminal(init, bath, spec, noise, short_run(dt, t_max, pic)) - ref).norm();
    const double e2 = (terminal(init, bath, spec, noise, short_run(dt / 2.0, t_max, pic)) - ref).norm();
    const double order = std::log2(e1 / e2);
    CAPTURE(e1);
    CAPTURE(e2);
    CHECK(order > 3.7);
    CHECK(order < 4.3);
  }
}

TEST_CASE("linearity and determinism") {
  const SystemSpectrum spec = ho_spectrum(1.0, 1.0, 15);
  const BathSpec bath = BathSpec::sampled(10, 1.0, 1.1, 2.1, 0.01, 1);
  const NoiseRealization noise = NoiseRealization::draw(10, 4);
  const InitialState init = uniform_initial_state(15);
  const IntegratorConfig cfg = short_run(0.01, 50.0);
  const auto base = integrate_trajectory(init, bath, spec, noise, cfg);

  const Complex alpha(-0.7, 2.3);
  InitialState scaled = init;
  scaled.coefficients *= alpha;
  const auto lin = integrate_trajectory(scaled, bath, spec, noise, cfg);
  for (std::size_t k = 0; k < base.states.size(); ++k) {
    const double scale = std::abs(alpha) * base.states[k].norm();
    CHECK((lin.states[k] - alpha * base.states[k]).norm() < 1e-12 * scale);
  }

  const auto again = integrate_trajectory(init, bath, spec, noise, cfg);
  REQUIRE(again.states.size() == base.states.size());
  for (std::size_t k = 0; k < base.states.size(); ++k) CHECK(again.states[k] == base.states[k]);
  CHECK(again.max_norm_drift == base.max_norm_drift);
}

TEST_CASE("overflow guard") {
  const SystemSpectrum spec = ho_spectrum(1.0, 1.0, 15);
  const InitialState init = uniform_initial_state(15);
  IntegratorConfig cfg = short_run(0.5, 200.0, Picture::Schrodinger);
  CHECK_THROWS_AS(integrate_trajectory(init, BathSpec::empty(), spec, NoiseRealization::draw(0, 1), cfg),
                  NumericalError);
  CHECK_THROWS_AS(integrate_trajectory(uniform_initial_state(4), BathSpec::empty(), spec,
                                       NoiseRealization::draw(0, 1), cfg),
                  ConfigError);
}

TEST_CASE("exact small-bath reference") {
  const SystemSpectrum spec = ho_spectrum(1.0, 1.0, 6);
  const InitialState init = uniform_initial_state(6);
  IntegratorConfig cfg = short_run(0.01, 20.0);
  cfg.sample_stride = 100;

  SUBCASE("decoupled") {
    const ObservableSeries obs = exact_small_bath_reference(init, BathSpec::empty(), spec, 4, cfg);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      CHECK(obs.energy[k] == doctest::Approx(3.0).epsilon(1e-12));
      CHECK(obs.purity[k] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("weak coupling conserves the trace") {
    const BathSpec bath = BathSpec::pinned({2.09}, 0.01);
    const ObservableSeries obs = exact_small_bath_reference(init, bath, spec, 6, cfg);
    CHECK(obs.size() == 21);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      CHECK(obs.trace[k] == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(obs.purity[k] <= 1.0 + 1e-10);
    }
  }

  CHECK_THROWS_AS(exact_small_bath_reference(init, BathSpec::sampled(3, 1.0, 1.1, 2.1, 0.01, 1),
                                             spec, 6, cfg),
                  ConfigError);
  CHECK_THROWS_AS(exact_small_bath_reference(init, BathSpec::pinned({2.09}, 0.01), spec, 3, cfg),
                  ConfigError);
}
