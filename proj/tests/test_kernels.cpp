#include "doctest.h"

#include <cmath>
#include <memory>
#include <numbers>

#include <Eigen/Dense>

#include "lnsm/kernels.hpp"

using namespace lnsm;

namespace {

constexpr double kPi = std::numbers::pi;

// composite Simpson in log q
double f0_oracle(double m) {
  const double a = std::log(1e-12), b = std::log(9.0);
  const int n = 200000;
  const double h = (b - a) / n;
  auto f = [m](double s) {
    double q = std::exp(s);
    return q * q / (q * q * std::exp(q * q) + m * m) / (2.0 * kPi);
  };
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

} // namespace

TEST_CASE("propagator at the origin against radial quadrature") {
  CHECK(propagator_radial(0.0, 0.1) == doctest::Approx(f0_oracle(0.1)).epsilon(1e-9));
  // mpmath reference
  CHECK(propagator_radial(0.0, 0.1) == doctest::Approx(0.3267757031612203).epsilon(1e-10));
}

TEST_CASE("propagator table is positive and decays at rate m") {
  SampledKernel k = propagator_kernel(0.1, 0.125, 10.0);
  double minv = 1e300;
  for (double v : k.values) minv = std::min(minv, v);
  CHECK(minv > 0.0);
  CHECK(k.fitted_decay_rate >= 0.095);
  CHECK(std::abs(k.fitted_decay_rate / 0.1 - 1.0) < 0.1);
  CHECK(k.at(3, 4) == doctest::Approx(k.at(-4, 3)).epsilon(1e-14));
  CHECK(k.at(0, 40) == doctest::Approx(propagator_radial(5.0, 0.1)).epsilon(1e-10));
}

TEST_CASE("fixed Hankel rule matches the adaptive transform") {
  RadialKernel k = propagator_radial_kernel(0.05);
  for (double r : {0.0, 0.7, 3.3, 12.0, 41.0, 150.0}) {
    double a = propagator_radial(r, 0.05);
    CHECK(std::abs(k.f(r) - a) < 1e-11 * std::abs(propagator_radial(0.0, 0.05)));
    CHECK(k.f(r) == doctest::Approx(a).epsilon(1e-8));
  }
}

TEST_CASE("unregulated propagator is K0 / 2pi") {
  CHECK(propagator_radial(2.0, 0.3, Regulator::none) == doctest::Approx(0.7775220919047292 / (2.0 * kPi)).epsilon(1e-12));
}

TEST_CASE("kernel preconditions") {
  CHECK_THROWS(propagator_kernel(0.1, 0.5, 10.0));
  CHECK_THROWS(propagator_kernel(0.1, 0.125, 5.0));
  CHECK_THROWS(propagator_kernel(1.5, 0.125, 10.0));
  CHECK(aliasing_tail(0.1, 0.25) < 1e-30);
  CHECK(aliasing_tail(0.1, 0.5) < 1e-12);
  CHECK(aliasing_tail(0.1, 2.0) > 1e-6);
}

TEST_CASE("polarization at zero momentum") {
  ModelParams p = params_with_mass(1.0, 1.0, 100, 0.1, Regulator::none);
  CHECK(polarization_momentum(0.0, p) == doctest::Approx(1.0 / (8.0 * kPi * 0.01)).epsilon(1e-8));
  ModelParams q = params_with_mass(1.0, 1.0, 100, 0.1, Regulator::exponential);
  double pi0 = polarization_momentum(0.0, q);
  CHECK(pi0 == doctest::Approx(3.741156570719749).epsilon(1e-9));
  double cpi = pi0 * 8.0 * kPi * q.m2() / q.lambdaK();
  CHECK(cpi > 0.8);
  CHECK(cpi < 1.2);
}

TEST_CASE("polarization decreases with momentum") {
  ModelParams p = params_with_mass(1.0, 1.0, 100, 0.1, Regulator::exponential);
  double prev = polarization_momentum(0.0, p);
  for (double pp : {0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0}) {
    double v = polarization_momentum(pp * pp, p);
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }
}

TEST_CASE("polarization in momentum space is the transform of (lambda K / 2) F^2") {
  ModelParams p = params_with_mass(1.0, 1.0, 100, 0.3, Regulator::exponential);
  RadialKernel k = polarization_radial_kernel(p);
  // pi(p) = 2 pi int r J0(p r) pi(r) dr
  for (double pm : {0.0, 0.4, 1.3}) {
    auto f = [&](double r) { return 2.0 * kPi * r * std::cyl_bessel_j(0.0, pm * r) * k.f(r); };
    double v = integrate_pieces(f, {0.0, 1.0, 4.0, 10.0, 25.0, 60.0}, 1e-11);
    CHECK(v == doctest::Approx(polarization_momentum(pm * pm, p)).epsilon(1e-7));
  }
}

TEST_CASE("polarization table interpolates the direct quadrature") {
  ModelParams p = params_with_mass(1.0, 1.0, 100, 0.1, Regulator::exponential);
  PolarizationTable t(p);
  for (double pm : {0.003, 0.07, 0.1234, 0.9, 2.7, 5.5}) {
    CHECK(t(pm) == doctest::Approx(polarization_momentum(pm * pm, p)).epsilon(1e-11));
  }
}

TEST_CASE("discretized polarization lies between 0 and pi(0)") {
  ModelParams p = params_with_mass(1.0, 1.0, 100, 0.3, Regulator::exponential);
  SampledKernel k = polarization_kernel(p, 0.25, 10.0);
  const int L = 12;
  const double w = 0.0625;
  Eigen::MatrixXd M(L * L, L * L);
  for (int a = 0; a < L * L; ++a)
    for (int b = 0; b < L * L; ++b) M(a, b) = w * k.at(a / L - b / L, a % L - b % L);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  double pi0 = polarization_momentum(0.0, p);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  CHECK(es.eigenvalues().maxCoeff() <= pi0 + 1e-10);
}

TEST_CASE("sqrt(1+pi) kernels form an inverse pair on the grid") {
  ModelParams p = params_with_mass(1.0, 1.0, 100, 0.5, Regulator::exponential);
  auto table = std::make_shared<PolarizationTable>(p);
  SampledKernel kp = sqrt_one_plus_pi_kernel(p, +1, 0.125, 10.0, table);
  SampledKernel km = sqrt_one_plus_pi_kernel(p, -1, 0.125, 10.0, table);
  const double w = 0.125 * 0.125;
  double err = 0.0;
  for (int i : {0, 3, 10, 17}) {
    for (int j : {0, 5, 11}) {
      double conv = 0.0;
      for (int a = -kp.half; a <= kp.half; ++a)
        for (int b = -kp.half; b <= kp.half; ++b) {
          int c = i - a, d = j - b;
          if (std::abs(c) > km.half || std::abs(d) > km.half) continue;
          conv += w * kp.at(a, b) * km.at(c, d);
        }
      err = std::max(err, std::abs(kp.at(i, j) + km.at(i, j) + conv));
    }
  }
  CHECK(err < 1e-6);
}

TEST_CASE("decay rates of the polarization type kernels") {
  ModelParams p = params_with_mass(1.0, 1.0, 100, 0.15, Regulator::exponential);
  auto table = std::make_shared<PolarizationTable>(p);
  for (RadialKernel k : {polarization_radial_kernel(p), sqrt_pi_radial_kernel(p, 1, table),
                         sqrt_pi_radial_kernel(p, -1, table)}) {
    DecayFit f = measure_decay(k.f, 2.0 / k.rate_hint, 8.0 / k.rate_hint, k.kappa);
    CHECK(std::abs(f.rate / 0.3 - 1.0) < 0.1);
  }
}

TEST_CASE("Kelvin kei: series and integral branches agree with reference values") {
  CHECK(kelvin_kei(0.0) == doctest::Approx(-kPi / 4.0).epsilon(1e-15));
  CHECK(kelvin_kei(0.5) == doctest::Approx(-0.6715816950943676).epsilon(1e-12));
  CHECK(kelvin_kei(1.0) == doctest::Approx(-0.4949946365187199).epsilon(1e-12));
  CHECK(kelvin_kei(3.0) == doctest::Approx(-0.05112188404598678).epsilon(1e-11));
  CHECK(kelvin_kei(5.0) == doctest::Approx(0.01118758650986964).epsilon(1e-10));
  CHECK(kelvin_kei(6.0) == doctest::Approx(0.00721649154442546).epsilon(1e-10));
  CHECK(kelvin_kei(9.0) == doctest::Approx(-0.000319152916191274).epsilon(1e-9));
  CHECK(kelvin_kei(5.0 - 1e-9) == doctest::Approx(kelvin_kei(5.0 + 1e-9)).epsilon(1e-8));
}

TEST_CASE("cutoff kernel") {
  CutoffSpec zero;
  zero.c = 0.0;
  SampledKernel d = cutoff_inverse_kernel(zero, 0.125, 2.0);
  CHECK(d.delta == 1.0);
  CHECK(d.sup_norm == 0.0);

  CutoffSpec q;
  q.compact = false;
  RadialKernel k = cutoff_radial_kernel(q);
  CHECK(k.f(0.0) == doctest::Approx(0.125).epsilon(1e-14));
  double total = integrate_pieces([&](double r) { return 2.0 * kPi * r * k.f(r); }, {0.0, 1.0, 5.0, 20.0, 60.0}, 1e-13);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  SampledKernel t = cutoff_inverse_kernel(q, 0.125, 30.0);
  double sum = 0.0;
  for (double v : t.values) sum += v * 0.125 * 0.125;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(cutoff_mass_outside(q) == doctest::Approx(0.6946038911006905).epsilon(1e-9));

  CutoffSpec narrow;
  narrow.compact = false;
  narrow.alpha = 0.02;
  narrow.c = 0.025;
  CHECK(cutoff_mass_outside(narrow) < 0.05);

  CutoffSpec comp;
  RadialKernel kc = cutoff_radial_kernel(comp);
  CHECK(kc.f(1.0) == 0.0);
  CHECK(kc.f(0.999) > 0.0);
  CHECK(cutoff_mass_outside(comp) == 0.0);
  double tc = integrate([&](double r) { return 2.0 * kPi * r * kc.f(r); }, 0.0, 1.0, 1e-13);
  CHECK(tc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(CutoffSpec{1.0, 2.0, 3.0, false}.validate());
}

TEST_CASE("power integrals of the cutoff scale like r^-1/2") {
  double hi = 0.0, lo = 1e300;
  for (int r = 1; r <= 40; ++r) {
    double v = cutoff_power_integral(1.0, r);
    // pi sqrt(pi) Gamma(r - 1/2) / (2 Gamma(r))
    double exact = kPi * std::sqrt(kPi) * std::exp(std::lgamma(r - 0.5) - std::lgamma(double(r))) / 2.0;
    CHECK(v == doctest::Approx(exact).epsilon(1e-10));
    hi = std::max(hi, v * std::sqrt(double(r)));
    lo = std::min(lo, v * std::sqrt(double(r)));
  }
  CHECK(hi < 2.0 * lo);
}

TEST_CASE("kernel cache round trip") {
  SampledKernel k = cutoff_inverse_kernel(CutoffSpec{}, 0.25, 2.0);
  write_kernel_cache("kernel_cache_test.bin", k, "abc");
  std::string h;
  SampledKernel r = read_kernel_cache("kernel_cache_test.bin", &h);
  CHECK(h == "abc");
  CHECK(r.values == k.values);
  CHECK(r.half == k.half);
  std::remove("kernel_cache_test.bin");
}
