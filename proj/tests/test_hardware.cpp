#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <numbers>

#include "hyperspin/dynamics.hpp"
#include "hyperspin/hardware.hpp"

using namespace hyperspin;

namespace {

ShapedPulse constant_pulse(double ax, double ay, int n, double dt = 1e-3) {
  ShapedPulse p;
  p.dt_us = dt;
  p.amp_x_mhz.assign(n, ax);
  p.amp_y_mhz.assign(n, ay);
  return p;
}

// Smooth bell envelope well inside the resonator band.
ShapedPulse gaussian_pulse(double peak, int n, double dt = 1e-3) {
  ShapedPulse p;
  p.dt_us = dt;
  p.amp_x_mhz.resize(n);
  p.amp_y_mhz.assign(n, 0.0);
  const double mid = 0.5 * (n - 1), width = n / 6.0;
  for (int k = 0; k < n; ++k)
    p.amp_x_mhz[k] = peak * std::exp(-0.5 * std::pow((k - mid) / width, 2));
  return p;
}

ShapedPulse random_pulse(double scale, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  const auto u = [&] { return 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0; };
  ShapedPulse p;
  p.dt_us = 1e-3;
  p.amp_x_mhz.resize(n);
  p.amp_y_mhz.resize(n);
  for (int k = 0; k < n; ++k) {
    p.amp_x_mhz[k] = scale * u();
    p.amp_y_mhz[k] = scale * u();
  }
  return p;
}

}  // namespace

TEST_CASE("resonator bandwidth follows center frequency over Q") {
  const ResonatorModel res;
  CHECK(res.bandwidth_mhz() == doctest::Approx(9187.5 / 65.0).epsilon(1e-12));
  CHECK(res.bandwidth_mhz() > 140.0);
  CHECK(res.bandwidth_mhz() < 142.0);

  ResonatorModel bad;
  bad.q_factor = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ResonatorModel{};
  bad.center_freq_ghz = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ResonatorModel{};
  bad.max_drive_mhz = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("filter has unit DC gain") {
  const ResonatorModel res;
  const ShapedPulse out = apply_filter(constant_pulse(10.0, 0.0, 2000), res);
  CHECK(out.amp_x_mhz.back() == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(std::abs(out.amp_y_mhz.back()) < 1e-12);
}

// Pole of the discrete single-pole filter: placed so the half-power point
// of the realized response sits exactly at the cutoff frequency.
double filter_pole(double f_cut_mhz, double dt_us) {
  const double a = 2.0 - std::cos(kTwoPi * f_cut_mhz * dt_us);
  return a - std::sqrt(a * a - 1.0);
}

TEST_CASE("impulse response decays geometrically with the filter pole") {
  const ResonatorModel res;
  ShapedPulse imp = constant_pulse(0.0, 0.0, 64);
  imp.amp_x_mhz[0] = 1.0;
  const ShapedPulse out = apply_filter(imp, res);

  const double f_cut = 0.5 * res.bandwidth_mhz();
  const double p = filter_pole(f_cut, imp.dt_us);
  for (int k = 0; k < 20; ++k)
    CHECK(out.amp_x_mhz[k] ==
          doctest::Approx((1.0 - p) * std::pow(p, k)).epsilon(1e-12));
  // The pole approaches exp(-2 pi cutoff dt) as dt -> 0.
  CHECK(std::log(filter_pole(f_cut, 1e-5)) / (-kTwoPi * f_cut * 1e-5) ==
        doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("tone at the cutoff comes through 3 dB down") {
  const ResonatorModel res;
  const double f_cut = 0.5 * res.bandwidth_mhz();
  ShapedPulse tone = constant_pulse(0.0, 0.0, 3000);
  for (int k = 0; k < tone.n_segments(); ++k) {
    tone.amp_x_mhz[k] = std::cos(kTwoPi * f_cut * k * tone.dt_us);
    tone.amp_y_mhz[k] = std::sin(kTwoPi * f_cut * k * tone.dt_us);
  }
  const ShapedPulse out = apply_filter(tone, res);
  const int last = tone.n_segments() - 1;
  const double amp = std::hypot(out.amp_x_mhz[last], out.amp_y_mhz[last]);
  CHECK(amp > 0.98 / std::sqrt(2.0));
  CHECK(amp < 1.02 / std::sqrt(2.0));
}

TEST_CASE("filter is linear below the clamp") {
  const ResonatorModel res;
  const ShapedPulse a = random_pulse(5.0, 120, 3);
  const ShapedPulse b = random_pulse(5.0, 120, 4);
  ShapedPulse sum = a;
  for (int k = 0; k < sum.n_segments(); ++k) {
    sum.amp_x_mhz[k] += b.amp_x_mhz[k];
    sum.amp_y_mhz[k] += b.amp_y_mhz[k];
  }
  const ShapedPulse fa = apply_filter(a, res);
  const ShapedPulse fb = apply_filter(b, res);
  const ShapedPulse fsum = apply_filter(sum, res);
  for (int k = 0; k < sum.n_segments(); ++k) {
    CHECK(std::abs(fsum.amp_x_mhz[k] - fa.amp_x_mhz[k] - fb.amp_x_mhz[k]) <
          1e-10);
    CHECK(std::abs(fsum.amp_y_mhz[k] - fa.amp_y_mhz[k] - fb.amp_y_mhz[k]) <
          1e-10);
  }
}

TEST_CASE("filter clamps overdriven output at max_drive") {
  const ResonatorModel res;
  const ShapedPulse out = apply_filter(constant_pulse(60.0, 80.0, 2000), res);
  const int last = out.n_segments() - 1;
  const double amp = std::hypot(out.amp_x_mhz[last], out.amp_y_mhz[last]);
  CHECK(amp == doctest::Approx(res.max_drive_mhz).epsilon(1e-9));
  // Radial clamp keeps the phase.
  CHECK(out.amp_y_mhz[last] / out.amp_x_mhz[last] ==
        doctest::Approx(80.0 / 60.0).epsilon(1e-9));
}

TEST_CASE("band-limited targets are corrected to numerical precision") {
  const ResonatorModel res;
  ShapedPulse target = constant_pulse(0.0, 0.0, 800);
  for (int k = 0; k < 800; ++k)  // slow half-cosine ramp, 0 to 20 MHz
    target.amp_x_mhz[k] = 10.0 * (1.0 - std::cos(std::numbers::pi * k / 799));
  const PredistortResult r = predistort(target, res, 0.5, 50, 1e-6);
  CHECK(r.residual_mhz < 1e-6);
  CHECK(r.iterations <= 50);

  const ShapedPulse through = apply_filter(r.pulse, res);
  for (int k = 0; k < target.n_segments(); ++k)
    CHECK(std::abs(through.amp_x_mhz[k] - target.amp_x_mhz[k]) < 1e-5);
}

TEST_CASE("an already transparent channel needs no correction") {
  ResonatorModel res;
  res.q_factor = 1e-9;  // bandwidth far beyond the envelope content
  const ShapedPulse target = gaussian_pulse(20.0, 64);
  const PredistortResult r = predistort(target, res, 0.5, 10, 1e-9);
  CHECK(r.iterations == 0);
  CHECK(r.residual_mhz < 1e-12);
  for (int k = 0; k < target.n_segments(); ++k)
    CHECK(r.pulse.amp_x_mhz[k] == target.amp_x_mhz[k]);
}

TEST_CASE("residual shrinks monotonically on band-limited targets") {
  const ResonatorModel res;
  const ShapedPulse target = gaussian_pulse(15.0, 400);
  double prev = 1e300;
  for (int iters : {1, 3, 8, 20, 40}) {
    const PredistortResult r = predistort(target, res, 0.5, iters, 0.0);
    CHECK(r.residual_mhz <= prev);
    prev = r.residual_mhz;
  }
}

TEST_CASE("out-of-band content leaves a residual floor") {
  const ResonatorModel res;
  ShapedPulse target = constant_pulse(0.0, 0.0, 400);
  for (int k = 0; k < target.n_segments(); ++k)
    target.amp_x_mhz[k] = (k % 2 == 0) ? 25.0 : -25.0;  // Nyquist content
  const PredistortResult r = predistort(target, res, 0.5, 200, 1e-6);
  CHECK(r.iterations == 200);   // never reaches tol
  CHECK(r.residual_mhz > 1.0);  // the floor is far above tol
}

TEST_CASE("predistort parameter validation") {
  const ShapedPulse target = gaussian_pulse(10.0, 32);
  const ResonatorModel res;
  CHECK_THROWS_AS(predistort(target, res, 0.0, 10, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(predistort(target, res, 1.5, 10, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(predistort(target, res, 0.5, 0, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(predistort(target, res, 0.5, 10, -1.0),
                  std::invalid_argument);
}

TEST_CASE("power spectrum needs at least 8 segments") {
  CHECK_THROWS_AS(power_spectrum(constant_pulse(1.0, 0.0, 7)),
                  std::invalid_argument);
}

TEST_CASE("constant envelope concentrates its power at DC") {
  const SignalSeries s = power_spectrum(constant_pulse(3.0, 0.0, 64));
  const int dc = 32;  // fftshifted DC bin
  CHECK(s.start + dc * s.dt == doctest::Approx(0.0).epsilon(1e-12));
  for (int k = 0; k < 64; ++k)
    if (k != dc) CHECK(s.values[k] < 1e-18 * s.values[dc] + 1e-30);
}

TEST_CASE("real tone shows up at plus and minus its frequency") {
  ShapedPulse tone = constant_pulse(0.0, 0.0, 200);
  for (int k = 0; k < 200; ++k)
    tone.amp_x_mhz[k] = std::cos(kTwoPi * 50.0 * k * tone.dt_us);
  const SignalSeries s = power_spectrum(tone);
  const double df = 1.0 / (200 * tone.dt_us);  // 5 MHz
  const int plus = static_cast<int>(std::lround(50.0 / df)) + 100;
  const int minus = -static_cast<int>(std::lround(50.0 / df)) + 100;
  const double top = *std::max_element(s.values.begin(), s.values.end());
  CHECK(s.values[plus] == doctest::Approx(top).epsilon(1e-9));
  CHECK(s.values[minus] == doctest::Approx(top).epsilon(1e-9));
  for (int k = 0; k < 200; ++k)
    if (k != plus && k != minus) CHECK(s.values[k] < 1e-12 * top);
}

TEST_CASE("power spectrum satisfies Parseval") {
  const ShapedPulse p = random_pulse(10.0, 151, 9);
  const SignalSeries s = power_spectrum(p);
  double time_side = 0.0;
  for (int k = 0; k < p.n_segments(); ++k)
    time_side +=
        (p.amp_x_mhz[k] * p.amp_x_mhz[k] + p.amp_y_mhz[k] * p.amp_y_mhz[k]) *
        p.dt_us;
  double freq_side = 0.0;
  for (double v : s.values) freq_side += v * s.dt;
  CHECK(freq_side == doctest::Approx(time_side).epsilon(1e-9));
}

TEST_CASE("correction restores the gate the distortion broke") {
  const SpinSystem sys = malonic_ref();
  const Matrix h = build_hamiltonian(sys);
  const ResonatorModel res;
  // Bell envelope on a 40 MHz intermediate frequency: enough sideband
  // content to feel the filter, still inside the correctable band.
  ShapedPulse pulse = gaussian_pulse(12.0, 400);
  for (int k = 0; k < pulse.n_segments(); ++k) {
    const double bell = pulse.amp_x_mhz[k];
    pulse.amp_x_mhz[k] = bell * std::cos(kTwoPi * 40.0 * k * pulse.dt_us);
    pulse.amp_y_mhz[k] = bell * std::sin(kTwoPi * 40.0 * k * pulse.dt_us);
  }

  const Matrix ideal = propagate(h, pulse);
  const auto gate_fidelity = [&](const ShapedPulse& applied) {
    return fidelity_unitary(propagate(h, applied), ideal);
  };

  const double f_distorted = gate_fidelity(apply_filter(pulse, res));
  CHECK(f_distorted < 0.999);

  const PredistortResult r = predistort(pulse, res, 0.5, 100, 1e-7);
  const double f_corrected = gate_fidelity(apply_filter(r.pulse, res));
  CHECK(f_corrected > f_distorted);
  CHECK((f_corrected - f_distorted) / (1.0 - f_distorted) > 0.9);
}
