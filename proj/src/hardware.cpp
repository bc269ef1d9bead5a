#include "hyperspin/hardware.hpp"

#include <cmath>
#include <stdexcept>

#include "hyperspin/fft_utils.hpp"

namespace hyperspin {

void ResonatorModel::validate() const {
  if (!(center_freq_ghz > 0.0))
    throw std::invalid_argument("ResonatorModel: center frequency must be > 0");
  if (!(q_factor > 0.0))
    throw std::invalid_argument("ResonatorModel: q_factor must be > 0");
  if (!(max_drive_mhz > 0.0))
    throw std::invalid_argument("ResonatorModel: max_drive must be > 0");
}

ShapedPulse apply_filter(const ShapedPulse& pulse, const ResonatorModel& res) {
  pulse.validate();
  res.validate();
  const double f_cut = 0.5 * res.bandwidth_mhz();
  // Pole placed so the discrete response crosses half power exactly at
  // f_cut (the naive exp(-2 pi f_cut dt) pole lands ~2% high at 1 ns).
  // A cutoff at or beyond Nyquist cannot be realized: fall back to the
  // analog pole, which makes the filter essentially transparent there.
  const double w = kTwoPi * f_cut * pulse.dt_us;
  double p;
  if (w < std::numbers::pi) {
    const double a = 2.0 - std::cos(w);
    p = a - std::sqrt(a * a - 1.0);
  } else {
    p = std::exp(-w);
  }

  ShapedPulse out = pulse;
  cxd y(0.0, 0.0);
  for (int k = 0; k < pulse.n_segments(); ++k) {
    y = (1.0 - p) * cxd(pulse.amp_x_mhz[k], pulse.amp_y_mhz[k]) + p * y;
    out.amp_x_mhz[k] = y.real();
    out.amp_y_mhz[k] = y.imag();
  }
  return clip_to_max(std::move(out), res.max_drive_mhz);
}

namespace {

double rms_difference(const ShapedPulse& a, const ShapedPulse& b) {
  double sum = 0.0;
  for (int k = 0; k < a.n_segments(); ++k) {
    const double dx = a.amp_x_mhz[k] - b.amp_x_mhz[k];
    const double dy = a.amp_y_mhz[k] - b.amp_y_mhz[k];
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / a.n_segments());
}

}  // namespace

PredistortResult predistort(const ShapedPulse& target,
                            const ResonatorModel& res, double gain,
                            int max_iters, double tol) {
  target.validate();
  res.validate();
  if (!(gain > 0.0) || gain > 1.0)
    throw std::invalid_argument("predistort: gain must be in (0, 1]");
  if (max_iters < 1)
    throw std::invalid_argument("predistort: max_iters must be >= 1");
  if (!(tol >= 0.0))
    throw std::invalid_argument("predistort: tol must be >= 0");

  PredistortResult out;
  out.pulse = target;
  out.residual_mhz = rms_difference(apply_filter(out.pulse, res), target);
  ShapedPulse x = out.pulse;
  double prev = out.residual_mhz;
  int growth_streak = 0;
  for (int it = 0; it < max_iters && out.residual_mhz > tol; ++it) {
    const ShapedPulse through = apply_filter(x, res);
    for (int k = 0; k < target.n_segments(); ++k) {
      x.amp_x_mhz[k] += gain * (target.amp_x_mhz[k] - through.amp_x_mhz[k]);
      x.amp_y_mhz[k] += gain * (target.amp_y_mhz[k] - through.amp_y_mhz[k]);
    }
    // The drive chain cannot request more power than it can deliver, so
    // the correction waveform obeys the same amplitude limit. This is
    // what leaves sharp features imperfectly correctable: the clamped
    // iteration settles into a limit cycle whose best point we keep.
    x = clip_to_max(std::move(x), res.max_drive_mhz);
    const double r = rms_difference(apply_filter(x, res), target);
    out.iterations = it + 1;
    if (r < out.residual_mhz) {
      out.residual_mhz = r;
      out.pulse = x;
    }
    growth_streak = r > prev ? growth_streak + 1 : 0;
    if (growth_streak >= 10 && r > 10.0 * out.residual_mhz)
      throw std::runtime_error("predistort: residual diverges");
    prev = r;
  }
  return out;
}

SignalSeries power_spectrum(const ShapedPulse& pulse) {
  pulse.validate();
  const int n = pulse.n_segments();
  if (n < 8)
    throw std::invalid_argument("power_spectrum: need at least 8 segments");

  std::vector<cxd> env(n);
  for (int k = 0; k < n; ++k)
    env[k] = cxd(pulse.amp_x_mhz[k], pulse.amp_y_mhz[k]);
  const std::vector<cxd> spec = fft_forward(env);

  const double df = 1.0 / (n * pulse.dt_us);
  const double scale = pulse.dt_us * pulse.dt_us;
  SignalSeries out;
  out.dt = df;
  out.start = -(n / 2) * df;
  out.label = "power_spectrum";
  out.values.resize(n);
  // fftshift: negative frequencies first, DC at index n/2.
  for (int k = 0; k < n; ++k) {
    const int src = (k + n - n / 2) % n;
    out.values[k] = std::norm(spec[src]) * scale;
  }
  return out;
}

}  // namespace hyperspin
