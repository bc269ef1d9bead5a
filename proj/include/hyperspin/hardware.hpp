#pragma once

#include "hyperspin/experiments.hpp"
#include "hyperspin/pulse.hpp"

namespace hyperspin {

/// Loop-gap resonator with a deliberately spoiled quality factor: wide
/// bandwidth at the cost of drive amplitude.
struct ResonatorModel {
  double center_freq_ghz = 9.1875;
  double q_factor = 65.0;
  double max_drive_mhz = 28.0;  // amplitude clamp after the filter

  double bandwidth_mhz() const { return center_freq_ghz * 1e3 / q_factor; }
  void validate() const;
};

/// Resonator distortion of a control envelope: single-pole low-pass on
/// the complex baseband (amp_x + i amp_y) with cutoff at half the
/// resonator bandwidth, evaluated by the exact discrete pole recursion,
/// then clamped to max_drive per segment.
ShapedPulse apply_filter(const ShapedPulse& pulse, const ResonatorModel& res);

struct PredistortResult {
  ShapedPulse pulse;          // input that best reproduces the target
  double residual_mhz = 0.0;  // RMS envelope error of apply_filter(pulse)
  int iterations = 0;
};

/// Feedback correction loop: x <- x + gain * (target - apply_filter(x)),
/// with x held inside the max_drive amplitude limit, stopping when the
/// RMS residual drops below tol or after max_iters; returns the best
/// iterate seen. Throws std::runtime_error if the residual runs away
/// (ten consecutive growths to over 10x the best). gain must lie in
/// (0, 1].
PredistortResult predistort(const ShapedPulse& target,
                            const ResonatorModel& res, double gain = 0.5,
                            int max_iters = 200, double tol = 1e-6);

/// Two-sided power spectral density of the complex envelope, frequency
/// axis in MHz centered on zero; bin values |X(f)|^2 dt^2 so that
/// sum(psd) * df equals sum(|envelope|^2) * dt (Parseval).
SignalSeries power_spectrum(const ShapedPulse& pulse);

}  // namespace hyperspin
