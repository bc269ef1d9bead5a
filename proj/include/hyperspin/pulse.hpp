#pragma once

#include <string>
#include <vector>

namespace hyperspin {

/// Piecewise-constant IQ drive envelope. Segment k drives the electron for
/// dt_us with Rabi amplitudes (amp_x_mhz[k], amp_y_mhz[k]); an amplitude of
/// f MHz on one quadrature turns the bare spin through 2*pi*f*dt per slice.
struct ShapedPulse {
  double dt_us = 0.0;
  std::vector<double> amp_x_mhz;
  std::vector<double> amp_y_mhz;

  int n_segments() const { return static_cast<int>(amp_x_mhz.size()); }
  double duration_us() const { return dt_us * n_segments(); }
  void validate() const;  // throws std::invalid_argument
};

/// Scale every segment radially so sqrt(x^2 + y^2) <= max_amp_mhz,
/// preserving the drive phase.
ShapedPulse clip_to_max(ShapedPulse pulse, double max_amp_mhz);

/// Text format: comment header carrying dt_us, then one line per segment
/// "index amp_x_mhz amp_y_mhz". Amplitudes are written with enough digits
/// that load_pulse(save_pulse(p)) reproduces p bit for bit.
void save_pulse(const ShapedPulse& pulse, const std::string& path);
ShapedPulse load_pulse(const std::string& path);

}  // namespace hyperspin
