#include "hyperspin/pulse.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hyperspin {

void ShapedPulse::validate() const {
  if (!(dt_us > 0.0) || !std::isfinite(dt_us))
    throw std::invalid_argument("ShapedPulse: dt_us must be positive");
  if (amp_x_mhz.empty())
    throw std::invalid_argument("ShapedPulse: no segments");
  if (amp_x_mhz.size() != amp_y_mhz.size())
    throw std::invalid_argument("ShapedPulse: quadrature length mismatch");
  for (std::size_t k = 0; k < amp_x_mhz.size(); ++k)
    if (!std::isfinite(amp_x_mhz[k]) || !std::isfinite(amp_y_mhz[k]))
      throw std::invalid_argument("ShapedPulse: non-finite amplitude");
}

ShapedPulse clip_to_max(ShapedPulse pulse, double max_amp_mhz) {
  pulse.validate();
  if (!(max_amp_mhz >= 0.0))
    throw std::invalid_argument("clip_to_max: max_amp_mhz must be >= 0");
  for (int k = 0; k < pulse.n_segments(); ++k) {
    const double r = std::hypot(pulse.amp_x_mhz[k], pulse.amp_y_mhz[k]);
    if (r > max_amp_mhz) {
      const double s = max_amp_mhz / r;
      pulse.amp_x_mhz[k] *= s;
      pulse.amp_y_mhz[k] *= s;
    }
  }
  return pulse;
}

void save_pulse(const ShapedPulse& pulse, const std::string& path) {
  pulse.validate();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("save_pulse: cannot write " + path);
  std::fprintf(f, "# shaped pulse, piecewise-constant IQ envelope\n");
  std::fprintf(f, "# dt_us %.17g\n", pulse.dt_us);
  std::fprintf(f, "# columns: index amp_x_mhz amp_y_mhz\n");
  for (int k = 0; k < pulse.n_segments(); ++k)
    std::fprintf(f, "%d %.17g %.17g\n", k, pulse.amp_x_mhz[k],
                 pulse.amp_y_mhz[k]);
  std::fclose(f);
}

ShapedPulse load_pulse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pulse: cannot read " + path);
  ShapedPulse pulse;
  bool have_dt = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;  // blank line
    if (first[0] == '#') {
      // Header comments; pick up "dt_us <value>" wherever it appears.
      std::string tok;
      while (ss >> tok) {
        if (tok == "dt_us") {
          if (!(ss >> pulse.dt_us))
            throw std::runtime_error("load_pulse: bad dt_us header");
          have_dt = true;
        }
      }
      continue;
    }
    int index;
    double ax, ay;
    std::istringstream row(line);
    if (!(row >> index >> ax >> ay))
      throw std::runtime_error("load_pulse: malformed line " +
                               std::to_string(line_no));
    if (index != pulse.n_segments())
      throw std::runtime_error("load_pulse: segment indices must run 0,1,2,...");
    pulse.amp_x_mhz.push_back(ax);
    pulse.amp_y_mhz.push_back(ay);
  }
  if (!have_dt) throw std::runtime_error("load_pulse: missing dt_us header");
  pulse.validate();
  return pulse;
}

}  // namespace hyperspin
