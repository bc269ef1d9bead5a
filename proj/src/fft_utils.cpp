#include "hyperspin/fft_utils.hpp"

#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace hyperspin {

std::vector<cxd> fft_forward(const std::vector<cxd>& x) {
  if (x.empty()) throw std::invalid_argument("fft_forward: empty input");
  Eigen::FFT<double> fft;
  std::vector<cxd> out;
  fft.fwd(out, x);
  return out;
}

}  // namespace hyperspin
