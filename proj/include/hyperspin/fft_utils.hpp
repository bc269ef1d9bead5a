#pragma once

#include <vector>

#include "hyperspin/linalg.hpp"

namespace hyperspin {

/// Forward DFT, X_k = sum_n x_n exp(-2 pi i k n / N).
std::vector<cxd> fft_forward(const std::vector<cxd>& x);

}  // namespace hyperspin
