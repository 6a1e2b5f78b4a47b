#pragma once

#include <cmath>

namespace streetrisk {

/// Standard normal CDF. erfc keeps full relative accuracy in both tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Two-sided p-value 2 (1 - Phi(|z|)), evaluated as erfc(|z| / sqrt 2) to
/// avoid cancellation for large |z|.
inline double two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

} // namespace streetrisk
