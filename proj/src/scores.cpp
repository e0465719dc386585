#include "skewcp/scores.hpp"

#include <cmath>

namespace skewcp {

namespace {

using Int128 = __int128;

// floor(alpha * m) for alpha in (0,1), exactly.
//
// Levels written in decimal (0.1, 0.15, 0.3) are not representable in binary,
// and the binary value can sit on either side of the decimal one. An alpha
// within 1e-15 of a 12-digit decimal is therefore treated as that decimal;
// anything else is expanded exactly from its binary mantissa.
std::int64_t floor_alpha_times(double alpha, std::int64_t m)
{
    constexpr std::int64_t scale = 1'000'000'000'000;
    const double scaled = alpha * static_cast<double>(scale);
    const auto p = static_cast<std::int64_t>(std::llround(scaled));
    if (std::abs(scaled - static_cast<double>(p)) < 1e-3) {
        return static_cast<std::int64_t>(static_cast<Int128>(p) * m / scale);
    }
    int exponent = 0;
    const double fraction = std::frexp(alpha, &exponent); // alpha = fraction * 2^exponent
    const auto mantissa = static_cast<std::int64_t>(std::ldexp(fraction, 53));
    const int shift = 53 - exponent;
    if (shift >= 127) {
        return 0;
    }
    return static_cast<std::int64_t>((static_cast<Int128>(mantissa) * m) >> shift);
}

} // namespace

std::int64_t ceil_index(std::int64_t n, double alpha)
{
    if (n < 1) {
        throw ConfigError("ceil_index: calibration size must be positive");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("ceil_index: alpha must lie in (0, 1)");
    }
    // ceil((1 - alpha)(n + 1)) = (n + 1) - floor(alpha (n + 1))
    const std::int64_t k = (n + 1) - floor_alpha_times(alpha, n + 1);
    if (k > n) {
        throw AdmissibilityError("calibration set of size " + std::to_string(n) + " is too small for alpha = "
                                 + std::to_string(alpha) + " (needs ceil((1-alpha)(n+1)) = " + std::to_string(k)
                                 + " <= n)");
    }
    return k;
}

ConformalThreshold calibrate_threshold(std::span<const double> scores, double alpha)
{
    if (scores.empty()) {
        throw DataError("calibrate_threshold: no calibration scores");
    }
    for (double s : scores) {
        if (std::isnan(s)) {
            throw DataError("calibrate_threshold: NaN conformity score");
        }
    }
    const auto n = static_cast<std::int64_t>(scores.size());
    const std::int64_t k = ceil_index(n, alpha);
    std::vector<double> sorted(scores.begin(), scores.end());
    const auto kth = sorted.begin() + (k - 1);
    std::nth_element(sorted.begin(), kth, sorted.end());
    return {*kth, alpha, n, k};
}

} // namespace skewcp
