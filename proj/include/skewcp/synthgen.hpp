#pragma once

// Synthetic regression data with known conditional location, scale and
// noise shape: X ~ U[0,1]^d, Y = m(X) + s(X) * E with E standardized
// (mean 0, variance 1). Only the first coordinate drives m and s; the
// remaining d - 1 coordinates are pure noise features.

#include "skewcp/dataset.hpp"
#include "skewcp/rng.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace skewcp {

enum class MeanFn { linear, sine, step };
enum class ScaleFn { constant, linear, bump };
enum class Noise {
    none,
    gaussian,
    uniform,
    lognormal_std,
    exp_std,
    lognormal_std_mirror,
    exp_std_mirror,
};

/// Log-scale of the standardized lognormal noise.
inline constexpr double lognormal_log_scale = 0.75;

struct SynthSpec {
    MeanFn mean_fn = MeanFn::sine;
    ScaleFn scale_fn = ScaleFn::constant;
    Noise noise = Noise::gaussian;
    int d = 1;
    Index n = 1000;
    std::uint64_t seed = 0;
};

MeanFn parse_mean_fn(std::string_view id);
ScaleFn parse_scale_fn(std::string_view id);
Noise parse_noise(std::string_view id);
std::string_view to_string(MeanFn f) noexcept;
std::string_view to_string(ScaleFn f) noexcept;
std::string_view to_string(Noise e) noexcept;

double mean_value(MeanFn f, const FeatureRow& x);
double scale_value(ScaleFn f, const FeatureRow& x);

/// One standardized noise draw.
double draw_noise(Noise e, Xoshiro256& rng);
/// Quantile function of the standardized noise.
double noise_quantile(Noise e, double level);
/// Standard normal quantile function.
double normal_quantile(double level);

Dataset generate(const SynthSpec& spec);

/// m(x) + s(x) * Q_E(level).
double true_quantile(const SynthSpec& spec, const FeatureRow& x, double level);

} // namespace skewcp
