#include "skewcp/synthgen.hpp"

#include "skewcp/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

namespace skewcp {

namespace {

template <typename Enum, std::size_t N>
Enum parse_id(std::string_view id, const std::array<std::pair<std::string_view, Enum>, N>& table, const char* what)
{
    for (const auto& [name, value] : table) {
        if (name == id) {
            return value;
        }
    }
    throw ConfigError(std::string("unknown ") + what + " id '" + std::string(id) + "'");
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) noexcept
{
    for (const auto& [name, v] : table) {
        if (v == value) {
            return name;
        }
    }
    return "unknown";
}

constexpr std::array<std::pair<std::string_view, MeanFn>, 3> mean_ids {{
    {"linear", MeanFn::linear},
    {"sine", MeanFn::sine},
    {"step", MeanFn::step},
}};

constexpr std::array<std::pair<std::string_view, ScaleFn>, 3> scale_ids {{
    {"constant", ScaleFn::constant},
    {"linear", ScaleFn::linear},
    {"bump", ScaleFn::bump},
}};

constexpr std::array<std::pair<std::string_view, Noise>, 7> noise_ids {{
    {"none", Noise::none},
    {"gaussian", Noise::gaussian},
    {"uniform", Noise::uniform},
    {"lognormal_std", Noise::lognormal_std},
    {"exp_std", Noise::exp_std},
    {"lognormal_std_mirror", Noise::lognormal_std_mirror},
    {"exp_std_mirror", Noise::exp_std_mirror},
}};

// Mean and standard deviation of exp(s Z), Z ~ N(0,1).
double lognormal_mean()
{
    const double s = lognormal_log_scale;
    return std::exp(0.5 * s * s);
}

double lognormal_sd()
{
    const double s2 = lognormal_log_scale * lognormal_log_scale;
    return std::sqrt((std::exp(s2) - 1.0) * std::exp(s2));
}

} // namespace

MeanFn parse_mean_fn(std::string_view id) { return parse_id(id, mean_ids, "mean function"); }
ScaleFn parse_scale_fn(std::string_view id) { return parse_id(id, scale_ids, "scale function"); }
Noise parse_noise(std::string_view id) { return parse_id(id, noise_ids, "noise"); }
std::string_view to_string(MeanFn f) noexcept { return name_of(f, mean_ids); }
std::string_view to_string(ScaleFn f) noexcept { return name_of(f, scale_ids); }
std::string_view to_string(Noise e) noexcept { return name_of(e, noise_ids); }

double mean_value(MeanFn f, const FeatureRow& x)
{
    const double u = x(0);
    switch (f) {
    case MeanFn::linear:
        return 1.0 + 2.0 * u;
    case MeanFn::sine:
        return std::sin(2.0 * std::numbers::pi * u);
    case MeanFn::step:
        return u <= 0.5 ? 0.0 : 2.0;
    }
    throw ConfigError("mean_value: bad function id");
}

double scale_value(ScaleFn f, const FeatureRow& x)
{
    const double u = x(0);
    switch (f) {
    case ScaleFn::constant:
        return 1.0;
    case ScaleFn::linear:
        return 0.5 + 1.5 * u;
    case ScaleFn::bump: {
        const double t = (u - 0.5) / 0.2;
        return 0.3 + std::exp(-t * t);
    }
    }
    throw ConfigError("scale_value: bad function id");
}

double draw_noise(Noise e, Xoshiro256& rng)
{
    switch (e) {
    case Noise::none:
        return 0.0;
    case Noise::gaussian:
        return standard_normal(rng);
    case Noise::uniform:
        return std::numbers::sqrt3 * (2.0 * uniform01(rng) - 1.0);
    case Noise::lognormal_std:
        return (std::exp(lognormal_log_scale * standard_normal(rng)) - lognormal_mean()) / lognormal_sd();
    case Noise::lognormal_std_mirror:
        return -draw_noise(Noise::lognormal_std, rng);
    case Noise::exp_std:
        return -std::log(1.0 - uniform01(rng)) - 1.0;
    case Noise::exp_std_mirror:
        return -draw_noise(Noise::exp_std, rng);
    }
    throw ConfigError("draw_noise: bad noise id");
}

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("normal_quantile: level must lie in (0, 1)");
    }
    // Acklam's rational approximation, then one Halley step against erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double noise_quantile(Noise e, double level)
{
    if (!(level > 0.0 && level < 1.0)) {
        throw ConfigError("noise_quantile: level must lie in (0, 1)");
    }
    switch (e) {
    case Noise::none:
        return 0.0;
    case Noise::gaussian:
        return normal_quantile(level);
    case Noise::uniform:
        return std::numbers::sqrt3 * (2.0 * level - 1.0);
    case Noise::lognormal_std:
        return (std::exp(lognormal_log_scale * normal_quantile(level)) - lognormal_mean()) / lognormal_sd();
    case Noise::lognormal_std_mirror:
        return -noise_quantile(Noise::lognormal_std, 1.0 - level);
    case Noise::exp_std:
        return -std::log1p(-level) - 1.0;
    case Noise::exp_std_mirror:
        return -noise_quantile(Noise::exp_std, 1.0 - level);
    }
    throw ConfigError("noise_quantile: bad noise id");
}

Dataset generate(const SynthSpec& spec)
{
    if (spec.d < 1) {
        throw ConfigError("synth: d must be at least 1");
    }
    if (spec.n < 1) {
        throw ConfigError("synth: n must be at least 1");
    }
    Xoshiro256 rng(spec.seed);
    FeatureMatrix x(spec.n, spec.d);
    Eigen::VectorXd y(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        for (Index j = 0; j < spec.d; ++j) {
            x(i, j) = uniform01(rng);
        }
        const auto row = x.row(i);
        y(i) = mean_value(spec.mean_fn, row) + scale_value(spec.scale_fn, row) * draw_noise(spec.noise, rng);
    }
    return Dataset(std::move(x), std::move(y));
}

double true_quantile(const SynthSpec& spec, const FeatureRow& x, double level)
{
    return mean_value(spec.mean_fn, x) + scale_value(spec.scale_fn, x) * noise_quantile(spec.noise, level);
}

} // namespace skewcp
