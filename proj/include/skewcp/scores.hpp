#pragma once

// Conformity scores, interval families and the calibration order statistic.
// Scalar overloads are the reference definitions; the Eigen array overloads
// evaluate the same formulas coefficient-wise and return expressions.

#include "skewcp/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace skewcp {

/// Closed interval [lo, hi].
template <std::floating_point Scalar>
struct Interval {
    Scalar lo;
    Scalar hi;

    Scalar width() const noexcept { return hi - lo; }
    bool contains(Scalar y) const noexcept { return lo <= y && y <= hi; }
};

// ---------------------------------------------------------------------------
// Order statistic

/// k = ceil((1 - alpha)(n + 1)), the smallest integer k >= (1 - alpha)(n + 1).
/// Throws AdmissibilityError when k > n.
std::int64_t ceil_index(std::int64_t n, double alpha);

struct ConformalThreshold {
    double r_hat = 0.0;
    double alpha = 0.0;
    std::int64_t n_calib = 0;
    std::int64_t k_index = 0;
};

/// The k-th smallest score (1-based, duplicates kept) with k from ceil_index.
/// Negative scores are allowed (CQR).
ConformalThreshold calibrate_threshold(std::span<const double> scores, double alpha);

// ---------------------------------------------------------------------------
// Scaled absolute residual

template <std::floating_point Scalar>
constexpr Scalar scaled_score(Scalar mu, Scalar sigma, Scalar y) noexcept
{
    return std::abs(y - mu) / sigma;
}

template <std::floating_point Scalar>
constexpr Interval<Scalar> scaled_interval(Scalar mu, Scalar sigma, Scalar r) noexcept
{
    return {mu - r * sigma, mu + r * sigma};
}

// ---------------------------------------------------------------------------
// Skewed family [mu - r*sigma*e^-gamma, mu + r*sigma*e^gamma] and its gauge

template <std::floating_point Scalar>
Scalar skew_gauge(Scalar mu, Scalar sigma, Scalar gamma, Scalar y) noexcept
{
    const Scalar left = std::max(mu - y, Scalar(0)) / (sigma * std::exp(-gamma));
    const Scalar right = std::max(y - mu, Scalar(0)) / (sigma * std::exp(gamma));
    return std::max(left, right);
}

template <std::floating_point Scalar>
Interval<Scalar> skew_interval(Scalar mu, Scalar sigma, Scalar gamma, Scalar r) noexcept
{
    return {mu - r * sigma * std::exp(-gamma), mu + r * sigma * std::exp(gamma)};
}

/// Coefficient-wise gauge over arrays of centers, scales, tilts and responses.
template <typename Mu, typename Sigma, typename Gamma, typename Y>
auto skew_gauge(const Eigen::ArrayBase<Mu>& mu, const Eigen::ArrayBase<Sigma>& sigma,
                const Eigen::ArrayBase<Gamma>& gamma, const Eigen::ArrayBase<Y>& y)
{
    using Scalar = typename Mu::Scalar;
    return ((mu - y).max(Scalar(0)) / (sigma * (-gamma).exp()))
        .max((y - mu).max(Scalar(0)) / (sigma * gamma.exp()));
}

template <typename Mu, typename Sigma, typename Y>
auto scaled_score(const Eigen::ArrayBase<Mu>& mu, const Eigen::ArrayBase<Sigma>& sigma,
                  const Eigen::ArrayBase<Y>& y)
{
    return (y - mu).abs() / sigma;
}

/// Left/right expansion coefficients (a, b) of the general family.
template <std::floating_point Scalar>
struct SideScales {
    Scalar a;
    Scalar b;
};

/// Scale and tilt coordinates (sigma, gamma).
template <std::floating_point Scalar>
struct ScaleTilt {
    Scalar sigma;
    Scalar gamma;
};

/// sigma = sqrt(ab), gamma = log(b/a) / 2.
template <std::floating_point Scalar>
ScaleTilt<Scalar> to_scale_tilt(Scalar a, Scalar b)
{
    if (!(a > 0) || !(b > 0)) {
        throw ConfigError("to_scale_tilt: a and b must be positive");
    }
    return {std::sqrt(a * b), Scalar(0.5) * std::log(b / a)};
}

/// a = sigma e^-gamma, b = sigma e^gamma.
template <std::floating_point Scalar>
SideScales<Scalar> to_side_scales(Scalar sigma, Scalar gamma)
{
    if (!(sigma > 0)) {
        throw ConfigError("to_side_scales: sigma must be positive");
    }
    return {sigma * std::exp(-gamma), sigma * std::exp(gamma)};
}

/// Training target for the tilt model: asinh(z / 2), the inverse of z = 2 sinh(t).
template <std::floating_point Scalar>
Scalar arcsinh_target(Scalar z) noexcept
{
    return std::asinh(z / Scalar(2));
}

// ---------------------------------------------------------------------------
// Conformalized quantile regression

/// max(q_lo - y, y - q_hi); negative when y is strictly inside the band.
template <std::floating_point Scalar>
Scalar cqr_score(Scalar q_lo, Scalar q_hi, Scalar y)
{
    if (q_lo > q_hi) {
        throw DataError("cqr_score: lower quantile exceeds upper quantile");
    }
    return std::max(q_lo - y, y - q_hi);
}

template <std::floating_point Scalar>
constexpr Interval<Scalar> cqr_interval(Scalar q_lo, Scalar q_hi, Scalar r) noexcept
{
    return {q_lo - r, q_hi + r};
}

} // namespace skewcp
