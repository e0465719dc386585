#pragma once

// Relative efficiency of skew-adaptive versus scaled-score intervals.
//
// When both methods share mu and sigma, the width ratio at x is
// (r_skew / r_scaled) * cosh(gamma(x)). Averaging cosh(gamma) over the
// calibration rows gives the estimator phi_hat of the expected ratio on
// future points. Its consistency assumes the threshold ratio is uniformly
// integrable; that cannot be checked from data, so only the empirical
// convergence trend is validated here (convergence_probe).

#include "skewcp/conformal.hpp"
#include "skewcp/synthgen.hpp"

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

namespace skewcp {

template <std::floating_point Scalar>
Scalar cosh_tilt(Scalar gamma) noexcept
{
    return std::cosh(gamma);
}

/// (r_skew / r_scaled) * mean over calibration rows of cosh(gamma(x)).
/// Throws DataError when r_scaled == 0 and ConfigError when the thresholds
/// were not calibrated at the same level on the same number of rows.
double estimate_phi(const SkewModel& skew, const ConformalThreshold& thr_skew, const ConformalThreshold& thr_scaled,
                    const FeatureMatrix& calib_features);

/// Mean over test rows of width_skew / width_scaled.
double test_width_ratio(std::span<const PredictionInterval> skew, std::span<const PredictionInterval> scaled);

struct EfficiencyReport {
    std::string dataset_id;
    double alpha = 0.0;
    double phi_hat = 0.0;
    double test_avg_ratio = 0.0;
    double abs_difference = 0.0;
    double r_hat_scaled = 0.0;
    double r_hat_skew = 0.0;
    Index n_calib = 0;
    Index n_test = 0;
};

EfficiencyReport efficiency_report(const SkewModel& skew, const ConformalThreshold& thr_skew,
                                   const ConformalThreshold& thr_scaled, const FeatureMatrix& calib_features,
                                   std::span<const PredictionInterval> test_skew,
                                   std::span<const PredictionInterval> test_scaled);

struct ProbeOptions {
    ForestParams params {.n_trees = 50, .mtry = std::nullopt, .min_leaf = 5, .max_depth = std::nullopt};
    Index n_train = 1000;
    Index n_test = 5000;
    double alpha = 0.1;
};

struct ProbeRow {
    Index n_calib = 0;
    double mean_discrepancy = 0.0;
    /// Monte-Carlo standard error of mean_discrepancy.
    double std_error = 0.0;
    double min_phi = 0.0;
    int replications = 0;
};

/// For each calibration size in `n_grid`, the mean over replications of
/// |phi_hat - test average width ratio|. Each replication draws its own
/// training, test and calibration data from `generator` (the calibration sets
/// of one replication are nested prefixes of a single pool) and refits.
std::vector<ProbeRow> convergence_probe(const SynthSpec& generator, std::span<const Index> n_grid, int replications,
                                        const ProbeOptions& options = {});

/// True when each mean discrepancy exceeds its predecessor by at most
/// `n_se` combined standard errors.
bool non_increasing_within_noise(std::span<const ProbeRow> rows, double n_se = 2.0);

} // namespace skewcp
