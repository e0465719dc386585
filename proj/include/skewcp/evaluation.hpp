#pragma once

#include "skewcp/conformal.hpp"
#include "skewcp/efficiency.hpp"
#include "skewcp/synthgen.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace skewcp {

/// Fraction of rows with lo <= y <= hi (closed intervals).
double empirical_coverage(std::span<const PredictionInterval> intervals, const Eigen::VectorXd& y);

/// Mean of hi - lo.
double average_length(std::span<const PredictionInterval> intervals);

struct BenchResult {
    std::string dataset_id;
    Method method = Method::scaled;
    double alpha = 0.0;
    double empirical_coverage = 0.0;
    double avg_length = 0.0;
    Index covered = 0;
    Index n_test = 0;
    std::uint64_t seed = 0;
};

struct BenchConfig {
    std::string dataset_id = "dataset";
    std::vector<double> alphas {0.10, 0.15, 0.20};
    std::vector<Method> methods {Method::skew, Method::scaled, Method::cqr};
    ForestParams params;
    /// Debug: force the skew model's tilt to zero.
    bool zero_tilt = false;
    /// Keep per-test-point records for interval-strip plots.
    bool keep_plot_records = false;
};

struct PlotRecord {
    Index test_row = 0;
    Method method = Method::scaled;
    double alpha = 0.0;
    std::optional<double> center;
    double lo = 0.0;
    double hi = 0.0;
    double y = 0.0;
};

struct BenchReport {
    /// Ordered by method (config order), then alpha (config order).
    std::vector<BenchResult> results;
    /// One per alpha when both skew and scaled were run.
    std::vector<EfficiencyReport> efficiency;
    std::vector<PlotRecord> plot;
    std::vector<ConformalThreshold> thresholds; // parallel to results
    SplitSpec split;
    Index n_train = 0;
    Index n_calib = 0;
    Index n_test = 0;
};

/// Throws before fitting anything if some alpha is inadmissible for the
/// calibration size, or the config is otherwise invalid.
void validate_bench_config(const BenchConfig& config, Index n_calib, Index n_features);

/// Split once, fit every requested method on the training part (skew and
/// scaled share one mu/sigma fit), calibrate per alpha and score the test part.
BenchReport run_benchmark(const Dataset& data, const SplitSpec& split, const BenchConfig& config);
BenchReport run_benchmark(const ThreeWaySplit& split, const BenchConfig& config);

// ---------------------------------------------------------------------------
// Replicated coverage study on synthetic data

struct CoverageStudyConfig {
    SynthSpec generator;
    Index n_train = 1000;
    Index n_calib = 1000;
    Index n_test = 1000;
    double alpha = 0.10;
    int replications = 500;
    ForestParams params {.n_trees = 50, .mtry = std::nullopt, .min_leaf = 5, .max_depth = std::nullopt};
    std::vector<Method> methods {Method::skew, Method::scaled, Method::cqr};
};

struct CoverageSummary {
    Method method = Method::scaled;
    double mean_coverage = 0.0;
    /// Monte-Carlo standard error of mean_coverage.
    double std_error = 0.0;
    double mean_length = 0.0;
    /// [1 - alpha, 1 - alpha + 1/(n_calib + 1)]
    double band_lo = 0.0;
    double band_hi = 0.0;
    int replications = 0;

    /// Whether the mean lies in the band widened by `n_se` standard errors.
    bool within_band(double n_se = 3.0) const noexcept
    {
        return mean_coverage >= band_lo - n_se * std_error && mean_coverage <= band_hi + n_se * std_error;
    }
};

/// Each replication draws fresh train/calibration/test sets and refits.
std::vector<CoverageSummary> run_coverage_study(const CoverageStudyConfig& config);

} // namespace skewcp
