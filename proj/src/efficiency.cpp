#include "skewcp/efficiency.hpp"

#include "skewcp/errors.hpp"
#include "skewcp/parallel.hpp"
#include "skewcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace skewcp {

double estimate_phi(const SkewModel& skew, const ConformalThreshold& thr_skew, const ConformalThreshold& thr_scaled,
                    const FeatureMatrix& calib_features)
{
    if (thr_skew.alpha != thr_scaled.alpha || thr_skew.n_calib != thr_scaled.n_calib) {
        throw ConfigError("estimate_phi: thresholds come from different levels or calibration sets");
    }
    if (calib_features.rows() == 0) {
        throw DataError("estimate_phi: no calibration rows");
    }
    if (thr_scaled.r_hat == 0.0) {
        throw DataError("estimate_phi: scaled-score threshold is zero, the width ratio is undefined");
    }
    double sum = 0.0;
    for (Index i = 0; i < calib_features.rows(); ++i) {
        sum += cosh_tilt(skew.tilt(calib_features.row(i)));
    }
    const double mean_h = sum / static_cast<double>(calib_features.rows());
    return (thr_skew.r_hat / thr_scaled.r_hat) * mean_h;
}

double test_width_ratio(std::span<const PredictionInterval> skew, std::span<const PredictionInterval> scaled)
{
    if (skew.size() != scaled.size()) {
        throw DataError("test_width_ratio: interval lists differ in length");
    }
    if (skew.empty()) {
        throw DataError("test_width_ratio: no intervals");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < skew.size(); ++i) {
        const double w = scaled[i].width();
        if (!(w > 0.0)) {
            throw DataError("test_width_ratio: scaled-score interval of zero width at test row " + std::to_string(i));
        }
        sum += skew[i].width() / w;
    }
    return sum / static_cast<double>(skew.size());
}

EfficiencyReport efficiency_report(const SkewModel& skew, const ConformalThreshold& thr_skew,
                                   const ConformalThreshold& thr_scaled, const FeatureMatrix& calib_features,
                                   std::span<const PredictionInterval> test_skew,
                                   std::span<const PredictionInterval> test_scaled)
{
    EfficiencyReport report;
    report.alpha = thr_skew.alpha;
    report.phi_hat = estimate_phi(skew, thr_skew, thr_scaled, calib_features);
    report.test_avg_ratio = test_width_ratio(test_skew, test_scaled);
    report.abs_difference = std::abs(report.phi_hat - report.test_avg_ratio);
    report.r_hat_scaled = thr_scaled.r_hat;
    report.r_hat_skew = thr_skew.r_hat;
    report.n_calib = calib_features.rows();
    report.n_test = static_cast<Index>(test_skew.size());
    return report;
}

std::vector<ProbeRow> convergence_probe(const SynthSpec& generator, std::span<const Index> n_grid, int replications,
                                        const ProbeOptions& options)
{
    if (n_grid.empty() || replications < 1) {
        throw ConfigError("convergence_probe: need a nonempty grid and at least one replication");
    }
    if (!std::is_sorted(n_grid.begin(), n_grid.end()) || n_grid.front() < 1) {
        throw ConfigError("convergence_probe: calibration sizes must be positive and increasing");
    }
    for (Index n : n_grid) {
        ceil_index(n, options.alpha);
    }
    const Index pool_size = n_grid.back();
    const auto reps = static_cast<std::size_t>(replications);

    // discrepancy[r][g], phi[r][g]
    std::vector<std::vector<double>> discrepancy(reps, std::vector<double>(n_grid.size()));
    std::vector<std::vector<double>> phi(reps, std::vector<double>(n_grid.size()));

    parallel_for(reps, [&](std::size_t r) {
        const std::uint64_t rep_seed = derive_seed(generator.seed, r);
        auto draw = [&](Index n, std::uint64_t stream) {
            SynthSpec spec = generator;
            spec.n = n;
            spec.seed = derive_seed(rep_seed, stream);
            return generate(spec);
        };
        const Dataset train = draw(options.n_train, 0);
        const Dataset test = draw(options.n_test, 1);
        const Dataset pool = draw(pool_size, 2);

        ForestParams params = options.params;
        params.seed = derive_seed(rep_seed, 3);
        const SkewModel skew = fit_skew(train, params);
        const ScaledModel scaled = skew.scaled();

        // Test-row centers, scales and tilts do not depend on the threshold.
        const Index n_test = test.n_rows();
        Eigen::VectorXd center(n_test), scale(n_test), tilt(n_test);
        for (Index i = 0; i < n_test; ++i) {
            const auto x = test.features().row(i);
            center(i) = skew.center(x);
            scale(i) = skew.scale(x);
            tilt(i) = skew.tilt(x);
        }
        std::vector<PredictionInterval> test_skew(static_cast<std::size_t>(n_test));
        std::vector<PredictionInterval> test_scaled(static_cast<std::size_t>(n_test));

        for (std::size_t g = 0; g < n_grid.size(); ++g) {
            std::vector<Index> rows(static_cast<std::size_t>(n_grid[g]));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                rows[i] = static_cast<Index>(i);
            }
            const Dataset calib = pool.subset(rows);
            const auto thr_scaled = calibrate(scaled, calib, options.alpha);
            const auto thr_skew = calibrate(skew, calib, options.alpha);
            if (thr_scaled.r_hat == 0.0) {
                // Both gauges vanish exactly when y = mu(x), so both thresholds
                // are zero and both interval families collapse onto mu.
                phi[r][g] = 1.0;
                discrepancy[r][g] = 0.0;
                continue;
            }
            const double phi_hat = estimate_phi(skew, thr_skew, thr_scaled, calib.features());
            for (Index i = 0; i < n_test; ++i) {
                const auto a = skew_interval(center(i), scale(i), tilt(i), thr_skew.r_hat);
                const auto b = scaled_interval(center(i), scale(i), thr_scaled.r_hat);
                test_skew[static_cast<std::size_t>(i)] = {a.lo, a.hi, Method::skew, center(i)};
                test_scaled[static_cast<std::size_t>(i)] = {b.lo, b.hi, Method::scaled, center(i)};
            }
            const double test_ratio = test_width_ratio(test_skew, test_scaled);
            phi[r][g] = phi_hat;
            discrepancy[r][g] = std::abs(phi_hat - test_ratio);
        }
    });

    std::vector<ProbeRow> rows;
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        double sum = 0.0;
        double sum_sq = 0.0;
        double min_phi = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < reps; ++r) {
            sum += discrepancy[r][g];
            sum_sq += discrepancy[r][g] * discrepancy[r][g];
            min_phi = std::min(min_phi, phi[r][g]);
        }
        const double mean = sum / static_cast<double>(reps);
        const double var = reps > 1 ? std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(reps - 1)) : 0.0;
        rows.push_back({n_grid[g], mean, std::sqrt(var / static_cast<double>(reps)), min_phi, replications});
    }
    return rows;
}

bool non_increasing_within_noise(std::span<const ProbeRow> rows, double n_se)
{
    for (std::size_t g = 1; g < rows.size(); ++g) {
        const double se = std::hypot(rows[g - 1].std_error, rows[g].std_error);
        if (rows[g].mean_discrepancy > rows[g - 1].mean_discrepancy + n_se * se) {
            return false;
        }
    }
    return true;
}

} // namespace skewcp
