#include "skewcp/evaluation.hpp"

#include "skewcp/errors.hpp"
#include "skewcp/parallel.hpp"
#include "skewcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace skewcp {

double empirical_coverage(std::span<const PredictionInterval> intervals, const Eigen::VectorXd& y)
{
    if (static_cast<Index>(intervals.size()) != y.size()) {
        throw DataError("empirical_coverage: " + std::to_string(intervals.size()) + " intervals for "
                        + std::to_string(y.size()) + " responses");
    }
    if (intervals.empty()) {
        throw DataError("empirical_coverage: no intervals");
    }
    Index covered = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        covered += intervals[i].contains(y(static_cast<Index>(i))) ? 1 : 0;
    }
    return static_cast<double>(covered) / static_cast<double>(intervals.size());
}

double average_length(std::span<const PredictionInterval> intervals)
{
    if (intervals.empty()) {
        throw DataError("average_length: no intervals");
    }
    double sum = 0.0;
    for (const auto& iv : intervals) {
        sum += iv.width();
    }
    return sum / static_cast<double>(intervals.size());
}

void validate_bench_config(const BenchConfig& config, Index n_calib, Index n_features)
{
    if (config.alphas.empty()) {
        throw ConfigError("bench: no alpha levels");
    }
    if (config.methods.empty()) {
        throw ConfigError("bench: no methods");
    }
    for (std::size_t i = 0; i < config.methods.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (config.methods[i] == config.methods[j]) {
                throw ConfigError("bench: duplicate method '" + std::string(to_string(config.methods[i])) + "'");
            }
        }
    }
    config.params.validate(n_features);
    for (double alpha : config.alphas) {
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw ConfigError("bench: alpha must lie in (0, 1)");
        }
        ceil_index(n_calib, alpha);
    }
}

namespace {

bool has(const std::vector<Method>& methods, Method m)
{
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

} // namespace

BenchReport run_benchmark(const ThreeWaySplit& split, const BenchConfig& config)
{
    validate_bench_config(config, split.calibration.n_rows(), split.train.n_cols());

    const bool want_skew = has(config.methods, Method::skew);
    const bool want_scaled = has(config.methods, Method::scaled);
    const bool want_cqr = has(config.methods, Method::cqr);

    std::optional<ScaledModel> scaled;
    std::optional<SkewModel> skew;
    std::optional<CqrModel> cqr;
    if (want_skew || want_scaled) {
        scaled = fit_scaled(split.train, config.params);
    }
    if (want_skew) {
        skew = fit_skew(split.train, config.params, *scaled);
        skew->zero_tilt = config.zero_tilt;
    }
    if (want_cqr) {
        cqr = fit_cqr(split.train, config.params, config.alphas.front());
    }

    BenchReport report;
    report.split = split.provenance;
    report.n_train = split.train.n_rows();
    report.n_calib = split.calibration.n_rows();
    report.n_test = split.test.n_rows();

    const auto& x_test = split.test.features();
    const auto& y_test = split.test.response();

    struct Run {
        ConformalThreshold thr;
        std::vector<PredictionInterval> intervals;
    };
    auto run_alpha = [&](Method m, double alpha) -> Run {
        switch (m) {
        case Method::scaled: {
            const auto thr = calibrate(*scaled, split.calibration, alpha);
            return {thr, predict_intervals(*scaled, thr, x_test)};
        }
        case Method::skew: {
            const auto thr = calibrate(*skew, split.calibration, alpha);
            return {thr, predict_intervals(*skew, thr, x_test)};
        }
        case Method::cqr: {
            const CqrModel model = cqr->at_alpha(alpha);
            const auto thr = calibrate(model, split.calibration, alpha);
            return {thr, predict_intervals(model, thr, x_test)};
        }
        }
        throw ConfigError("bench: bad method");
    };

    // Skew and scaled runs per alpha, kept for the efficiency report.
    std::vector<std::optional<Run>> skew_runs(config.alphas.size());
    std::vector<std::optional<Run>> scaled_runs(config.alphas.size());

    for (Method m : config.methods) {
        for (std::size_t a = 0; a < config.alphas.size(); ++a) {
            const double alpha = config.alphas[a];
            Run run = run_alpha(m, alpha);

            BenchResult result;
            result.dataset_id = config.dataset_id;
            result.method = m;
            result.alpha = alpha;
            result.n_test = split.test.n_rows();
            result.seed = config.params.seed;
            for (std::size_t i = 0; i < run.intervals.size(); ++i) {
                result.covered += run.intervals[i].contains(y_test(static_cast<Index>(i))) ? 1 : 0;
            }
            result.empirical_coverage = empirical_coverage(run.intervals, y_test);
            result.avg_length = average_length(run.intervals);
            report.results.push_back(result);
            report.thresholds.push_back(run.thr);

            if (config.keep_plot_records) {
                for (std::size_t i = 0; i < run.intervals.size(); ++i) {
                    const auto& iv = run.intervals[i];
                    report.plot.push_back(
                        {static_cast<Index>(i), m, alpha, iv.center, iv.lo, iv.hi, y_test(static_cast<Index>(i))});
                }
            }
            if (m == Method::skew) {
                skew_runs[a] = std::move(run);
            } else if (m == Method::scaled) {
                scaled_runs[a] = std::move(run);
            }
        }
    }

    if (want_skew && want_scaled) {
        for (std::size_t a = 0; a < config.alphas.size(); ++a) {
            EfficiencyReport eff = efficiency_report(*skew, skew_runs[a]->thr, scaled_runs[a]->thr,
                                                     split.calibration.features(), skew_runs[a]->intervals,
                                                     scaled_runs[a]->intervals);
            eff.dataset_id = config.dataset_id;
            report.efficiency.push_back(eff);
        }
    }
    return report;
}

BenchReport run_benchmark(const Dataset& data, const SplitSpec& split, const BenchConfig& config)
{
    split.validate();
    const auto sizes = split.sizes(data.n_rows());
    if (sizes.calibration > 0) {
        validate_bench_config(config, sizes.calibration, data.n_cols());
    }
    return run_benchmark(split_three_way(data, split), config);
}

std::vector<CoverageSummary> run_coverage_study(const CoverageStudyConfig& config)
{
    if (config.replications < 2) {
        throw ConfigError("coverage study: need at least two replications");
    }
    const auto reps = static_cast<std::size_t>(config.replications);
    const std::size_t n_methods = config.methods.size();

    BenchConfig bench;
    bench.dataset_id = "synthetic";
    bench.alphas = {config.alpha};
    bench.methods = config.methods;
    bench.params = config.params;
    validate_bench_config(bench, config.n_calib, config.generator.d);

    // coverage[r][m], length[r][m]
    std::vector<std::vector<double>> coverage(reps, std::vector<double>(n_methods));
    std::vector<std::vector<double>> length(reps, std::vector<double>(n_methods));

    parallel_for(reps, [&](std::size_t r) {
        const std::uint64_t rep_seed = derive_seed(config.generator.seed, r);
        SynthSpec spec = config.generator;
        spec.n = config.n_train + config.n_calib + config.n_test;
        spec.seed = derive_seed(rep_seed, 0);
        const Dataset data = generate(spec);

        // IID rows, so consecutive blocks form a valid random split.
        auto block = [&](Index from, Index count) {
            std::vector<Index> rows(static_cast<std::size_t>(count));
            for (Index i = 0; i < count; ++i) {
                rows[static_cast<std::size_t>(i)] = from + i;
            }
            return rows;
        };
        ThreeWaySplit split;
        split.train_rows = block(0, config.n_train);
        split.calibration_rows = block(config.n_train, config.n_calib);
        split.test_rows = block(config.n_train + config.n_calib, config.n_test);
        split.train = data.subset(split.train_rows);
        split.calibration = data.subset(split.calibration_rows);
        split.test = data.subset(split.test_rows);

        BenchConfig rep_bench = bench;
        rep_bench.params.seed = derive_seed(rep_seed, 1);
        const BenchReport out = run_benchmark(split, rep_bench);
        for (std::size_t m = 0; m < n_methods; ++m) {
            coverage[r][m] = out.results[m].empirical_coverage;
            length[r][m] = out.results[m].avg_length;
        }
    });

    std::vector<CoverageSummary> summaries;
    const double nominal = 1.0 - config.alpha;
    for (std::size_t m = 0; m < n_methods; ++m) {
        double sum = 0.0;
        double sum_len = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            sum += coverage[r][m];
            sum_len += length[r][m];
        }
        const double mean = sum / static_cast<double>(reps);
        double ss = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            ss += (coverage[r][m] - mean) * (coverage[r][m] - mean);
        }
        CoverageSummary s;
        s.method = config.methods[m];
        s.mean_coverage = mean;
        s.std_error = std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps));
        s.mean_length = sum_len / static_cast<double>(reps);
        s.band_lo = nominal;
        s.band_hi = nominal + 1.0 / static_cast<double>(config.n_calib + 1);
        s.replications = config.replications;
        summaries.push_back(s);
    }
    return summaries;
}

} // namespace skewcp
