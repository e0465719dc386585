#include "skewcp/efficiency.hpp"
#include "skewcp/errors.hpp"
#include "skewcp/evaluation.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace skewcp;

namespace {

const double ln2 = std::numbers::ln2;

PredictionInterval width(double w)
{
    return {0.0, w, Method::scaled, std::nullopt};
}

/// Skew model whose tilt at x is x itself (a fully grown tree on x -> x).
SkewModel identity_tilt_model(const std::vector<double>& tilts)
{
    FeatureMatrix x(static_cast<Index>(tilts.size()), 1);
    Eigen::VectorXd g(static_cast<Index>(tilts.size()));
    for (std::size_t i = 0; i < tilts.size(); ++i) {
        x(static_cast<Index>(i), 0) = tilts[i];
        g(static_cast<Index>(i)) = tilts[i];
    }
    ForestParams p;
    p.n_trees = 1;
    p.bootstrap = false;
    p.min_leaf = 1;
    auto gamma = std::make_shared<const ForestModel>(fit_forest(x, g, p));
    return {fixtures::constant_forest(0.0), fixtures::constant_forest(1.0), gamma, 1e-8, default_gamma_clip, false};
}

} // namespace

TEST(CoshTilt, Values)
{
    EXPECT_EQ(cosh_tilt(0.0), 1.0);
    EXPECT_NEAR(cosh_tilt(ln2), 1.25, 1e-15);
    Xoshiro256 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double g = 4.0 * standard_normal(rng);
        EXPECT_EQ(cosh_tilt(-g), cosh_tilt(g));
        EXPECT_GE(cosh_tilt(g), 1.0);
    }
    EXPECT_NEAR(cosh_tilt(static_cast<float>(ln2)), 1.25f, 1e-6f);
}

TEST(EstimatePhi, HandExample)
{
    const SkewModel m = identity_tilt_model({0.0, ln2});
    FeatureMatrix calib(2, 1);
    calib << 0.0, ln2;
    const ConformalThreshold skew {0.8, 0.1, 2, 2};
    const ConformalThreshold scaled {1.0, 0.1, 2, 2};
    EXPECT_NEAR(estimate_phi(m, skew, scaled, calib), 0.9, 1e-12);
}

TEST(EstimatePhi, ZeroTiltIsOne)
{
    SkewModel m = identity_tilt_model({0.3, -0.2});
    m.zero_tilt = true;
    FeatureMatrix calib(2, 1);
    calib << 0.3, -0.2;
    const ConformalThreshold t {1.7, 0.1, 2, 2};
    EXPECT_EQ(estimate_phi(m, t, t, calib), 1.0);
}

TEST(EstimatePhi, AtLeastThresholdRatio)
{
    Xoshiro256 rng(3);
    std::vector<double> tilts(50);
    for (auto& t : tilts) {
        t = standard_normal(rng);
    }
    const SkewModel m = identity_tilt_model(tilts);
    FeatureMatrix calib(50, 1);
    for (Index i = 0; i < 50; ++i) {
        calib(i, 0) = tilts[static_cast<std::size_t>(i)];
    }
    const ConformalThreshold skew {0.7, 0.1, 50, 46};
    const ConformalThreshold scaled {1.1, 0.1, 50, 46};
    EXPECT_GT(estimate_phi(m, skew, scaled, calib), 0.7 / 1.1);
}

TEST(EstimatePhi, Errors)
{
    const SkewModel m = identity_tilt_model({0.0});
    FeatureMatrix calib = FeatureMatrix::Zero(1, 1);
    const ConformalThreshold ok {1.0, 0.1, 1, 1};
    EXPECT_THROW(estimate_phi(m, ok, {0.0, 0.1, 1, 1}, calib), DataError);
    EXPECT_THROW(estimate_phi(m, ok, {1.0, 0.2, 1, 1}, calib), ConfigError);
    EXPECT_THROW(estimate_phi(m, ok, {1.0, 0.1, 2, 2}, calib), ConfigError);
}

TEST(TestWidthRatio, Examples)
{
    const std::vector<PredictionInterval> a {width(1), width(3)};
    const std::vector<PredictionInterval> b {width(2), width(2)};
    EXPECT_EQ(test_width_ratio(a, b), 1.0);
    EXPECT_EQ(test_width_ratio(b, b), 1.0);
    const std::vector<PredictionInterval> c {width(1.8), width(4.5), width(0.9)};
    const std::vector<PredictionInterval> d {width(2), width(5), width(1)};
    EXPECT_NEAR(test_width_ratio(c, d), 0.9, 1e-12);
}

TEST(TestWidthRatio, Errors)
{
    const std::vector<PredictionInterval> one {width(1)};
    const std::vector<PredictionInterval> two {width(1), width(2)};
    const std::vector<PredictionInterval> zero {width(0)};
    EXPECT_THROW(test_width_ratio(one, two), DataError);
    EXPECT_THROW(test_width_ratio({}, {}), DataError);
    EXPECT_THROW(test_width_ratio(one, zero), DataError);
}

TEST(EfficiencyReport, FieldsConsistent)
{
    const SkewModel m = identity_tilt_model({0.0, ln2});
    FeatureMatrix calib(2, 1);
    calib << 0.0, ln2;
    const std::vector<PredictionInterval> a {width(1.0), width(2.0)};
    const std::vector<PredictionInterval> b {width(1.0), width(1.0)};
    const auto r = efficiency_report(m, {0.8, 0.1, 2, 2}, {1.0, 0.1, 2, 2}, calib, a, b);
    EXPECT_NEAR(r.phi_hat, 0.9, 1e-12);
    EXPECT_EQ(r.test_avg_ratio, 1.5);
    EXPECT_EQ(r.abs_difference, std::abs(r.phi_hat - r.test_avg_ratio));
    EXPECT_EQ(r.r_hat_skew, 0.8);
    EXPECT_EQ(r.r_hat_scaled, 1.0);
    EXPECT_EQ(r.n_calib, 2);
    EXPECT_EQ(r.n_test, 2);
}

TEST(ConvergenceProbe, ZeroNoiseHasNoDiscrepancy)
{
    // Trees represent the step mean exactly, so the calibration residuals
    // vanish and both thresholds are zero.
    SynthSpec gen;
    gen.mean_fn = MeanFn::step;
    gen.noise = Noise::none;
    gen.seed = 1;
    ProbeOptions opt;
    opt.n_train = 300;
    opt.n_test = 200;
    opt.params.n_trees = 5;
    const std::vector<Index> grid {50, 100};
    for (const auto& r : convergence_probe(gen, grid, 2, opt)) {
        EXPECT_EQ(r.mean_discrepancy, 0.0);
        EXPECT_GT(r.min_phi, 0.0);
    }
}

TEST(ConvergenceProbe, GaussianNoiseSmallDiscrepancy)
{
    // Both methods share mu and sigma and the fitted tilt stays near zero,
    // so the calibration estimate tracks the test average closely.
    SynthSpec gen;
    gen.noise = Noise::gaussian;
    gen.seed = 4;
    ProbeOptions opt;
    opt.n_train = 400;
    opt.n_test = 400;
    opt.params.n_trees = 10;
    const std::vector<Index> grid {100, 400};
    const auto rows = convergence_probe(gen, grid, 4, opt);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        EXPECT_GT(r.min_phi, 0.0);
        EXPECT_GE(r.mean_discrepancy, 0.0);
        EXPECT_LT(r.mean_discrepancy, 0.1);
        EXPECT_EQ(r.replications, 4);
    }
    EXPECT_EQ(rows[0].n_calib, 100);
    EXPECT_EQ(rows[1].n_calib, 400);
}

TEST(ConvergenceProbe, Deterministic)
{
    SynthSpec gen;
    gen.noise = Noise::exp_std;
    gen.seed = 8;
    ProbeOptions opt;
    opt.n_train = 300;
    opt.n_test = 300;
    opt.params.n_trees = 5;
    const std::vector<Index> grid {50, 200};
    const auto a = convergence_probe(gen, grid, 3, opt);
    const auto b = convergence_probe(gen, grid, 3, opt);
    for (std::size_t g = 0; g < a.size(); ++g) {
        EXPECT_EQ(a[g].mean_discrepancy, b[g].mean_discrepancy);
        EXPECT_EQ(a[g].min_phi, b[g].min_phi);
    }
}

TEST(ConvergenceProbe, Errors)
{
    SynthSpec gen;
    const std::vector<Index> decreasing {200, 100};
    const std::vector<Index> tiny {5};
    EXPECT_THROW(convergence_probe(gen, decreasing, 1), ConfigError);
    EXPECT_THROW(convergence_probe(gen, std::span<const Index>(), 1), ConfigError);
    EXPECT_THROW(convergence_probe(gen, tiny, 1), AdmissibilityError);
}

TEST(NonIncreasingWithinNoise, Rule)
{
    const std::vector<ProbeRow> down {{250, 0.02, 0.001, 0.9, 50}, {1000, 0.01, 0.001, 0.9, 50}};
    const std::vector<ProbeRow> flat_noisy {{250, 0.010, 0.002, 0.9, 50}, {1000, 0.012, 0.002, 0.9, 50}};
    const std::vector<ProbeRow> up {{250, 0.010, 0.001, 0.9, 50}, {1000, 0.02, 0.001, 0.9, 50}};
    EXPECT_TRUE(non_increasing_within_noise(down));
    EXPECT_TRUE(non_increasing_within_noise(flat_noisy));
    EXPECT_FALSE(non_increasing_within_noise(up));
}

TEST(EstimatePhi, BelowOneOnSkewedNoise)
{
    for (auto e : {Noise::lognormal_std, Noise::lognormal_std_mirror}) {
        SynthSpec gen;
        gen.mean_fn = MeanFn::sine;
        gen.scale_fn = ScaleFn::linear;
        gen.noise = e;
        gen.n = 8000;
        gen.seed = 12;
        BenchConfig cfg;
        cfg.alphas = {0.1};
        cfg.methods = {Method::skew, Method::scaled};
        cfg.params.n_trees = 50;
        cfg.params.seed = 13;
        const auto rep = run_benchmark(generate(gen), {0.75, 0.125, 0.125, 14}, cfg);
        EXPECT_LT(rep.efficiency.front().phi_hat, 1.0) << to_string(e);
    }
}
