#include "skewcp/conformal.hpp"
#include "skewcp/efficiency.hpp"
#include "skewcp/errors.hpp"
#include "skewcp/synthgen.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace skewcp;

namespace {

const double ln2 = std::numbers::ln2;

SkewModel constant_skew(double mu, double sigma, double gamma)
{
    return {fixtures::constant_forest(mu), fixtures::constant_forest(sigma), fixtures::constant_forest(gamma), 1e-8,
            default_gamma_clip, false};
}

ConformalThreshold threshold(double r)
{
    return {r, 0.1, 100, 91};
}

ForestParams small_params(std::uint64_t seed, int n_trees = 30)
{
    ForestParams p;
    p.n_trees = n_trees;
    p.seed = seed;
    return p;
}

Dataset synth(Noise noise, Index n, std::uint64_t seed, ScaleFn scale = ScaleFn::linear)
{
    SynthSpec s;
    s.noise = noise;
    s.scale_fn = scale;
    s.n = n;
    s.seed = seed;
    return generate(s);
}

double mean_tilt_on_grid(const SkewModel& m, int points = 1000)
{
    double sum = 0.0;
    for (int i = 0; i < points; ++i) {
        sum += m.tilt(fixtures::row({(i + 0.5) / points}));
    }
    return sum / points;
}

} // namespace

TEST(Method, ParseAndName)
{
    for (Method m : {Method::scaled, Method::skew, Method::cqr}) {
        EXPECT_EQ(parse_method(to_string(m)), m);
    }
    EXPECT_THROW(parse_method("jackknife"), ConfigError);
}

TEST(PredictInterval, SkewExamples)
{
    const auto sym = predict_interval(constant_skew(10, 2, 0), threshold(1.5), fixtures::row({0.0}));
    EXPECT_EQ(sym.lo, 7.0);
    EXPECT_EQ(sym.hi, 13.0);
    EXPECT_EQ(sym.method, Method::skew);
    EXPECT_EQ(sym.center, 10.0);

    const auto tilted = predict_interval(constant_skew(10, 2, ln2), threshold(1.0), fixtures::row({0.0}));
    EXPECT_NEAR(tilted.lo, 9.0, 1e-12);
    EXPECT_NEAR(tilted.hi, 14.0, 1e-12);
    EXPECT_NEAR(tilted.width(), 5.0, 1e-12);
}

TEST(PredictInterval, TiltIsClipped)
{
    const SkewModel m = constant_skew(0, 1, 40.0);
    EXPECT_EQ(m.tilt(fixtures::row({0.0})), default_gamma_clip);
    const auto iv = predict_interval(m, threshold(1.0), fixtures::row({0.0}));
    EXPECT_NEAR(iv.hi, std::exp(5.0), 1e-9);
    EXPECT_TRUE(std::isfinite(iv.lo));
}

TEST(PredictInterval, SigmaIsFloored)
{
    const ScaledModel m {fixtures::constant_forest(1.0), fixtures::constant_forest(0.0), 0.25};
    EXPECT_EQ(m.scale(fixtures::row({0.0})), 0.25);
    const auto iv = predict_interval(m, threshold(2.0), fixtures::row({0.0}));
    EXPECT_EQ(iv.lo, 0.5);
    EXPECT_EQ(iv.hi, 1.5);
}

TEST(PredictInterval, CqrNegativeThresholdShrinks)
{
    const Dataset band = fixtures::line_dataset({0.0, 1.0});
    ForestParams p;
    p.n_trees = 1;
    p.bootstrap = false;
    p.min_leaf = 2;
    const CqrModel m = CqrModel {std::make_shared<const ForestModel>(fit_forest(band, p, ForestMode::quantile))}
                           .at_alpha(0.1);
    const auto [lo, hi] = m.band(fixtures::row({0.0}));
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 1.0);
    const auto iv = predict_interval(m, threshold(-0.1), fixtures::row({0.0}));
    EXPECT_NEAR(iv.lo, 0.1, 1e-15);
    EXPECT_NEAR(iv.hi, 0.9, 1e-15);
    EXPECT_FALSE(iv.center.has_value());

    const auto crossed = predict_interval(m, threshold(-0.7), fixtures::row({0.0}));
    EXPECT_EQ(crossed.lo, 0.5);
    EXPECT_EQ(crossed.hi, 0.5);
}

TEST(PredictInterval, DimensionMismatch)
{
    EXPECT_THROW(predict_interval(constant_skew(0, 1, 0), threshold(1.0), fixtures::row({0.0, 1.0})), DataError);
}

TEST(FitScaled, ConstantResponse)
{
    const Dataset d = fixtures::line_dataset(std::vector<double>(40, 2.5));
    const ScaledModel m = fit_scaled(d, small_params(1, 10));
    EXPECT_GT(m.sigma_floor, 0.0);
    for (double x : {0.0, 13.0, 39.0}) {
        EXPECT_EQ(m.center(fixtures::row({x})), 2.5);
        EXPECT_EQ(m.scale(fixtures::row({x})), m.sigma_floor);
    }
    // Perfect model: every score is zero, so the threshold is zero.
    EXPECT_EQ(calibrate(m, d, 0.1).r_hat, 0.0);
}

TEST(FitScaled, SigmaFloorScalesWithResponseSd)
{
    const Dataset d = fixtures::line_dataset({0.0, 2.0, 4.0, 6.0});
    const ScaledModel m = fit_scaled(d, small_params(1, 5));
    const double sd = std::sqrt((9.0 + 1.0 + 1.0 + 9.0) / 3.0);
    EXPECT_NEAR(m.sigma_floor, sigma_floor_factor * sd, 1e-20);
}

TEST(FitScaled, HeteroskedasticScaleIncreases)
{
    // y = sin(x) + (1 + x) * eps on x in [0, 2].
    Xoshiro256 rng(90);
    const Index n = 3000;
    FeatureMatrix x(n, 1);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = 2.0 * uniform01(rng);
        y(i) = std::sin(x(i, 0)) + (1.0 + x(i, 0)) * standard_normal(rng);
    }
    const ScaledModel m = fit_scaled(Dataset(x, y), small_params(4));
    double low = 0.0, high = 0.0;
    for (int i = 0; i < 100; ++i) {
        low += m.scale(fixtures::row({0.5 * (i + 0.5) / 100.0}));
        high += m.scale(fixtures::row({1.5 + 0.5 * (i + 0.5) / 100.0}));
    }
    EXPECT_LT(low, high);
}

TEST(FitScaled, Deterministic)
{
    const Dataset d = synth(Noise::gaussian, 500, 3);
    const ScaledModel a = fit_scaled(d, small_params(9, 10));
    const ScaledModel b = fit_scaled(d, small_params(9, 10));
    EXPECT_EQ(a.mu->to_json(), b.mu->to_json());
    EXPECT_EQ(a.sigma->to_json(), b.sigma->to_json());
    EXPECT_EQ(a.sigma_floor, b.sigma_floor);
}

TEST(FitSkew, SharesScaledFitsAndUsesIndependentStreams)
{
    const Dataset d = synth(Noise::gaussian, 400, 5);
    const ForestParams p = small_params(11, 10);
    const ScaledModel s = fit_scaled(d, p);
    const SkewModel k = fit_skew(d, p);
    EXPECT_EQ(s.mu->to_json(), k.mu->to_json());
    EXPECT_EQ(s.sigma->to_json(), k.sigma->to_json());
    EXPECT_NE(k.mu->tree_seeds(), k.sigma->tree_seeds());
    EXPECT_NE(k.mu->tree_seeds(), k.gamma->tree_seeds());
    EXPECT_NE(k.sigma->tree_seeds(), k.gamma->tree_seeds());
}

TEST(FitSkew, ZeroNoiseGivesZeroTilt)
{
    // The step mean takes two values, so every leaf is pure and the fit
    // interpolates exactly.
    SynthSpec s;
    s.mean_fn = MeanFn::step;
    s.noise = Noise::none;
    s.n = 300;
    s.seed = 1;
    const Dataset d = generate(s);
    ForestParams p;
    p.n_trees = 3;
    p.bootstrap = false;
    p.min_leaf = 1;
    const SkewModel m = fit_skew(d, p);
    for (Index i = 0; i < d.n_rows(); ++i) {
        EXPECT_EQ(m.scale(d.features().row(i)), m.sigma_floor);
        EXPECT_EQ(m.tilt(d.features().row(i)), 0.0);
    }
}

TEST(FitSkew, SymmetricNoiseTiltNearZero)
{
    const SkewModel m = fit_skew(synth(Noise::gaussian, 5000, 21), small_params(2, 50));
    EXPECT_NEAR(mean_tilt_on_grid(m), 0.0, 0.05);
}

TEST(FitSkew, SkewedNoiseTiltFollowsPopulationTarget)
{
    // Population value of the tilt target for the standardized lognormal
    // with an exact scale: E[asinh(E / (2 E|E|))]. The asinh transform
    // compresses the long right tail more than the dense left side, so the
    // target mean is negative.
    const double mean_abs = oracle::lognormal_expectation(lognormal_log_scale, [](double e) { return std::abs(e); });
    const double target = oracle::lognormal_expectation(
        lognormal_log_scale, [&](double e) { return std::asinh(e / (2.0 * mean_abs)); });
    ASSERT_LT(target, -0.02);

    const SkewModel right = fit_skew(synth(Noise::lognormal_std, 5000, 8), small_params(3, 50));
    const double g_right = mean_tilt_on_grid(right);
    EXPECT_NEAR(g_right, target, 0.03);

    const SkewModel left = fit_skew(synth(Noise::lognormal_std_mirror, 5000, 8), small_params(3, 50));
    const double g_left = mean_tilt_on_grid(left);
    EXPECT_NEAR(g_left, -target, 0.03);
    EXPECT_LT(g_right, 0.0);
    EXPECT_GT(g_left, 0.0);
}

TEST(FitCqr, UniformNoiseBandWidth)
{
    // y = 2x + U(-1, 1): the 0.1 and 0.9 quantiles are 1.6 apart.
    Xoshiro256 rng(13);
    const Index n = 5000;
    FeatureMatrix x(n, 1);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = uniform01(rng);
        y(i) = 2.0 * x(i, 0) + (2.0 * uniform01(rng) - 1.0);
    }
    const CqrModel m = fit_cqr(Dataset(x, y), small_params(6, 50), 0.2);
    EXPECT_EQ(m.lo_level, 0.1);
    EXPECT_EQ(m.hi_level, 0.9);
    double width = 0.0;
    for (int i = 0; i < 500; ++i) {
        const auto [lo, hi] = m.band(fixtures::row({(i + 0.5) / 500.0}));
        EXPECT_LE(lo, hi);
        width += hi - lo;
    }
    EXPECT_NEAR(width / 500.0, 1.6, 0.3);
}

TEST(FitCqr, DeterministicAndLevelChecked)
{
    const Dataset d = synth(Noise::gaussian, 300, 4);
    const CqrModel a = fit_cqr(d, small_params(5, 10), 0.1);
    const CqrModel b = fit_cqr(d, small_params(5, 10), 0.1);
    EXPECT_EQ(a.qforest->to_json(), b.qforest->to_json());
    EXPECT_THROW(calibrate(a, d, 0.2), ConfigError);
    EXPECT_NO_THROW(calibrate(a.at_alpha(0.2), d, 0.2));
    EXPECT_THROW(a.at_alpha(1.5), ConfigError);
}

TEST(Calibrate, AdmissibilityCheckedFirst)
{
    const Dataset d = synth(Noise::gaussian, 200, 4);
    const ScaledModel m = fit_scaled(d, small_params(1, 5));
    const std::vector<Index> nine {0, 1, 2, 3, 4, 5, 6, 7, 8};
    EXPECT_THROW(calibrate(m, d.subset(nine), 0.05), AdmissibilityError);
}

TEST(Calibrate, RampScores)
{
    // Scaled model with mu = 0 and sigma = 1: the scores are |y|.
    const ScaledModel m {fixtures::constant_forest(0.0), fixtures::constant_forest(1.0), 1e-8};
    std::vector<double> y;
    for (int i = 1; i <= 999; ++i) {
        y.push_back(i % 2 ? i : -i);
    }
    const auto thr = calibrate(m, fixtures::line_dataset(y), 0.10);
    EXPECT_EQ(thr.k_index, 900);
    EXPECT_EQ(thr.r_hat, 900.0);
}

TEST(Calibrate, ZeroTiltReducesToScaled)
{
    const Dataset train = synth(Noise::lognormal_std, 1500, 1);
    const Dataset calib = synth(Noise::lognormal_std, 500, 2);
    const Dataset test = synth(Noise::lognormal_std, 300, 3);
    const ForestParams p = small_params(8, 20);
    const ScaledModel scaled = fit_scaled(train, p);
    SkewModel skew = fit_skew(train, p, scaled);
    skew.zero_tilt = true;
    for (double alpha : {0.1, 0.15, 0.2}) {
        const auto t1 = calibrate(scaled, calib, alpha);
        const auto t2 = calibrate(skew, calib, alpha);
        EXPECT_EQ(t1.r_hat, t2.r_hat);
        const auto a = predict_intervals(scaled, t1, test.features());
        const auto b = predict_intervals(skew, t2, test.features());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].lo, b[i].lo);
            EXPECT_EQ(a[i].hi, b[i].hi);
        }
    }
    EXPECT_TRUE(conformity_scores(scaled, calib) == conformity_scores(skew, calib));
}

TEST(Calibrate, WidthIdentityPerRow)
{
    const Dataset train = synth(Noise::exp_std, 1500, 4);
    const Dataset calib = synth(Noise::exp_std, 500, 5);
    const Dataset test = synth(Noise::exp_std, 300, 6);
    const SkewModel skew = fit_skew(train, small_params(3, 20));
    const ScaledModel scaled = skew.scaled();
    const auto ts = calibrate(skew, calib, 0.1);
    const auto tc = calibrate(scaled, calib, 0.1);
    const auto a = predict_intervals(skew, ts, test.features());
    const auto b = predict_intervals(scaled, tc, test.features());
    for (Index i = 0; i < test.n_rows(); ++i) {
        const double expected = ts.r_hat / tc.r_hat * std::cosh(skew.tilt(test.features().row(i)));
        const auto k = static_cast<std::size_t>(i);
        EXPECT_NEAR(a[k].width() / b[k].width(), expected, 1e-9);
        EXPECT_LE(a[k].lo, *a[k].center);
        EXPECT_LE(*a[k].center, a[k].hi);
        EXPECT_LE(b[k].lo, *b[k].center);
        EXPECT_LE(*b[k].center, b[k].hi);
    }
}

TEST(Calibrate, ShiftInvariance)
{
    // Dyadic responses and a power-of-two shift keep every sum exact, so the
    // same seeds give the same splits and every endpoint moves by c.
    Xoshiro256 rng(5);
    const Index n = 600;
    FeatureMatrix x(n, 2);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = uniform01(rng);
        x(i, 1) = uniform01(rng);
        y(i) = std::round(8.0 * (3.0 * x(i, 0) + standard_normal(rng))) / 8.0;
    }
    const double c = 16.0;
    const Eigen::VectorXd y_shift = y.array() + c;
    const std::vector<Index> train_rows = [] {
        std::vector<Index> r(400);
        std::iota(r.begin(), r.end(), Index {0});
        return r;
    }();
    std::vector<Index> calib_rows(200);
    std::iota(calib_rows.begin(), calib_rows.end(), Index {400});

    const Dataset base(x, y), shifted(x, y_shift);
    ForestParams p = small_params(7, 10);
    p.min_leaf = 3;
    const SkewModel a = fit_skew(base.subset(train_rows), p);
    const SkewModel b = fit_skew(shifted.subset(train_rows), p);
    const auto ta = calibrate(a, base.subset(calib_rows), 0.1);
    const auto tb = calibrate(b, shifted.subset(calib_rows), 0.1);
    EXPECT_NEAR(ta.r_hat, tb.r_hat, 1e-9);
    for (Index i = 0; i < 50; ++i) {
        const auto probe = fixtures::row({uniform01(rng), uniform01(rng)});
        EXPECT_NEAR(b.center(probe), a.center(probe) + c, 1e-9);
        const auto ia = predict_interval(a, ta, probe);
        const auto ib = predict_interval(b, tb, probe);
        EXPECT_NEAR(ib.lo, ia.lo + c, 1e-9);
        EXPECT_NEAR(ib.hi, ia.hi + c, 1e-9);
    }
    ASSERT_EQ(a.mu->trees().size(), b.mu->trees().size());
    for (std::size_t t = 0; t < a.mu->trees().size(); ++t) {
        const auto& na = a.mu->trees()[t].nodes();
        const auto& nb = b.mu->trees()[t].nodes();
        ASSERT_EQ(na.size(), nb.size());
        for (std::size_t k = 0; k < na.size(); ++k) {
            EXPECT_EQ(na[k].feature, nb[k].feature);
            EXPECT_EQ(na[k].threshold, nb[k].threshold);
        }
    }
}
