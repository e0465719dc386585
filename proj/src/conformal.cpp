#include "skewcp/conformal.hpp"

#include "skewcp/errors.hpp"
#include "skewcp/rng.hpp"

#include <algorithm>
#include <cmath>

namespace skewcp {

std::string_view to_string(Method m) noexcept
{
    switch (m) {
    case Method::scaled:
        return "scaled";
    case Method::skew:
        return "skew";
    case Method::cqr:
        return "cqr";
    }
    return "unknown";
}

Method parse_method(std::string_view name)
{
    if (name == "scaled") {
        return Method::scaled;
    }
    if (name == "skew") {
        return Method::skew;
    }
    if (name == "cqr") {
        return Method::cqr;
    }
    throw ConfigError("unknown method '" + std::string(name) + "' (expected scaled, skew or cqr)");
}

double ScaledModel::scale(const FeatureRow& x) const
{
    return std::max(sigma->predict_mean(x), sigma_floor);
}

double SkewModel::scale(const FeatureRow& x) const
{
    return std::max(sigma->predict_mean(x), sigma_floor);
}

double SkewModel::tilt(const FeatureRow& x) const
{
    if (zero_tilt) {
        return 0.0;
    }
    return std::clamp(gamma->predict_mean(x), -gamma_clip, gamma_clip);
}

std::pair<double, double> CqrModel::band(const FeatureRow& x) const
{
    const double levels[] = {lo_level, hi_level};
    const auto q = qforest->predict_quantiles(x, levels);
    return {q[0], q[1]};
}

CqrModel CqrModel::at_alpha(double alpha) const
{
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("cqr: alpha must lie in (0, 1)");
    }
    return {qforest, alpha / 2.0, 1.0 - alpha / 2.0};
}

namespace {

ForestParams stream_params(const ForestParams& params, ModelStream stream)
{
    ForestParams p = params;
    p.seed = derive_seed(params.seed, static_cast<std::uint64_t>(stream));
    return p;
}

double response_sd(const Eigen::VectorXd& y)
{
    if (y.size() < 2) {
        return 0.0;
    }
    const double mean = y.mean();
    return std::sqrt((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1));
}

void check_nonempty(const Dataset& data, const char* what)
{
    if (data.n_rows() == 0) {
        throw DataError(std::string(what) + ": empty dataset");
    }
}

void check_same_width(const ForestModel& model, const Dataset& data)
{
    if (model.n_features() != data.n_cols()) {
        throw DataError("dataset has " + std::to_string(data.n_cols()) + " features, model expects "
                        + std::to_string(model.n_features()));
    }
}

} // namespace

ScaledModel fit_scaled(const Dataset& train, const ForestParams& params)
{
    check_nonempty(train, "fit_scaled");
    const auto& x = train.features();
    const auto& y = train.response();

    auto mu = std::make_shared<const ForestModel>(fit_forest(x, y, stream_params(params, ModelStream::center)));
    const Eigen::VectorXd abs_residual = (y - mu->predict_means(x)).cwiseAbs();
    auto sigma = std::make_shared<const ForestModel>(
        fit_forest(x, abs_residual, stream_params(params, ModelStream::scale)));

    const double sd = response_sd(y);
    const double floor = sigma_floor_factor * (sd > 0.0 ? sd : 1.0);
    return {std::move(mu), std::move(sigma), floor};
}

SkewModel fit_skew(const Dataset& train, const ForestParams& params, const ScaledModel& base)
{
    check_nonempty(train, "fit_skew");
    const auto& x = train.features();
    const auto& y = train.response();

    const Eigen::ArrayXd center = base.mu->predict_means(x).array();
    const Eigen::ArrayXd scale = base.sigma->predict_means(x).array().max(base.sigma_floor);
    const Eigen::ArrayXd z = (y.array() - center) / scale;
    const Eigen::VectorXd target = z.unaryExpr([](double v) { return arcsinh_target(v); }).matrix();

    auto gamma = std::make_shared<const ForestModel>(fit_forest(x, target, stream_params(params, ModelStream::tilt)));
    return {base.mu, base.sigma, std::move(gamma), base.sigma_floor, default_gamma_clip, false};
}

SkewModel fit_skew(const Dataset& train, const ForestParams& params)
{
    return fit_skew(train, params, fit_scaled(train, params));
}

CqrModel fit_cqr(const Dataset& train, const ForestParams& params, double alpha)
{
    check_nonempty(train, "fit_cqr");
    auto forest = std::make_shared<const ForestModel>(
        fit_forest(train.features(), train.response(), stream_params(params, ModelStream::quantile),
                   ForestMode::quantile));
    return CqrModel {std::move(forest)}.at_alpha(alpha);
}

Eigen::VectorXd conformity_scores(const ScaledModel& model, const Dataset& data)
{
    check_same_width(*model.mu, data);
    const Eigen::ArrayXd center = model.mu->predict_means(data.features()).array();
    const Eigen::ArrayXd scale = model.sigma->predict_means(data.features()).array().max(model.sigma_floor);
    return scaled_score(center, scale, data.response().array()).matrix();
}

Eigen::VectorXd conformity_scores(const SkewModel& model, const Dataset& data)
{
    check_same_width(*model.mu, data);
    const auto& x = data.features();
    const Eigen::ArrayXd center = model.mu->predict_means(x).array();
    const Eigen::ArrayXd scale = model.sigma->predict_means(x).array().max(model.sigma_floor);
    Eigen::ArrayXd tilt(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        tilt(i) = model.tilt(x.row(i));
    }
    return skew_gauge(center, scale, tilt, data.response().array()).matrix();
}

Eigen::VectorXd conformity_scores(const CqrModel& model, const Dataset& data)
{
    check_same_width(*model.qforest, data);
    Eigen::VectorXd scores(data.n_rows());
    for (Index i = 0; i < data.n_rows(); ++i) {
        const auto [lo, hi] = model.band(data.features().row(i));
        scores(i) = cqr_score(lo, hi, data.response()(i));
    }
    return scores;
}

namespace {

template <typename Model>
ConformalThreshold calibrate_model(const Model& model, const Dataset& calib, double alpha)
{
    check_nonempty(calib, "calibrate");
    // Fail on admissibility before any prediction work.
    ceil_index(calib.n_rows(), alpha);
    const Eigen::VectorXd scores = conformity_scores(model, calib);
    return calibrate_threshold(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                               alpha);
}

} // namespace

ConformalThreshold calibrate(const ScaledModel& model, const Dataset& calib, double alpha)
{
    return calibrate_model(model, calib, alpha);
}

ConformalThreshold calibrate(const SkewModel& model, const Dataset& calib, double alpha)
{
    return calibrate_model(model, calib, alpha);
}

ConformalThreshold calibrate(const CqrModel& model, const Dataset& calib, double alpha)
{
    if (std::abs(model.lo_level - alpha / 2.0) > 1e-15 || std::abs(model.hi_level - (1.0 - alpha / 2.0)) > 1e-15) {
        throw ConfigError("calibrate: CQR model levels do not match alpha; use CqrModel::at_alpha");
    }
    return calibrate_model(model, calib, alpha);
}

PredictionInterval predict_interval(const ScaledModel& model, const ConformalThreshold& thr, const FeatureRow& x)
{
    const double mu = model.center(x);
    const auto iv = scaled_interval(mu, model.scale(x), thr.r_hat);
    return {iv.lo, iv.hi, Method::scaled, mu};
}

PredictionInterval predict_interval(const SkewModel& model, const ConformalThreshold& thr, const FeatureRow& x)
{
    const double mu = model.center(x);
    const auto iv = skew_interval(mu, model.scale(x), model.tilt(x), thr.r_hat);
    return {iv.lo, iv.hi, Method::skew, mu};
}

PredictionInterval predict_interval(const CqrModel& model, const ConformalThreshold& thr, const FeatureRow& x)
{
    const auto [lo, hi] = model.band(x);
    auto iv = cqr_interval(lo, hi, thr.r_hat);
    // A negative threshold larger than half the band would cross the endpoints.
    if (iv.lo > iv.hi) {
        iv.lo = iv.hi = 0.5 * (iv.lo + iv.hi);
    }
    return {iv.lo, iv.hi, Method::cqr, std::nullopt};
}

} // namespace skewcp
