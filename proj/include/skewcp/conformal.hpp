#pragma once

// Split conformal pipelines: scaled-score, skew-adaptive and CQR.
//
// Each model type exposes the same three steps as free functions:
//   fit_*            learn the base models on the training sample
//   calibrate        score the calibration sample and take the order statistic
//   predict_interval map a feature row to its conformal interval

#include "skewcp/dataset.hpp"
#include "skewcp/forest.hpp"
#include "skewcp/scores.hpp"

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace skewcp {

enum class Method { scaled, skew, cqr };

std::string_view to_string(Method m) noexcept;
/// Accepts "scaled", "skew" and "cqr"; throws ConfigError otherwise.
Method parse_method(std::string_view name);

struct PredictionInterval {
    double lo = 0.0;
    double hi = 0.0;
    Method method = Method::scaled;
    /// mu(x) for the scaled and skew methods.
    std::optional<double> center;

    double width() const noexcept { return hi - lo; }
    bool contains(double y) const noexcept { return lo <= y && y <= hi; }
};

inline constexpr double default_gamma_clip = 5.0;
inline constexpr double sigma_floor_factor = 1e-8;

/// Center mu and scale sigma forests. The forests are shared, so a skew model
/// built from a scaled model reuses exactly the same fits.
struct ScaledModel {
    std::shared_ptr<const ForestModel> mu;
    std::shared_ptr<const ForestModel> sigma;
    double sigma_floor = 0.0;

    double center(const FeatureRow& x) const { return mu->predict_mean(x); }
    /// max(sigma(x), sigma_floor).
    double scale(const FeatureRow& x) const;
};

struct SkewModel {
    std::shared_ptr<const ForestModel> mu;
    std::shared_ptr<const ForestModel> sigma;
    std::shared_ptr<const ForestModel> gamma;
    double sigma_floor = 0.0;
    double gamma_clip = default_gamma_clip;
    /// Debug switch: report a zero tilt everywhere.
    bool zero_tilt = false;

    double center(const FeatureRow& x) const { return mu->predict_mean(x); }
    double scale(const FeatureRow& x) const;
    /// gamma(x) clipped to [-gamma_clip, gamma_clip], or 0 when zero_tilt is set.
    double tilt(const FeatureRow& x) const;

    /// The scaled model sharing this model's mu and sigma.
    ScaledModel scaled() const { return {mu, sigma, sigma_floor}; }
};

struct CqrModel {
    std::shared_ptr<const ForestModel> qforest;
    double lo_level = 0.05;
    double hi_level = 0.95;

    /// (q_lo(x), q_hi(x)).
    std::pair<double, double> band(const FeatureRow& x) const;
    /// The same forest at levels alpha/2 and 1 - alpha/2.
    CqrModel at_alpha(double alpha) const;
};

/// Stream ids for seeds derived from ForestParams::seed.
enum class ModelStream : std::uint64_t { center = 0, scale = 1, tilt = 2, quantile = 3 };

/// Fit mu on (x, y), then sigma on |y - mu(x)| (in-sample residuals).
ScaledModel fit_scaled(const Dataset& train, const ForestParams& params);

/// Fit the tilt forest on asinh(z/2), z = (y - mu(x)) / max(sigma(x), floor),
/// reusing the given scaled model's mu and sigma.
SkewModel fit_skew(const Dataset& train, const ForestParams& params, const ScaledModel& base);
/// All three stages; mu and sigma identical to fit_scaled(train, params).
SkewModel fit_skew(const Dataset& train, const ForestParams& params);

/// One quantile-mode forest, levels alpha/2 and 1 - alpha/2.
CqrModel fit_cqr(const Dataset& train, const ForestParams& params, double alpha);

/// Conformity scores of every row of `data`.
Eigen::VectorXd conformity_scores(const ScaledModel& model, const Dataset& data);
Eigen::VectorXd conformity_scores(const SkewModel& model, const Dataset& data);
Eigen::VectorXd conformity_scores(const CqrModel& model, const Dataset& data);

ConformalThreshold calibrate(const ScaledModel& model, const Dataset& calib, double alpha);
ConformalThreshold calibrate(const SkewModel& model, const Dataset& calib, double alpha);
ConformalThreshold calibrate(const CqrModel& model, const Dataset& calib, double alpha);

PredictionInterval predict_interval(const ScaledModel& model, const ConformalThreshold& thr, const FeatureRow& x);
PredictionInterval predict_interval(const SkewModel& model, const ConformalThreshold& thr, const FeatureRow& x);
PredictionInterval predict_interval(const CqrModel& model, const ConformalThreshold& thr, const FeatureRow& x);

template <typename Model>
std::vector<PredictionInterval> predict_intervals(const Model& model, const ConformalThreshold& thr,
                                                  const FeatureMatrix& x)
{
    std::vector<PredictionInterval> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
        out.push_back(predict_interval(model, thr, x.row(i)));
    }
    return out;
}

} // namespace skewcp
