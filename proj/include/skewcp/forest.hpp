#pragma once

// CART regression trees and random forests, in mean mode (point prediction)
// and quantile mode (weighted empirical quantiles of leaf responses).

#include "skewcp/dataset.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace skewcp {

struct ForestParams {
    int n_trees = 200;
    /// Features tried per node; unset means ceil(d / 3).
    std::optional<int> mtry;
    int min_leaf = 5;
    /// Unset means unbounded.
    std::optional<int> max_depth;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    /// mtry resolved against the feature count d.
    int resolved_mtry(Index d) const;
    /// Throws ConfigError on out-of-range values.
    void validate(Index d) const;
};

enum class ForestMode { mean, quantile };

/// Flat-array tree node. Internal nodes route x[feature] <= threshold to the
/// left child. Leaves own the half-open slice [leaf_begin, leaf_end) of the
/// tree's row list.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    std::uint32_t leaf_begin = 0;
    std::uint32_t leaf_end = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    std::uint32_t leaf_size() const noexcept { return leaf_end - leaf_begin; }
};

class RegressionTree {
public:
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    /// Training row indices (with bootstrap multiplicity), grouped by leaf.
    const std::vector<Index>& leaf_rows() const noexcept { return leaf_rows_; }

    const TreeNode& leaf_for(const FeatureRow& x) const;
    double predict(const FeatureRow& x) const { return leaf_for(x).value; }
    std::span<const Index> rows_of(const TreeNode& leaf) const
    {
        return std::span<const Index>(leaf_rows_).subspan(leaf.leaf_begin, leaf.leaf_size());
    }
    int depth() const;

private:
    friend RegressionTree fit_tree(const FeatureMatrix&, const Eigen::VectorXd&, const ForestParams&,
                                   std::span<const Index>, std::uint64_t);
    friend RegressionTree tree_from_json(const nlohmann::json&);

    std::vector<TreeNode> nodes_;
    std::vector<Index> leaf_rows_;
};

/// Grow one CART tree on `row_sample` (indices into x/y, repeats allowed).
/// Splits minimize the within-node sum of squared deviations over a seeded
/// mtry-sized feature subset; thresholds sit at midpoints of consecutive
/// distinct values. Gain ties go to the lower feature index, then the
/// smaller threshold.
RegressionTree fit_tree(const FeatureMatrix& x, const Eigen::VectorXd& y, const ForestParams& params,
                        std::span<const Index> row_sample, std::uint64_t seed);
RegressionTree fit_tree(const Dataset& train, const ForestParams& params, std::span<const Index> row_sample,
                        std::uint64_t seed);

class ForestModel {
public:
    ForestModel() = default;
    ForestModel(std::vector<RegressionTree> trees, ForestParams params, std::vector<std::uint64_t> tree_seeds,
                ForestMode mode, Eigen::VectorXd train_response, Index n_features);

    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    const ForestParams& params() const noexcept { return params_; }
    const std::vector<std::uint64_t>& tree_seeds() const noexcept { return tree_seeds_; }
    ForestMode mode() const noexcept { return mode_; }
    Index n_features() const noexcept { return n_features_; }
    const Eigen::VectorXd& train_response() const noexcept { return train_response_; }

    /// Average of per-tree leaf means.
    double predict_mean(const FeatureRow& x) const;
    Eigen::VectorXd predict_means(const FeatureMatrix& x) const;

    /// Smallest training response whose cumulative forest weight reaches
    /// `level`; weights are the tree-averaged 1/leaf_size of the rows sharing
    /// x's leaf. Requires quantile mode.
    double predict_quantile(const FeatureRow& x, double level) const;
    /// Several levels from one weight pass; result matches `levels` order.
    std::vector<double> predict_quantiles(const FeatureRow& x, std::span<const double> levels) const;

    nlohmann::json to_json() const;
    static ForestModel from_json(const nlohmann::json& j);

private:
    void check_dimension(const FeatureRow& x) const;

    std::vector<RegressionTree> trees_;
    ForestParams params_;
    std::vector<std::uint64_t> tree_seeds_;
    ForestMode mode_ = ForestMode::mean;
    Eigen::VectorXd train_response_;
    Index n_features_ = 0;
};

/// Fit params.n_trees trees, each on its own bootstrap resample (or the full
/// sample) with a seed derived from params.seed and the tree index.
ForestModel fit_forest(const FeatureMatrix& x, const Eigen::VectorXd& y, const ForestParams& params,
                       ForestMode mode = ForestMode::mean);
ForestModel fit_forest(const Dataset& train, const ForestParams& params, ForestMode mode = ForestMode::mean);

} // namespace skewcp
