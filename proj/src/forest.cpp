#include "skewcp/forest.hpp"

#include "skewcp/errors.hpp"
#include "skewcp/parallel.hpp"
#include "skewcp/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace skewcp {

int ForestParams::resolved_mtry(Index d) const
{
    if (mtry) {
        return *mtry;
    }
    return std::max(1, static_cast<int>((d + 2) / 3));
}

void ForestParams::validate(Index d) const
{
    if (n_trees < 1) {
        throw ConfigError("forest: n_trees must be positive");
    }
    if (min_leaf < 1) {
        throw ConfigError("forest: min_leaf must be positive");
    }
    if (max_depth && *max_depth < 1) {
        throw ConfigError("forest: max_depth must be positive");
    }
    if (mtry && (*mtry < 1 || *mtry > d)) {
        throw ConfigError("forest: mtry must lie in [1, " + std::to_string(d) + "]");
    }
}

const TreeNode& RegressionTree::leaf_for(const FeatureRow& x) const
{
    const TreeNode* node = &nodes_.front();
    while (!node->is_leaf()) {
        node = &nodes_[static_cast<std::size_t>(x(node->feature) <= node->threshold ? node->left : node->right)];
    }
    return *node;
}

int RegressionTree::depth() const
{
    std::vector<int> level(nodes_.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes_[i].is_leaf()) {
            level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

namespace {

struct Candidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    std::size_t left_count = 0;
};

struct Task {
    int node;
    std::size_t begin;
    std::size_t end;
    int depth;
};

} // namespace

RegressionTree fit_tree(const FeatureMatrix& x, const Eigen::VectorXd& y, const ForestParams& params,
                        std::span<const Index> row_sample, std::uint64_t seed)
{
    const Index d = x.cols();
    params.validate(d);
    if (row_sample.empty()) {
        throw DataError("fit_tree: empty row sample");
    }
    if (x.rows() != y.size()) {
        throw DataError("fit_tree: feature rows differ from response length");
    }

    const int mtry = params.resolved_mtry(d);
    const auto min_leaf = static_cast<std::size_t>(params.min_leaf);
    Xoshiro256 rng(seed);

    RegressionTree tree;
    std::vector<Index> rows(row_sample.begin(), row_sample.end());
    std::vector<int> features(static_cast<std::size_t>(d));
    std::vector<std::pair<double, double>> column; // (feature value, centered response)
    column.reserve(rows.size());

    tree.nodes_.emplace_back();
    std::vector<Task> stack {{0, 0, rows.size(), 0}};

    while (!stack.empty()) {
        const Task task = stack.back();
        stack.pop_back();
        const std::size_t size = task.end - task.begin;

        double sum = 0.0;
        for (std::size_t i = task.begin; i < task.end; ++i) {
            sum += y(rows[i]);
        }
        const double mean = sum / static_cast<double>(size);
        double sse = 0.0;
        for (std::size_t i = task.begin; i < task.end; ++i) {
            const double r = y(rows[i]) - mean;
            sse += r * r;
        }

        Candidate best;
        const bool can_split = size >= 2 * min_leaf && (!params.max_depth || task.depth < *params.max_depth)
                               && sse > 0.0;
        if (can_split) {
            std::iota(features.begin(), features.end(), 0);
            if (mtry < d) {
                for (int k = 0; k < mtry; ++k) {
                    const auto j = static_cast<std::size_t>(k)
                                   + static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(d - k)));
                    std::swap(features[static_cast<std::size_t>(k)], features[j]);
                }
                std::sort(features.begin(), features.begin() + mtry);
            }

            // Ties within this tolerance keep the earlier (feature, threshold).
            const double tie_tol = 1e-12 * sse;
            for (int k = 0; k < mtry; ++k) {
                const int f = features[static_cast<std::size_t>(k)];
                column.clear();
                double total = 0.0;
                for (std::size_t i = task.begin; i < task.end; ++i) {
                    const double yc = y(rows[i]) - mean;
                    column.emplace_back(x(rows[i], f), yc);
                    total += yc;
                }
                std::sort(column.begin(), column.end());
                const double base = total * total / static_cast<double>(size);

                double left_sum = 0.0;
                for (std::size_t i = 0; i + 1 < size; ++i) {
                    left_sum += column[i].second;
                    const std::size_t n_left = i + 1;
                    const std::size_t n_right = size - n_left;
                    if (n_left < min_leaf) {
                        continue;
                    }
                    if (n_right < min_leaf) {
                        break;
                    }
                    if (!(column[i].first < column[i + 1].first)) {
                        continue;
                    }
                    const double right_sum = total - left_sum;
                    const double gain = left_sum * left_sum / static_cast<double>(n_left)
                                        + right_sum * right_sum / static_cast<double>(n_right) - base;
                    if (gain > best.gain + tie_tol) {
                        const double lo = column[i].first;
                        const double hi = column[i + 1].first;
                        double mid = 0.5 * (lo + hi);
                        if (!(mid < hi)) {
                            mid = lo;
                        }
                        best = {gain, f, mid, n_left};
                    }
                }
            }
        }

        TreeNode& node = tree.nodes_[static_cast<std::size_t>(task.node)];
        node.value = mean;
        if (best.feature < 0) {
            node.feature = -1;
            node.leaf_begin = static_cast<std::uint32_t>(tree.leaf_rows_.size());
            tree.leaf_rows_.insert(tree.leaf_rows_.end(), rows.begin() + static_cast<std::ptrdiff_t>(task.begin),
                                   rows.begin() + static_cast<std::ptrdiff_t>(task.end));
            node.leaf_end = static_cast<std::uint32_t>(tree.leaf_rows_.size());
            continue;
        }

        const auto first = rows.begin() + static_cast<std::ptrdiff_t>(task.begin);
        const auto last = rows.begin() + static_cast<std::ptrdiff_t>(task.end);
        std::stable_partition(first, last, [&](Index r) { return x(r, best.feature) <= best.threshold; });

        const int left_id = static_cast<int>(tree.nodes_.size());
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left_id;
        node.right = left_id + 1;
        tree.nodes_.emplace_back(); // invalidates `node`
        tree.nodes_.emplace_back();

        const std::size_t mid = task.begin + best.left_count;
        stack.push_back({left_id + 1, mid, task.end, task.depth + 1});
        stack.push_back({left_id, task.begin, mid, task.depth + 1});
    }
    return tree;
}

RegressionTree fit_tree(const Dataset& train, const ForestParams& params, std::span<const Index> row_sample,
                        std::uint64_t seed)
{
    return fit_tree(train.features(), train.response(), params, row_sample, seed);
}

ForestModel::ForestModel(std::vector<RegressionTree> trees, ForestParams params,
                         std::vector<std::uint64_t> tree_seeds, ForestMode mode, Eigen::VectorXd train_response,
                         Index n_features)
    : trees_(std::move(trees))
    , params_(std::move(params))
    , tree_seeds_(std::move(tree_seeds))
    , mode_(mode)
    , train_response_(std::move(train_response))
    , n_features_(n_features)
{
}

void ForestModel::check_dimension(const FeatureRow& x) const
{
    if (x.size() != n_features_) {
        throw DataError("forest: feature row has " + std::to_string(x.size()) + " entries, model expects "
                        + std::to_string(n_features_));
    }
}

double ForestModel::predict_mean(const FeatureRow& x) const
{
    check_dimension(x);
    double sum = 0.0;
    for (const auto& tree : trees_) {
        sum += tree.predict(x);
    }
    return sum / static_cast<double>(trees_.size());
}

Eigen::VectorXd ForestModel::predict_means(const FeatureMatrix& x) const
{
    Eigen::VectorXd out(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        out(i) = predict_mean(x.row(i));
    }
    return out;
}

std::vector<double> ForestModel::predict_quantiles(const FeatureRow& x, std::span<const double> levels) const
{
    if (mode_ != ForestMode::quantile) {
        throw ConfigError("forest: quantile prediction requires a quantile-mode forest");
    }
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) {
            throw ConfigError("forest: quantile level must lie in (0, 1)");
        }
    }
    check_dimension(x);

    std::vector<std::pair<double, double>> weighted; // (response, weight)
    const double per_tree = 1.0 / static_cast<double>(trees_.size());
    for (const auto& tree : trees_) {
        const TreeNode& leaf = tree.leaf_for(x);
        const double w = per_tree / static_cast<double>(leaf.leaf_size());
        for (Index r : tree.rows_of(leaf)) {
            weighted.emplace_back(train_response_(r), w);
        }
    }
    std::sort(weighted.begin(), weighted.end());
    std::vector<double> cumulative(weighted.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        acc += weighted[i].second;
        cumulative[i] = acc;
    }

    // Absorbs rounding in the cumulative sum, e.g. 0.25 + 0.25 vs 0.5.
    constexpr double slack = 1e-12;
    std::vector<double> out;
    out.reserve(levels.size());
    for (double level : levels) {
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), level - slack);
        if (it == cumulative.end()) {
            --it;
        }
        out.push_back(weighted[static_cast<std::size_t>(std::distance(cumulative.begin(), it))].first);
    }
    return out;
}

double ForestModel::predict_quantile(const FeatureRow& x, double level) const
{
    return predict_quantiles(x, std::span<const double>(&level, 1)).front();
}

ForestModel fit_forest(const FeatureMatrix& x, const Eigen::VectorXd& y, const ForestParams& params, ForestMode mode)
{
    params.validate(x.cols());
    if (x.rows() == 0) {
        throw DataError("fit_forest: empty training set");
    }
    if (x.rows() != y.size()) {
        throw DataError("fit_forest: feature rows differ from response length");
    }
    const auto n = static_cast<std::size_t>(x.rows());
    const auto n_trees = static_cast<std::size_t>(params.n_trees);

    std::vector<std::uint64_t> seeds(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        seeds[t] = derive_seed(params.seed, t);
    }
    std::vector<RegressionTree> trees(n_trees);
    parallel_for(n_trees, [&](std::size_t t) {
        Xoshiro256 rng(seeds[t]);
        std::vector<Index> sample(n);
        if (params.bootstrap) {
            for (auto& r : sample) {
                r = static_cast<Index>(uniform_index(rng, n));
            }
            std::sort(sample.begin(), sample.end());
        } else {
            std::iota(sample.begin(), sample.end(), Index {0});
        }
        trees[t] = fit_tree(x, y, params, sample, rng());
    });
    return ForestModel(std::move(trees), params, std::move(seeds), mode, y, x.cols());
}

ForestModel fit_forest(const Dataset& train, const ForestParams& params, ForestMode mode)
{
    return fit_forest(train.features(), train.response(), params, mode);
}

// Serialization ---------------------------------------------------------------

namespace {

nlohmann::json params_to_json(const ForestParams& p)
{
    nlohmann::json j;
    j["n_trees"] = p.n_trees;
    j["mtry"] = p.mtry ? nlohmann::json(*p.mtry) : nlohmann::json(nullptr);
    j["min_leaf"] = p.min_leaf;
    j["max_depth"] = p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr);
    j["bootstrap"] = p.bootstrap;
    j["seed"] = p.seed;
    return j;
}

ForestParams params_from_json(const nlohmann::json& j)
{
    ForestParams p;
    p.n_trees = j.at("n_trees").get<int>();
    if (!j.at("mtry").is_null()) {
        p.mtry = j.at("mtry").get<int>();
    }
    p.min_leaf = j.at("min_leaf").get<int>();
    if (!j.at("max_depth").is_null()) {
        p.max_depth = j.at("max_depth").get<int>();
    }
    p.bootstrap = j.at("bootstrap").get<bool>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

nlohmann::json tree_to_json(const RegressionTree& tree)
{
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   value = nlohmann::json::array(), leaf_begin = nlohmann::json::array(),
                   leaf_end = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
        leaf_begin.push_back(n.leaf_begin);
        leaf_end.push_back(n.leaf_end);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left},         {"right", right},
            {"value", value},     {"leaf_begin", leaf_begin}, {"leaf_end", leaf_end}, {"leaf_rows", tree.leaf_rows()}};
}

} // namespace

RegressionTree tree_from_json(const nlohmann::json& j)
{
    RegressionTree tree;
    const auto& feature = j.at("feature");
    tree.nodes_.resize(feature.size());
    for (std::size_t i = 0; i < feature.size(); ++i) {
        TreeNode& n = tree.nodes_[i];
        n.feature = feature[i].get<int>();
        n.threshold = j.at("threshold")[i].get<double>();
        n.left = j.at("left")[i].get<int>();
        n.right = j.at("right")[i].get<int>();
        n.value = j.at("value")[i].get<double>();
        n.leaf_begin = j.at("leaf_begin")[i].get<std::uint32_t>();
        n.leaf_end = j.at("leaf_end")[i].get<std::uint32_t>();
    }
    tree.leaf_rows_ = j.at("leaf_rows").get<std::vector<Index>>();
    return tree;
}

nlohmann::json ForestModel::to_json() const
{
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) {
        trees.push_back(tree_to_json(t));
    }
    std::vector<double> response(train_response_.data(), train_response_.data() + train_response_.size());
    return {{"format", "skewcp-forest-v1"},
            {"mode", mode_ == ForestMode::mean ? "mean" : "quantile"},
            {"n_features", n_features_},
            {"params", params_to_json(params_)},
            {"tree_seeds", tree_seeds_},
            {"train_response", response},
            {"trees", trees}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j)
{
    if (j.value("format", "") != "skewcp-forest-v1") {
        throw DataError("forest: unrecognized serialization format");
    }
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) {
        trees.push_back(tree_from_json(t));
    }
    const auto response = j.at("train_response").get<std::vector<double>>();
    return ForestModel(std::move(trees), params_from_json(j.at("params")),
                       j.at("tree_seeds").get<std::vector<std::uint64_t>>(),
                       j.at("mode").get<std::string>() == "quantile" ? ForestMode::quantile : ForestMode::mean,
                       Eigen::Map<const Eigen::VectorXd>(response.data(), static_cast<Index>(response.size())),
                       j.at("n_features").get<Index>());
}

} // namespace skewcp
