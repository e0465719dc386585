#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace skewcp {

using Index = Eigen::Index;

/// Row-major so that a single observation is contiguous.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureRow = Eigen::Ref<const Eigen::RowVectorXd>;

/// Feature matrix plus response vector. Immutable after construction;
/// the constructor rejects mismatched shapes and non-finite entries.
class Dataset {
public:
    Dataset() = default;
    Dataset(FeatureMatrix features, Eigen::VectorXd response,
            std::vector<std::string> feature_names = {}, std::string response_name = "y");

    const FeatureMatrix& features() const noexcept { return features_; }
    const Eigen::VectorXd& response() const noexcept { return response_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::string& response_name() const noexcept { return response_name_; }

    Index n_rows() const noexcept { return features_.rows(); }
    Index n_cols() const noexcept { return features_.cols(); }

    /// New dataset holding the given rows, in the given order.
    Dataset subset(std::span<const Index> rows) const;

    /// Same features, new response (used for the auxiliary scale/tilt fits).
    Dataset with_response(Eigen::VectorXd response) const;

private:
    FeatureMatrix features_;
    Eigen::VectorXd response_;
    std::vector<std::string> feature_names_;
    std::string response_name_ = "y";
};

enum class CategoricalPolicy { one_hot, ordinal };

/// Read a headered RFC-4180 CSV. Columns whose every cell parses as a number
/// pass through; others are categorical and encoded per `policy` (one-hot
/// drops the lexicographically first level). Missing cells are rejected.
/// An empty `target` selects the last column.
Dataset load_csv(const std::filesystem::path& path, const std::string& target = {},
                 CategoricalPolicy policy = CategoricalPolicy::one_hot);

/// Same as load_csv but from in-memory text.
Dataset parse_csv(const std::string& text, const std::string& target = {},
                  CategoricalPolicy policy = CategoricalPolicy::one_hot);

/// Serialize with a header row; numbers use round-trip precision.
std::string to_csv(const Dataset& data);

struct SplitSpec {
    double train_frac = 0.8;
    double calib_frac = 0.1;
    double test_frac = 0.1;
    std::uint64_t seed = 0;

    /// Throws ConfigError unless every fraction is in (0,1) and they sum to 1.
    void validate() const;
    /// Partition sizes for n rows: floor for train and calibration, rest to test.
    struct Sizes {
        Index train, calibration, test;
    };
    Sizes sizes(Index n) const;
};

struct ThreeWaySplit {
    Dataset train;
    Dataset calibration;
    Dataset test;
    /// Source row indices of each part, ascending.
    std::vector<Index> train_rows;
    std::vector<Index> calibration_rows;
    std::vector<Index> test_rows;
    SplitSpec provenance;
};

/// Seeded uniform shuffle of row indices, cut into train/calibration/test.
ThreeWaySplit split_three_way(const Dataset& data, const SplitSpec& spec);

} // namespace skewcp
