#include "skewcp/dataset.hpp"

#include "skewcp/errors.hpp"
#include "skewcp/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace skewcp {

Dataset::Dataset(FeatureMatrix features, Eigen::VectorXd response,
                 std::vector<std::string> feature_names, std::string response_name)
    : features_(std::move(features))
    , response_(std::move(response))
    , feature_names_(std::move(feature_names))
    , response_name_(std::move(response_name))
{
    if (features_.rows() != response_.size()) {
        throw DataError("dataset: feature rows (" + std::to_string(features_.rows())
                        + ") differ from response length (" + std::to_string(response_.size()) + ")");
    }
    if (feature_names_.empty()) {
        for (Index j = 0; j < features_.cols(); ++j) {
            feature_names_.push_back("x" + std::to_string(j + 1));
        }
    }
    if (static_cast<Index>(feature_names_.size()) != features_.cols()) {
        throw DataError("dataset: feature name count does not match column count");
    }
    if (!features_.allFinite() || !response_.allFinite()) {
        throw DataError("dataset: non-finite value in features or response");
    }
}

Dataset Dataset::subset(std::span<const Index> rows) const
{
    FeatureMatrix x(static_cast<Index>(rows.size()), n_cols());
    Eigen::VectorXd y(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Index r = rows[i];
        if (r < 0 || r >= n_rows()) {
            throw DataError("dataset: row index " + std::to_string(r) + " out of range");
        }
        x.row(static_cast<Index>(i)) = features_.row(r);
        y(static_cast<Index>(i)) = response_(r);
    }
    return Dataset(std::move(x), std::move(y), feature_names_, response_name_);
}

Dataset Dataset::with_response(Eigen::VectorXd response) const
{
    return Dataset(features_, std::move(response), feature_names_, response_name_);
}

namespace {

using Row = std::vector<std::string>;

// RFC-4180: quoted fields may contain commas, CR/LF and doubled quotes.
std::vector<Row> parse_records(const std::string& text)
{
    std::vector<Row> records;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        // a blank line is not a record
        if (!(row.size() == 1 && row.front().empty())) {
            records.push_back(std::move(row));
        }
        row.clear();
    };

    std::size_t i = 0;
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) {
        i = 3;
    }
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started && !field.empty()) {
                throw DataError("csv: stray quote inside unquoted field in record "
                                + std::to_string(records.size() + 1));
            }
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            if (i + 1 < text.size() && text[i + 1] == '\n') {
                ++i;
            }
            end_row();
            break;
        case '\n':
            end_row();
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) {
        throw DataError("csv: unterminated quoted field");
    }
    if (field_started || !field.empty() || !row.empty()) {
        end_row();
    }
    return records;
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& cell)
{
    static const char* const tokens[] = {"", "NA", "N/A", "NaN", "nan", "NULL", "null", "?"};
    return std::any_of(std::begin(tokens), std::end(tokens), [&](const char* t) { return cell == t; });
}

bool parse_number(const std::string& cell, double& out)
{
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

} // namespace

Dataset parse_csv(const std::string& text, const std::string& target, CategoricalPolicy policy)
{
    const auto records = parse_records(text);
    if (records.empty()) {
        throw DataError("csv: empty file");
    }
    Row header = records.front();
    for (auto& h : header) {
        h = trim(h);
    }
    const std::size_t n_fields = header.size();
    const std::size_t n_rows = records.size() - 1;
    if (n_rows == 0) {
        throw DataError("csv: empty file (header only, no data rows)");
    }

    std::size_t target_col = n_fields - 1;
    if (!target.empty()) {
        const auto it = std::find(header.begin(), header.end(), target);
        if (it == header.end()) {
            throw DataError("csv: target column '" + target + "' not found");
        }
        target_col = static_cast<std::size_t>(std::distance(header.begin(), it));
    }

    // Collect cells column-wise; data rows are numbered from 1 after the header.
    std::vector<std::vector<std::string>> columns(n_fields, std::vector<std::string>(n_rows));
    for (std::size_t r = 0; r < n_rows; ++r) {
        const Row& rec = records[r + 1];
        if (rec.size() != n_fields) {
            throw DataError("csv: row " + std::to_string(r + 1) + " has " + std::to_string(rec.size())
                            + " fields, expected " + std::to_string(n_fields));
        }
        for (std::size_t c = 0; c < n_fields; ++c) {
            std::string cell = trim(rec[c]);
            if (is_missing(cell)) {
                throw DataError("csv: missing value at row " + std::to_string(r + 1) + ", column '"
                                + header[c] + "'");
            }
            columns[c][r] = std::move(cell);
        }
    }

    auto numeric_column = [&](std::size_t c, std::vector<double>& values) {
        values.resize(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
            if (!parse_number(columns[c][r], values[r])) {
                return false;
            }
        }
        return true;
    };

    std::vector<double> y_values;
    if (!numeric_column(target_col, y_values)) {
        throw DataError("csv: target column '" + header[target_col] + "' is not numeric");
    }
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (!std::isfinite(y_values[r])) {
            throw DataError("csv: non-finite target at row " + std::to_string(r + 1));
        }
    }

    std::vector<std::string> names;
    std::vector<std::vector<double>> encoded;
    for (std::size_t c = 0; c < n_fields; ++c) {
        if (c == target_col) {
            continue;
        }
        std::vector<double> values;
        if (numeric_column(c, values)) {
            for (std::size_t r = 0; r < n_rows; ++r) {
                if (!std::isfinite(values[r])) {
                    throw DataError("csv: non-finite value at row " + std::to_string(r + 1) + ", column '"
                                    + header[c] + "'");
                }
            }
            names.push_back(header[c]);
            encoded.push_back(std::move(values));
            continue;
        }
        std::map<std::string, int> levels; // lexicographic order
        for (const auto& cell : columns[c]) {
            levels.emplace(cell, 0);
        }
        int code = 0;
        for (auto& [level, idx] : levels) {
            idx = code++;
        }
        if (policy == CategoricalPolicy::ordinal) {
            std::vector<double> codes(n_rows);
            for (std::size_t r = 0; r < n_rows; ++r) {
                codes[r] = levels.at(columns[c][r]);
            }
            names.push_back(header[c]);
            encoded.push_back(std::move(codes));
        } else {
            for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
                std::vector<double> indicator(n_rows);
                for (std::size_t r = 0; r < n_rows; ++r) {
                    indicator[r] = columns[c][r] == it->first ? 1.0 : 0.0;
                }
                names.push_back(header[c] + "=" + it->first);
                encoded.push_back(std::move(indicator));
            }
        }
    }

    FeatureMatrix x(static_cast<Index>(n_rows), static_cast<Index>(encoded.size()));
    for (std::size_t j = 0; j < encoded.size(); ++j) {
        for (std::size_t r = 0; r < n_rows; ++r) {
            x(static_cast<Index>(r), static_cast<Index>(j)) = encoded[j][r];
        }
    }
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_values.data(), static_cast<Index>(n_rows));
    return Dataset(std::move(x), std::move(y), std::move(names), header[target_col]);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target, CategoricalPolicy policy)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("csv: cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), target, policy);
}

namespace {

std::string quote_if_needed(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    return out + "\"";
}

} // namespace

std::string to_csv(const Dataset& data)
{
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& name : data.feature_names()) {
        out << quote_if_needed(name) << ',';
    }
    out << quote_if_needed(data.response_name()) << '\n';
    for (Index i = 0; i < data.n_rows(); ++i) {
        for (Index j = 0; j < data.n_cols(); ++j) {
            out << data.features()(i, j) << ',';
        }
        out << data.response()(i) << '\n';
    }
    return out.str();
}

void SplitSpec::validate() const
{
    for (double f : {train_frac, calib_frac, test_frac}) {
        if (!(f > 0.0 && f < 1.0)) {
            throw ConfigError("split: every fraction must lie in (0, 1)");
        }
    }
    if (std::abs(train_frac + calib_frac + test_frac - 1.0) > 1e-12) {
        throw ConfigError("split: fractions must sum to 1");
    }
}

SplitSpec::Sizes SplitSpec::sizes(Index n) const
{
    // The nudge keeps products such as 0.29 * 100 from flooring to 28.
    auto part = [n](double frac) {
        return static_cast<Index>(std::floor(frac * static_cast<double>(n) + 1e-9));
    };
    const Index train = part(train_frac);
    const Index calibration = part(calib_frac);
    return {train, calibration, n - train - calibration};
}

ThreeWaySplit split_three_way(const Dataset& data, const SplitSpec& spec)
{
    spec.validate();
    const Index n = data.n_rows();
    if (n < 3) {
        throw DataError("split: need at least 3 rows, got " + std::to_string(n));
    }
    const auto sizes = spec.sizes(n);
    if (sizes.train <= 0 || sizes.calibration <= 0 || sizes.test <= 0) {
        throw DataError("split: a partition would be empty (sizes " + std::to_string(sizes.train) + "/"
                        + std::to_string(sizes.calibration) + "/" + std::to_string(sizes.test) + ")");
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index {0});
    Xoshiro256 rng(spec.seed);
    shuffle(std::span<Index>(order), rng);

    auto take = [&](std::size_t from, Index count) {
        std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(from),
                                order.begin() + static_cast<std::ptrdiff_t>(from + static_cast<std::size_t>(count)));
        std::sort(rows.begin(), rows.end());
        return rows;
    };

    ThreeWaySplit out;
    out.train_rows = take(0, sizes.train);
    out.calibration_rows = take(static_cast<std::size_t>(sizes.train), sizes.calibration);
    out.test_rows = take(static_cast<std::size_t>(sizes.train + sizes.calibration), sizes.test);
    out.train = data.subset(out.train_rows);
    out.calibration = data.subset(out.calibration_rows);
    out.test = data.subset(out.test_rows);
    out.provenance = spec;
    return out;
}

} // namespace skewcp
