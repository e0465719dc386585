#pragma once

// Report writers. Long-format CSV/JSON are the canonical outputs; the
// Markdown tables are a presentation of the same numbers.
//
// results.csv     dataset,method,alpha,nominal_coverage,empirical_coverage,avg_length,covered,n_test,seed
// efficiency.csv  dataset,alpha,phi_hat,test_avg_ratio,abs_difference,r_hat_scaled,r_hat_skew,n_calib,n_test
// plot.csv        dataset,alpha,method,test_row,center,lo,hi,y   (center empty for cqr)

#include "skewcp/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace skewcp {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

std::string results_csv(const BenchReport& report);
std::string efficiency_csv(const BenchReport& report);
std::string plot_csv(const BenchReport& report);

nlohmann::json results_json(const BenchReport& report);
nlohmann::json efficiency_json(const BenchReport& report);

/// Wide table: one row per nominal level, coverage and mean length per
/// method, shortest length in bold.
std::string coverage_length_markdown(const BenchReport& report);
/// One row per level: phi_hat, test average ratio, absolute difference.
std::string efficiency_markdown(const BenchReport& report);

/// Write via a sibling temporary file and rename, so readers never see a
/// partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace skewcp
