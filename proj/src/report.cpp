#include "skewcp/report.hpp"

#include "skewcp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace skewcp {

std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        throw Error("format_double: conversion failed");
    }
    return std::string(buf, ptr);
}

namespace {

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

} // namespace

std::string results_csv(const BenchReport& report)
{
    std::ostringstream out;
    out << "dataset,method,alpha,nominal_coverage,empirical_coverage,avg_length,covered,n_test,seed\n";
    for (const auto& r : report.results) {
        out << csv_field(r.dataset_id) << ',' << to_string(r.method) << ',' << format_double(r.alpha) << ','
            << format_double(1.0 - r.alpha) << ',' << format_double(r.empirical_coverage) << ','
            << format_double(r.avg_length) << ',' << r.covered << ',' << r.n_test << ',' << r.seed << '\n';
    }
    return out.str();
}

std::string efficiency_csv(const BenchReport& report)
{
    std::ostringstream out;
    out << "dataset,alpha,phi_hat,test_avg_ratio,abs_difference,r_hat_scaled,r_hat_skew,n_calib,n_test\n";
    for (const auto& e : report.efficiency) {
        out << csv_field(e.dataset_id) << ',' << format_double(e.alpha) << ',' << format_double(e.phi_hat) << ','
            << format_double(e.test_avg_ratio) << ',' << format_double(e.abs_difference) << ','
            << format_double(e.r_hat_scaled) << ',' << format_double(e.r_hat_skew) << ',' << e.n_calib << ','
            << e.n_test << '\n';
    }
    return out.str();
}

std::string plot_csv(const BenchReport& report)
{
    const std::string dataset = report.results.empty() ? std::string() : report.results.front().dataset_id;
    std::ostringstream out;
    out << "dataset,alpha,method,test_row,center,lo,hi,y\n";
    for (const auto& p : report.plot) {
        out << csv_field(dataset) << ',' << format_double(p.alpha) << ',' << to_string(p.method) << ','
            << p.test_row << ',' << (p.center ? format_double(*p.center) : std::string()) << ','
            << format_double(p.lo) << ',' << format_double(p.hi) << ',' << format_double(p.y) << '\n';
    }
    return out.str();
}

nlohmann::json results_json(const BenchReport& report)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.results) {
        rows.push_back({{"dataset", r.dataset_id},
                        {"method", std::string(to_string(r.method))},
                        {"alpha", r.alpha},
                        {"nominal_coverage", 1.0 - r.alpha},
                        {"empirical_coverage", r.empirical_coverage},
                        {"avg_length", r.avg_length},
                        {"covered", r.covered},
                        {"n_test", r.n_test},
                        {"seed", r.seed}});
    }
    return {{"n_train", report.n_train}, {"n_calib", report.n_calib}, {"n_test", report.n_test}, {"results", rows}};
}

nlohmann::json efficiency_json(const BenchReport& report)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : report.efficiency) {
        rows.push_back({{"dataset", e.dataset_id},
                        {"alpha", e.alpha},
                        {"phi_hat", e.phi_hat},
                        {"test_avg_ratio", e.test_avg_ratio},
                        {"abs_difference", e.abs_difference},
                        {"r_hat_scaled", e.r_hat_scaled},
                        {"r_hat_skew", e.r_hat_skew},
                        {"n_calib", e.n_calib},
                        {"n_test", e.n_test}});
    }
    return {{"efficiency", rows}};
}

std::string coverage_length_markdown(const BenchReport& report)
{
    std::vector<Method> methods;
    std::vector<double> alphas;
    for (const auto& r : report.results) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
        if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) {
            alphas.push_back(r.alpha);
        }
    }
    std::sort(alphas.begin(), alphas.end());

    std::ostringstream out;
    out << "| Dataset | 1-alpha |";
    for (Method m : methods) {
        out << " Coverage " << to_string(m) << " |";
    }
    for (Method m : methods) {
        out << " Length " << to_string(m) << " |";
    }
    out << "\n|---|---|";
    for (std::size_t i = 0; i < 2 * methods.size(); ++i) {
        out << "---|";
    }
    out << '\n';

    for (double alpha : alphas) {
        std::map<Method, const BenchResult*> row;
        std::string dataset;
        for (const auto& r : report.results) {
            if (r.alpha == alpha) {
                row[r.method] = &r;
                dataset = r.dataset_id;
            }
        }
        double shortest = std::numeric_limits<double>::infinity();
        for (const auto& [m, r] : row) {
            shortest = std::min(shortest, r->avg_length);
        }
        out << "| " << dataset << " | " << fixed(100.0 * (1.0 - alpha), 0) << "% |";
        for (Method m : methods) {
            out << ' ' << (row.count(m) ? fixed(100.0 * row[m]->empirical_coverage, 2) + "%" : "-") << " |";
        }
        for (Method m : methods) {
            if (!row.count(m)) {
                out << " - |";
                continue;
            }
            const std::string len = fixed(row[m]->avg_length, 2);
            out << ' ' << (row[m]->avg_length == shortest ? "**" + len + "**" : len) << " |";
        }
        out << '\n';
    }
    return out.str();
}

std::string efficiency_markdown(const BenchReport& report)
{
    std::ostringstream out;
    out << "| Dataset | 1-alpha | Calibration estimate phi_hat | Test sample average | Absolute difference |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& e : report.efficiency) {
        out << "| " << e.dataset_id << " | " << fixed(100.0 * (1.0 - e.alpha), 0) << "% | " << fixed(e.phi_hat, 4)
            << " | " << fixed(e.test_avg_ratio, 4) << " | " << fixed(e.abs_difference, 4) << " |\n";
    }
    return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw Error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

} // namespace skewcp
