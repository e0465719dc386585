// skewcp: benchmark, synthesis and efficiency-estimation front end.
//
// Exit codes: 0 success, 1 validation suite failed, 2 configuration error,
// 3 data error, 4 inadmissible (n_calib, alpha), 5 internal error.

#include "skewcp/dataset.hpp"
#include "skewcp/efficiency.hpp"
#include "skewcp/errors.hpp"
#include "skewcp/evaluation.hpp"
#include "skewcp/report.hpp"
#include "skewcp/rng.hpp"
#include "skewcp/synthgen.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace skewcp;

namespace {

/// Forest seeds are a fixed stream off the run seed, so the split and the
/// forests never share a generator.
constexpr std::uint64_t forest_stream = 100;

struct ForestFlags {
    int n_trees = 200;
    std::optional<int> mtry;
    int min_leaf = 5;
    std::optional<int> max_depth;
    bool no_bootstrap = false;

    ForestParams resolve(std::uint64_t seed) const
    {
        ForestParams p;
        p.n_trees = n_trees;
        p.mtry = mtry;
        p.min_leaf = min_leaf;
        p.max_depth = max_depth;
        p.bootstrap = !no_bootstrap;
        p.seed = derive_seed(seed, forest_stream);
        return p;
    }
};

void add_forest_flags(CLI::App* app, ForestFlags& f)
{
    app->add_option("--n-trees", f.n_trees, "trees per forest")->capture_default_str();
    app->add_option("--mtry", f.mtry, "features tried per split (default ceil(d/3))");
    app->add_option("--min-leaf", f.min_leaf, "minimum rows per leaf")->capture_default_str();
    app->add_option("--max-depth", f.max_depth, "maximum tree depth (default unlimited)");
    app->add_flag("--no-bootstrap", f.no_bootstrap, "grow each tree on the full training set");
}

struct DataFlags {
    std::string input;
    std::string target;
    std::vector<double> split {0.8, 0.1, 0.1};
    std::string categorical = "one_hot";
};

void add_data_flags(CLI::App* app, DataFlags& f)
{
    app->add_option("--input", f.input, "CSV file with a header row")->required();
    app->add_option("--target", f.target, "response column (default: last column)");
    app->add_option("--split", f.split, "train,calibration,test fractions")->delimiter(',')->expected(3);
    app->add_option("--categorical", f.categorical, "one_hot or ordinal")->capture_default_str();
}

CategoricalPolicy parse_policy(const std::string& s)
{
    if (s == "one_hot") {
        return CategoricalPolicy::one_hot;
    }
    if (s == "ordinal") {
        return CategoricalPolicy::ordinal;
    }
    throw ConfigError("unknown categorical policy '" + s + "' (expected one_hot or ordinal)");
}

SplitSpec make_split(const std::vector<double>& fr, std::uint64_t seed)
{
    if (fr.size() != 3) {
        throw ConfigError("--split needs three fractions");
    }
    SplitSpec s {fr[0], fr[1], fr[2], seed};
    s.validate();
    return s;
}

nlohmann::json params_json(const ForestParams& p, Index d)
{
    return {{"n_trees", p.n_trees},
            {"mtry", p.resolved_mtry(d)},
            {"min_leaf", p.min_leaf},
            {"max_depth", p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr)},
            {"bootstrap", p.bootstrap},
            {"seed", p.seed}};
}

nlohmann::json split_json(const SplitSpec& s)
{
    return {{"train", s.train_frac}, {"calibration", s.calib_frac}, {"test", s.test_frac}, {"seed", s.seed}};
}

// ---------------------------------------------------------------------------

struct BenchFlags {
    DataFlags data;
    ForestFlags forest;
    std::vector<double> alphas {0.10, 0.15, 0.20};
    std::vector<std::string> methods {"skew", "scaled", "cqr"};
    std::uint64_t seed = 0;
    std::string out = ".";
    std::vector<std::string> formats {"csv"};
    bool plot_data = false;
    std::string dataset_id;
    bool zero_tilt = false;
};

int run_bench(const BenchFlags& f)
{
    BenchConfig config;
    config.alphas = f.alphas;
    config.methods.clear();
    for (const auto& m : f.methods) {
        config.methods.push_back(parse_method(m));
    }
    config.params = f.forest.resolve(f.seed);
    config.zero_tilt = f.zero_tilt;
    config.keep_plot_records = f.plot_data;
    config.dataset_id = f.dataset_id.empty() ? fs::path(f.data.input).stem().string() : f.dataset_id;
    // CSV is always written; json and md are extra renderings.
    bool want_json = false, want_md = false;
    for (const auto& fmt : f.formats) {
        if (fmt == "json") {
            want_json = true;
        } else if (fmt == "md") {
            want_md = true;
        } else if (fmt != "csv") {
            throw ConfigError("unknown output format '" + fmt + "' (expected csv, json or md)");
        }
    }
    const SplitSpec split = make_split(f.data.split, f.seed);
    const CategoricalPolicy policy = parse_policy(f.data.categorical);
    if (!fs::is_directory(f.out)) {
        throw ConfigError("output directory '" + f.out + "' does not exist");
    }

    const Dataset data = load_csv(f.data.input, f.data.target, policy);
    const auto sizes = split.sizes(data.n_rows());
    validate_bench_config(config, sizes.calibration, data.n_cols());

    const BenchReport report = run_benchmark(data, split, config);

    nlohmann::json method_names = nlohmann::json::array();
    for (Method m : config.methods) {
        method_names.push_back(std::string(to_string(m)));
    }
    const nlohmann::json resolved = {{"subcommand", "bench"},
                                     {"input", f.data.input},
                                     {"target", data.response_name()},
                                     {"categorical", f.data.categorical},
                                     {"dataset_id", config.dataset_id},
                                     {"seed", f.seed},
                                     {"split", split_json(split)},
                                     {"alphas", config.alphas},
                                     {"methods", method_names},
                                     {"forest", params_json(config.params, data.n_cols())},
                                     {"debug_zero_tilt", config.zero_tilt},
                                     {"formats", f.formats},
                                     {"plot_data", f.plot_data},
                                     {"n_train", report.n_train},
                                     {"n_calib", report.n_calib},
                                     {"n_test", report.n_test}};

    const fs::path out(f.out);
    // Everything is rendered before the first write.
    std::vector<std::pair<fs::path, std::string>> files;
    files.emplace_back(out / "results.csv", results_csv(report));
    files.emplace_back(out / "efficiency.csv", efficiency_csv(report));
    if (want_json) {
        files.emplace_back(out / "results.json", results_json(report).dump(2) + "\n");
        files.emplace_back(out / "efficiency.json", efficiency_json(report).dump(2) + "\n");
    }
    if (want_md) {
        std::string md = coverage_length_markdown(report);
        if (!report.efficiency.empty()) {
            md += "\n" + efficiency_markdown(report);
        }
        files.emplace_back(out / "tables.md", md);
    }
    if (f.plot_data) {
        files.emplace_back(out / "plot.csv", plot_csv(report));
    }
    files.emplace_back(out / "config.json", resolved.dump(2) + "\n");
    for (const auto& [path, text] : files) {
        write_file_atomic(path, text);
    }

    std::cout << coverage_length_markdown(report);
    if (!report.efficiency.empty()) {
        std::cout << '\n' << efficiency_markdown(report);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct SynthFlags {
    std::string mean = "sine";
    std::string scale = "constant";
    std::string noise = "gaussian";
    Index n = 1000;
    int d = 1;
    std::uint64_t seed = 0;
    std::string out;
};

int run_synth(const SynthFlags& f)
{
    SynthSpec spec;
    spec.mean_fn = parse_mean_fn(f.mean);
    spec.scale_fn = parse_scale_fn(f.scale);
    spec.noise = parse_noise(f.noise);
    spec.n = f.n;
    spec.d = f.d;
    spec.seed = f.seed;
    if (spec.n < 1 || spec.d < 1) {
        throw ConfigError("--n and --d must be positive");
    }
    write_file_atomic(f.out, to_csv(generate(spec)));
    return 0;
}

// ---------------------------------------------------------------------------

struct PhiFlags {
    DataFlags data;
    ForestFlags forest;
    double alpha = 0.1;
    std::uint64_t seed = 0;
};

int run_phi(const PhiFlags& f)
{
    BenchConfig config;
    config.alphas = {f.alpha};
    config.methods = {Method::skew, Method::scaled};
    config.params = f.forest.resolve(f.seed);
    config.dataset_id = fs::path(f.data.input).stem().string();
    const SplitSpec split = make_split(f.data.split, f.seed);
    const CategoricalPolicy policy = parse_policy(f.data.categorical);

    const Dataset data = load_csv(f.data.input, f.data.target, policy);
    validate_bench_config(config, split.sizes(data.n_rows()).calibration, data.n_cols());
    const BenchReport report = run_benchmark(data, split, config);
    const EfficiencyReport& e = report.efficiency.front();
    std::cout << "phi_hat " << format_double(e.phi_hat) << '\n'
              << "test_avg_ratio " << format_double(e.test_avg_ratio) << '\n'
              << "abs_difference " << format_double(e.abs_difference) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct ValidateFlags {
    ForestFlags forest {.n_trees = 50, .mtry = std::nullopt, .min_leaf = 5, .max_depth = std::nullopt};
    int replications = 100;
    int probe_replications = 20;
    double alpha = 0.1;
    std::uint64_t seed = 0;
};

int run_validate(const ValidateFlags& f)
{
    bool ok = true;

    CoverageStudyConfig cov;
    cov.generator.noise = Noise::gaussian;
    cov.generator.scale_fn = ScaleFn::linear;
    cov.generator.seed = f.seed;
    cov.alpha = f.alpha;
    cov.replications = f.replications;
    cov.params = f.forest.resolve(f.seed);
    for (const auto& s : run_coverage_study(cov)) {
        const bool pass = s.within_band();
        ok = ok && pass;
        std::printf("%s coverage %-6s mean=%.5f se=%.5f band=[%.4f, %.4f]\n", pass ? "PASS" : "FAIL",
                    std::string(to_string(s.method)).c_str(), s.mean_coverage, s.std_error, s.band_lo, s.band_hi);
    }

    SynthSpec gen;
    gen.scale_fn = ScaleFn::linear;
    gen.noise = Noise::lognormal_std;
    gen.seed = derive_seed(f.seed, 1);
    ProbeOptions probe;
    probe.params = f.forest.resolve(f.seed);
    probe.alpha = f.alpha;
    const std::vector<Index> grid {250, 1000, 4000};
    const auto rows = convergence_probe(gen, grid, f.probe_replications, probe);
    const bool pass = non_increasing_within_noise(rows);
    ok = ok && pass;
    std::printf("%s probe", pass ? "PASS" : "FAIL");
    for (const auto& r : rows) {
        std::printf(" n=%lld:%.5f(%.5f)", static_cast<long long>(r.n_calib), r.mean_discrepancy, r.std_error);
    }
    std::printf("\n");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app {"Skew-adaptive split conformal prediction"};
    app.require_subcommand(1);

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "benchmark methods on a CSV dataset");
    add_data_flags(bench_cmd, bench.data);
    add_forest_flags(bench_cmd, bench.forest);
    bench_cmd->add_option("--alphas", bench.alphas, "miscoverage levels")->delimiter(',');
    bench_cmd->add_option("--methods", bench.methods, "skew,scaled,cqr")->delimiter(',');
    bench_cmd->add_option("--seed", bench.seed, "run seed")->required();
    bench_cmd->add_option("--out", bench.out, "output directory")->capture_default_str();
    bench_cmd->add_option("--formats", bench.formats, "csv,json,md")->delimiter(',');
    bench_cmd->add_flag("--plot-data", bench.plot_data, "write per-test-point interval records");
    bench_cmd->add_option("--dataset-id", bench.dataset_id, "label for reports (default: input file stem)");
    bench_cmd->add_flag("--debug-zero-tilt", bench.zero_tilt, "force the skew model's tilt to zero");

    SynthFlags synth;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
    synth_cmd->add_option("--mean", synth.mean, "linear, sine or step")->capture_default_str();
    synth_cmd->add_option("--scale", synth.scale, "constant, linear or bump")->capture_default_str();
    synth_cmd->add_option("--noise", synth.noise,
                          "none, gaussian, uniform, lognormal_std, exp_std, lognormal_std_mirror, exp_std_mirror")
        ->capture_default_str();
    synth_cmd->add_option("--n", synth.n, "rows")->capture_default_str();
    synth_cmd->add_option("--d", synth.d, "features")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "generator seed")->required();
    synth_cmd->add_option("--out", synth.out, "output CSV path")->required();

    PhiFlags phi;
    auto* phi_cmd = app.add_subcommand("phi", "estimate the skew/scaled width ratio");
    add_data_flags(phi_cmd, phi.data);
    add_forest_flags(phi_cmd, phi.forest);
    phi_cmd->add_option("--alpha", phi.alpha, "miscoverage level")->capture_default_str();
    phi_cmd->add_option("--seed", phi.seed, "run seed")->required();

    ValidateFlags validate;
    auto* validate_cmd = app.add_subcommand("validate", "run the replication-based statistical checks");
    add_forest_flags(validate_cmd, validate.forest);
    validate_cmd->add_option("--replications", validate.replications, "coverage replications")
        ->capture_default_str();
    validate_cmd->add_option("--probe-replications", validate.probe_replications, "convergence probe replications")
        ->capture_default_str();
    validate_cmd->add_option("--alpha", validate.alpha, "miscoverage level")->capture_default_str();
    validate_cmd->add_option("--seed", validate.seed, "run seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "skewcp: " << e.what() << '\n';
        return 2;
    }

    try {
        if (bench_cmd->parsed()) {
            return run_bench(bench);
        }
        if (synth_cmd->parsed()) {
            return run_synth(synth);
        }
        if (phi_cmd->parsed()) {
            return run_phi(phi);
        }
        return run_validate(validate);
    } catch (const ConfigError& e) {
        std::cerr << "skewcp: config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "skewcp: data error: " << e.what() << '\n';
        return 3;
    } catch (const AdmissibilityError& e) {
        std::cerr << "skewcp: admissibility error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "skewcp: internal error: " << e.what() << '\n';
        return 5;
    }
}
