// Command-line entry point: run sweeps, check results against criteria, and
// calibrate the (H, K) constants.

#include "daks/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;

struct RunArgs {
    std::string config;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> seeds;
    std::optional<daks::Round> max_rounds;
    bool serial = false;
    bool trace = false;
};

struct CheckArgs {
    std::string results;
    std::string criteria;
};

struct CalibrateArgs {
    std::string config;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> seeds;
    bool serial = false;
};

std::optional<std::uint64_t> seed_from_env()
{
    const char* v = std::getenv("DAKS_SEED");
    if (v == nullptr || *v == '\0') {
        return std::nullopt;
    }
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw daks::ConfigError(std::string("DAKS_SEED is not an unsigned integer: ") + v);
    }
}

int cmd_run(const RunArgs& args)
{
    auto spec = daks::load_sweep(args.config);
    if (args.out_dir) {
        spec.out_dir = *args.out_dir;
    }
    if (args.seeds) {
        if (*args.seeds == 0) {
            throw daks::ConfigError("--seeds must be >= 1");
        }
        spec.seeds = *args.seeds;
    }
    if (args.max_rounds) {
        spec.max_rounds = *args.max_rounds;
    }
    if (auto s = seed_from_env()) {
        spec.base_seed = *s;
    }
    spec.trace = spec.trace || args.trace;

    daks::SweepOptions options;
    options.threads = args.serial ? 1 : daks::default_threads();
    options.log = &std::cout;
    const auto result = daks::run_sweep(spec, options);
    for (const auto& p : result.adversary_problems) {
        std::cerr << "refused: n=" << p.n << " cell=" << p.cell << " seed=" << p.seed << ": " << p.message << '\n';
    }
    if (result.truncated > 0) {
        std::cerr << result.truncated << " run(s) hit max_rounds\n";
    }
    if (result.adversary_problems.empty()) {
        std::cout << "wrote " << result.trials.size() << " runs to " << spec.out_dir << '\n';
    }
    return result.exit_code();
}

int cmd_check(const CheckArgs& args)
{
    fs::path results = args.results;
    if (fs::is_directory(results)) {
        results /= "summary.csv";
    }
    std::ifstream in(results);
    if (!in) {
        throw daks::ConfigError("cannot read " + results.string());
    }
    const auto runs = daks::parse_csv(in);
    const auto criteria = daks::parse_criteria(daks::load_document(args.criteria));
    const auto report = daks::check(runs, criteria);
    daks::print_checks(std::cout, report);
    const bool ok = std::all_of(report.begin(), report.end(), [](const auto& r) { return r.passed; });
    std::cout << (ok ? "all criteria passed" : "some criteria failed") << '\n';
    return ok ? 0 : 1;
}

int cmd_calibrate(const CalibrateArgs& args)
{
    auto spec = daks::parse_calibration(daks::load_document(args.config));
    if (args.out_dir) {
        spec.out_dir = *args.out_dir;
    }
    if (args.seeds) {
        spec.seeds = *args.seeds;
    }
    if (auto s = seed_from_env()) {
        spec.base_seed = *s;
    }
    const auto report = daks::calibrate(spec, args.serial ? 1 : daks::default_threads());
    fs::create_directories(spec.out_dir);
    std::ofstream csv(fs::path(spec.out_dir) / "calibration.csv");
    daks::write_calibration_csv(csv, report);
    daks::write_calibration_csv(std::cout, report);
    if (report.recommended) {
        std::cout << "recommended H = " << report.recommended->first << ", K = " << report.recommended->second << '\n';
        return 0;
    }
    std::cout << "no (H, K) pair in the grid meets the correctness criterion\n";
    return 4;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Decentralized task computing with undependable workers: simulator and experiment harness"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run a seeded sweep and write summary.csv / runs.jsonl");
    run->add_option("--config", run_args.config, "Sweep config (.toml or .json)")->required()->check(CLI::ExistingFile);
    run->add_option("--out-dir", run_args.out_dir, "Output directory (overrides out_dir)");
    run->add_option("--seeds", run_args.seeds, "Seeds per cell (overrides seeds)");
    run->add_option("--max-rounds", run_args.max_rounds, "Round cap per run (0 = 64 * n * chunk_size)");
    run->add_flag("--serial", run_args.serial, "Run trials sequentially");
    run->add_flag("--trace", run_args.trace, "Also write per-round traces.jsonl");

    CheckArgs check_args;
    auto* check = app.add_subcommand("check", "Evaluate criteria against a results CSV");
    check->add_option("--results", check_args.results, "summary.csv or the directory holding it")->required();
    check->add_option("--criteria", check_args.criteria, "Criteria file (.toml or .json)")
        ->required()
        ->check(CLI::ExistingFile);

    CalibrateArgs cal_args;
    auto* cal = app.add_subcommand("calibrate", "Grid-search (H, K) against the correctness criterion");
    cal->add_option("--config", cal_args.config, "Calibration range spec (.toml or .json)")
        ->required()
        ->check(CLI::ExistingFile);
    cal->add_option("--out-dir", cal_args.out_dir, "Output directory for calibration.csv");
    cal->add_option("--seeds", cal_args.seeds, "Seeds per (H, K, n) cell");
    cal->add_flag("--serial", cal_args.serial, "Run trials sequentially");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(run_args);
        }
        if (*check) {
            return cmd_check(check_args);
        }
        if (*cal) {
            return cmd_calibrate(cal_args);
        }
    } catch (const daks::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
