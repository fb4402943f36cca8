#pragma once

// Experiment harness: sweep specifications (TOML or JSON), parallel seeded
// trials, criteria evaluation over the summary CSV, and (H, K) calibration.

#include "daks/adversary.hpp"
#include "daks/io.hpp"
#include "daks/metrics.hpp"
#include "daks/simulator.hpp"

#include <json.hpp>
#include <tomlplusplus/toml.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace daks {

/// Malformed sweep, criteria or calibration document.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Documents

/// Reads a TOML (.toml) or JSON (anything else) file into one JSON tree so
/// both formats share a single schema reader.
inline nlohmann::json load_document(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.extension() == ".toml") {
        try {
            const toml::table tbl = toml::parse(buf.str(), path.string());
            std::ostringstream os;
            os << toml::json_formatter{tbl};
            return nlohmann::json::parse(os.str());
        } catch (const toml::parse_error& e) {
            std::ostringstream os;
            os << path.string() << ": " << e.description() << " (line " << e.source().begin.line << ")";
            throw ConfigError(os.str());
        }
    }
    try {
        return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

namespace detail {

class Fields {
public:
    Fields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object()) {
            throw ConfigError(where_ + ": expected a table");
        }
    }

    std::string name(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string& key, T fallback) const
    {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        return convert<T>(j_.at(key), key);
    }

    template <class T>
    T need(const std::string& key) const
    {
        seen_.insert(key);
        if (!j_.contains(key)) {
            throw ConfigError("missing field '" + name(key) + "'");
        }
        return convert<T>(j_.at(key), key);
    }

    /// Accepts a scalar or an array.
    template <class T>
    std::vector<T> list(const std::string& key, std::vector<T> fallback) const
    {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        const auto& v = j_.at(key);
        if (!v.is_array()) {
            return {convert<T>(v, key)};
        }
        std::vector<T> out;
        for (const auto& e : v) {
            out.push_back(convert<T>(e, key));
        }
        return out;
    }

    const nlohmann::json& raw(const std::string& key) const
    {
        seen_.insert(key);
        return j_.at(key);
    }

    void reject_unknown() const
    {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) {
                throw ConfigError("unknown field '" + name(k) + "'");
            }
        }
    }

private:
    template <class T>
    T convert(const nlohmann::json& v, const std::string& key) const
    {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) {
                throw ConfigError("field '" + name(key) + "': expected a boolean");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0)) {
                throw ConfigError("field '" + name(key) + "': expected a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) {
                throw ConfigError("field '" + name(key) + "': expected a number");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) {
                throw ConfigError("field '" + name(key) + "': expected a string");
            }
        }
        return v.get<T>();
    }

    const nlohmann::json& j_;
    std::string where_;
    mutable std::set<std::string> seen_;
};

inline AdversarySpec parse_adversary(const Fields& f)
{
    AdversarySpec a;
    const auto model = f.get<std::string>("model", "mfp");
    if (model == "mfp") {
        a.model.kind = CrashModelKind::Mfp;
        a.model.exponent = f.get<double>("exponent", 0.5);
    } else if (model == "mpl") {
        a.model.kind = CrashModelKind::Mpl;
        a.model.exponent = f.get<double>("exponent", 1.0);
    } else {
        throw ConfigError("field '" + f.name("model") + "': expected \"mfp\" or \"mpl\"");
    }
    a.model.floor_coeff = f.get<double>("floor_coeff", 1.0);
    try {
        a.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("field '" + f.name("exponent") + "': " + e.what());
    }

    const auto schedule = f.get<std::string>("schedule", "none");
    if (schedule == "none") {
        a.schedule.kind = Aggressiveness::None;
    } else if (schedule == "attrition") {
        a.schedule.kind = Aggressiveness::Attrition;
    } else if (schedule == "cliff") {
        a.schedule.kind = Aggressiveness::Cliff;
    } else {
        throw ConfigError("field '" + f.name("schedule") + "': expected \"none\", \"attrition\" or \"cliff\"");
    }
    a.schedule.cliff_round = f.get<Round>("cliff_round", a.schedule.cliff_round);
    a.schedule.attrition_horizon = f.get<Round>("attrition_horizon", a.schedule.attrition_horizon);
    if (a.schedule.cliff_round == 0) {
        throw ConfigError("field '" + f.name("cliff_round") + "': rounds start at 1");
    }
    if (a.schedule.attrition_horizon == 0) {
        throw ConfigError("field '" + f.name("attrition_horizon") + "': must be >= 1");
    }

    a.avg_p = f.get<double>("avg_p", 0.0);
    a.zeta = f.get<double>("zeta", 0.05);
    const auto profile = f.get<std::string>("profile", "uniform");
    if (profile == "uniform") {
        a.profile.mode = ProfileMode::Uniform;
    } else if (profile == "heterogeneous") {
        a.profile.mode = ProfileMode::Heterogeneous;
    } else {
        throw ConfigError("field '" + f.name("profile") + "': expected \"uniform\" or \"heterogeneous\"");
    }
    a.profile.bad_fraction = f.get<double>("bad_fraction", a.profile.bad_fraction);
    a.profile.bad_p = f.get<double>("bad_p", a.profile.bad_p);
    return a;
}

inline std::string default_label(const AdversarySpec& a)
{
    return a.model.label() + ":" + std::string(to_string(a.schedule.kind));
}

}  // namespace detail

struct CellSpec {
    std::string label;
    AdversarySpec adversary;
};

struct SweepSpec {
    std::string name = "sweep";
    std::vector<std::size_t> n_values{16};
    std::size_t t_ratio = 1;
    std::vector<CellSpec> cells{CellSpec{}};
    std::size_t seeds = 1;
    std::uint64_t base_seed = 1;
    double H = default_H;
    double K = default_K;
    Round max_rounds = 0;
    std::string out_dir = "out";
    bool trace = false;
};

inline std::vector<CellSpec> parse_cells(const detail::Fields& top)
{
    std::vector<CellSpec> cells;
    if (top.has("cell")) {
        const auto& arr = top.raw("cell");
        if (!arr.is_array() || arr.empty()) {
            throw ConfigError("field 'cell': expected a non-empty array of tables");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            detail::Fields f(arr[i], "cell[" + std::to_string(i) + "]");
            CellSpec c;
            c.adversary = detail::parse_adversary(f);
            c.label = f.get<std::string>("label", detail::default_label(c.adversary));
            f.reject_unknown();
            cells.push_back(std::move(c));
        }
    } else if (top.has("adversary")) {
        detail::Fields f(top.raw("adversary"), "adversary");
        CellSpec c;
        c.adversary = detail::parse_adversary(f);
        c.label = f.get<std::string>("label", detail::default_label(c.adversary));
        f.reject_unknown();
        cells.push_back(std::move(c));
    } else {
        cells.push_back(CellSpec{detail::default_label(AdversarySpec{}), AdversarySpec{}});
    }
    return cells;
}

inline SweepSpec parse_sweep(const nlohmann::json& doc)
{
    detail::Fields f(doc, "");
    SweepSpec s;
    s.name = f.get<std::string>("name", s.name);
    s.n_values = f.list<std::size_t>("n", s.n_values);
    if (s.n_values.empty() || std::any_of(s.n_values.begin(), s.n_values.end(), [](auto n) { return n == 0; })) {
        throw ConfigError("field 'n': expected one or more positive integers");
    }
    s.t_ratio = f.get<std::size_t>("t_ratio", s.t_ratio);
    if (s.t_ratio == 0) {
        throw ConfigError("field 't_ratio': must be >= 1");
    }
    s.seeds = f.get<std::size_t>("seeds", s.seeds);
    if (s.seeds == 0) {
        throw ConfigError("field 'seeds': at least one seed per cell is required");
    }
    s.base_seed = f.get<std::uint64_t>("base_seed", s.base_seed);
    s.H = f.get<double>("H", s.H);
    s.K = f.get<double>("K", s.K);
    if (!(s.H > 0.0)) {
        throw ConfigError("field 'H': must be positive");
    }
    if (!(s.K > 0.0)) {
        throw ConfigError("field 'K': must be positive");
    }
    s.max_rounds = f.get<Round>("max_rounds", s.max_rounds);
    s.out_dir = f.get<std::string>("out_dir", s.out_dir);
    s.trace = f.get<bool>("trace", s.trace);
    s.cells = parse_cells(f);
    f.reject_unknown();
    return s;
}

inline SweepSpec load_sweep(const std::filesystem::path& path) { return parse_sweep(load_document(path)); }

/// Every (n, cell, seed) trial of a sweep, in output order.
inline std::vector<ExperimentConfig> expand(const SweepSpec& spec)
{
    std::vector<ExperimentConfig> out;
    for (std::size_t n : spec.n_values) {
        for (const auto& cell : spec.cells) {
            for (std::size_t k = 0; k < spec.seeds; ++k) {
                ExperimentConfig c;
                c.n = n;
                c.t = n * spec.t_ratio;
                c.H = spec.H;
                c.K = spec.K;
                c.seed = spec.base_seed + k;
                c.max_rounds = spec.max_rounds;
                c.adversary = cell.adversary;
                c.detailed_trace = false;
                out.push_back(c);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trials

inline unsigned default_threads()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Calls f(i) for i in [0, count) on `threads` workers. The first exception
/// thrown by any call is rethrown after all workers join.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& f)
{
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            f(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < std::min<std::size_t>(threads, count); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        f(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) {
                            failure = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

struct TrialResult {
    RunRecord record;
    nlohmann::json outcome;
    std::vector<RoundTrace> traces;  // kept only when requested
};

inline TrialResult run_trial(const ExperimentConfig& config, bool keep_traces)
{
    RunOutcome out = run(config);
    TrialResult r{to_record(config, out), outcome_json(config, out), {}};
    if (keep_traces) {
        r.traces = std::move(out.traces);
    }
    return r;
}

struct AdversaryProblem {
    std::size_t n = 0;
    std::string cell;
    std::uint64_t seed = 0;
    std::string message;
};

/// Generates and validates every trial's adversary input before any run.
inline std::vector<AdversaryProblem> precheck_adversaries(const SweepSpec& spec)
{
    std::vector<AdversaryProblem> problems;
    for (std::size_t n : spec.n_values) {
        for (const auto& cell : spec.cells) {
            for (std::size_t k = 0; k < spec.seeds; ++k) {
                const std::uint64_t seed = spec.base_seed + k;
                try {
                    (void)gen_adversary(seed, n, cell.adversary);
                } catch (const std::exception& e) {
                    problems.push_back({n, cell.label, seed, e.what()});
                    if (std::string(e.what()).find("infeasible") != std::string::npos) {
                        break;  // seed-independent; report once per cell
                    }
                }
            }
        }
    }
    return problems;
}

struct SweepOptions {
    unsigned threads = default_threads();
    bool write_files = true;
    std::ostream* log = nullptr;  // progress and summary table
};

struct SweepResult {
    std::vector<ExperimentConfig> configs;
    std::vector<TrialResult> trials;
    std::vector<AdversaryProblem> adversary_problems;
    std::size_t truncated = 0;

    /// 0 on success, 2 if adversary inputs were refused, 3 if any run was truncated.
    int exit_code() const
    {
        if (!adversary_problems.empty()) {
            return 2;
        }
        return truncated > 0 ? 3 : 0;
    }

    std::vector<RunRecord> records() const
    {
        std::vector<RunRecord> out;
        out.reserve(trials.size());
        for (const auto& t : trials) {
            out.push_back(t.record);
        }
        return out;
    }
};

inline void print_summary(std::ostream& os, const SweepSpec& spec, std::span<const RunRecord> records)
{
    std::set<std::string> models;
    for (const auto& r : records) {
        models.insert(r.model);
    }
    for (const auto& model : models) {
        std::vector<RunRecord> group;
        for (const auto& r : records) {
            if (r.model == model) {
                group.push_back(r);
            }
        }
        const auto s = summarize(group, model);
        os << "== " << spec.name << " / " << model << " (t = " << spec.t_ratio << "n, H = " << spec.H
           << ", K = " << spec.K << ")\n";
        os << std::setw(7) << "n" << std::setw(6) << "runs" << std::setw(10) << "rounds" << std::setw(12) << "work"
           << std::setw(12) << "msgs" << std::setw(9) << "correct" << std::setw(12) << "w/nlgn" << std::setw(12)
           << "w/nlgnlglg" << std::setw(12) << "m/nlgn" << '\n';
        for (const auto& r : s.rows) {
            os << std::setw(7) << r.n << std::setw(6) << r.runs << std::setw(10) << std::fixed << std::setprecision(1)
               << r.mean_rounds << std::setw(12) << r.mean_work << std::setw(12) << r.mean_msgs << std::setw(9)
               << std::setprecision(3) << r.correct_fraction << std::setw(12) << r.work_per_nlogn << std::setw(12)
               << r.work_per_nlognloglogn << std::setw(12) << r.msgs_per_nlogn << '\n';
        }
        if (s.skipped_truncated > 0) {
            os << "   (" << s.skipped_truncated << " truncated runs excluded)\n";
        }
        os.unsetf(std::ios::floatfield);
        os << std::setprecision(6);
    }
}

inline std::string timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

/// Runs a sweep. Writes summary.csv, runs.jsonl, traces.jsonl (if tracing) and
/// a run.log sidecar with timestamps to spec.out_dir.
inline SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& options = {})
{
    SweepResult result;
    result.adversary_problems = precheck_adversaries(spec);
    if (!result.adversary_problems.empty()) {
        return result;
    }
    result.configs = expand(spec);
    result.trials.resize(result.configs.size());
    const auto started = timestamp();
    parallel_for(result.configs.size(), options.threads,
                 [&](std::size_t i) { result.trials[i] = run_trial(result.configs[i], spec.trace); });
    for (std::size_t i = 0; i < result.trials.size(); ++i) {
        // The configured cell label names the model column.
        const std::size_t per_n = spec.cells.size() * spec.seeds;
        result.trials[i].record.model = spec.cells[(i % per_n) / spec.seeds].label;
        result.trials[i].outcome["model"] = result.trials[i].record.model;
        result.truncated += result.trials[i].record.truncated ? 1 : 0;
    }

    if (options.write_files) {
        namespace fs = std::filesystem;
        fs::create_directories(spec.out_dir);
        std::ofstream csv(fs::path(spec.out_dir) / "summary.csv");
        csv << csv_header() << '\n';
        for (const auto& t : result.trials) {
            csv << csv_row(t.record) << '\n';
        }
        std::ofstream jsonl(fs::path(spec.out_dir) / "runs.jsonl");
        for (const auto& t : result.trials) {
            jsonl << t.outcome.dump() << '\n';
        }
        if (spec.trace) {
            std::ofstream traces(fs::path(spec.out_dir) / "traces.jsonl");
            for (const auto& t : result.trials) {
                for (const auto& tr : t.traces) {
                    nlohmann::json line = {{"seed", t.record.seed}, {"n", t.record.n}, {"t", t.record.t},
                                           {"model", t.record.model}, {"trace", to_json(tr)}};
                    traces << line.dump() << '\n';
                }
            }
        }
        std::ofstream log(fs::path(spec.out_dir) / "run.log", std::ios::app);
        log << started << " start " << spec.name << " trials=" << result.configs.size() << '\n'
            << timestamp() << " done " << spec.name << " truncated=" << result.truncated << '\n';
    }
    if (options.log != nullptr) {
        const auto records = result.records();
        print_summary(*options.log, spec, records);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Criteria

enum class CriterionKind : std::uint8_t {
    CorrectFraction,     // all-correct runs / runs >= min
    AllHalted,           // every live processor halted and agreed, fraction >= min
    RatioSpread,         // max/min over n of mean metric / normalizer <= max
    TerminationCascade,  // last_halt - first_enlightened <= factor * ceil(log2 n), fraction >= min
    RoundsBound,         // every completed run: rounds <= factor * n
    NoTruncation,
};

struct Criterion {
    std::string id;
    CriterionKind kind = CriterionKind::CorrectFraction;
    std::optional<std::size_t> n;      // filter
    std::optional<std::size_t> t;      // filter
    std::optional<std::string> model;  // filter
    double min = 1.0;
    double max = 1.0;
    double factor = 1.0;
    std::string metric = "work";          // work | msgs
    Normalizer normalizer = Normalizer::NLogN;
    double eps = 0.5;
};

inline std::vector<Criterion> parse_criteria(const nlohmann::json& doc)
{
    detail::Fields top(doc, "");
    if (!top.has("criterion")) {
        throw ConfigError("missing field 'criterion'");
    }
    const auto& arr = top.raw("criterion");
    top.reject_unknown();
    if (!arr.is_array()) {
        throw ConfigError("field 'criterion': expected an array of tables");
    }
    std::vector<Criterion> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        detail::Fields f(arr[i], "criterion[" + std::to_string(i) + "]");
        Criterion c;
        c.id = f.get<std::string>("id", "criterion-" + std::to_string(i + 1));
        const auto kind = f.need<std::string>("kind");
        if (kind == "correct_fraction") {
            c.kind = CriterionKind::CorrectFraction;
            c.min = f.get<double>("min", 1.0);
        } else if (kind == "all_halted") {
            c.kind = CriterionKind::AllHalted;
            c.min = f.get<double>("min", 1.0);
        } else if (kind == "ratio_spread") {
            c.kind = CriterionKind::RatioSpread;
            c.max = f.need<double>("max");
            c.metric = f.get<std::string>("metric", "work");
            if (c.metric != "work" && c.metric != "msgs") {
                throw ConfigError("field '" + f.name("metric") + "': expected \"work\" or \"msgs\"");
            }
            const auto norm = f.get<std::string>("normalizer", "n_log_n");
            if (norm == "n_log_n") {
                c.normalizer = Normalizer::NLogN;
            } else if (norm == "n_log_n_loglog_n") {
                c.normalizer = Normalizer::NLogNLogLogN;
            } else if (norm == "n_pow_1_plus_eps") {
                c.normalizer = Normalizer::NPow1PlusEps;
            } else {
                throw ConfigError("field '" + f.name("normalizer") +
                                  "': expected \"n_log_n\", \"n_log_n_loglog_n\" or \"n_pow_1_plus_eps\"");
            }
            c.eps = f.get<double>("eps", 0.5);
        } else if (kind == "termination_cascade") {
            c.kind = CriterionKind::TerminationCascade;
            c.factor = f.get<double>("factor", 5.0);
            c.min = f.get<double>("min", 0.99);
        } else if (kind == "rounds_bound") {
            c.kind = CriterionKind::RoundsBound;
            c.factor = f.get<double>("factor", 64.0);
        } else if (kind == "no_truncation") {
            c.kind = CriterionKind::NoTruncation;
        } else {
            throw ConfigError("field '" + f.name("kind") + "': unknown criterion kind \"" + kind + "\"");
        }
        if (f.has("n")) {
            c.n = f.need<std::size_t>("n");
        }
        if (f.has("t")) {
            c.t = f.need<std::size_t>("t");
        }
        if (f.has("model")) {
            c.model = f.need<std::string>("model");
        }
        f.reject_unknown();
        out.push_back(std::move(c));
    }
    return out;
}

struct CheckResult {
    std::string id;
    bool passed = false;
    double measured = 0.0;
    double bound = 0.0;
    std::string detail;
};

/// Fraction of runs for which pred holds (0 when empty).
template <class Pred>
double fraction(std::span<const RunRecord> runs, Pred pred)
{
    if (runs.empty()) {
        return 0.0;
    }
    const auto k = std::count_if(runs.begin(), runs.end(), pred);
    return static_cast<double>(k) / static_cast<double>(runs.size());
}

inline CheckResult evaluate(const Criterion& c, std::span<const RunRecord> all)
{
    std::vector<RunRecord> runs;
    for (const auto& r : all) {
        if ((c.n && r.n != *c.n) || (c.t && r.t != *c.t) || (c.model && r.model != *c.model)) {
            continue;
        }
        runs.push_back(r);
    }
    CheckResult out{c.id, false, 0.0, 0.0, {}};
    std::vector<RunRecord> completed;
    std::copy_if(runs.begin(), runs.end(), std::back_inserter(completed), [](const auto& r) { return !r.truncated; });
    if (completed.empty()) {
        out.detail = "no completed runs";
        return out;
    }
    std::ostringstream detail;
    switch (c.kind) {
    case CriterionKind::CorrectFraction:
        out.measured = fraction(runs, [](const RunRecord& r) { return r.all_correct && !r.truncated; });
        out.bound = c.min;
        out.passed = out.measured >= c.min;
        detail << "all-correct fraction over " << runs.size() << " runs";
        break;
    case CriterionKind::AllHalted:
        out.measured = fraction(runs, [](const RunRecord& r) { return r.all_halted && r.agreement && !r.truncated; });
        out.bound = c.min;
        out.passed = out.measured >= c.min;
        detail << "fraction of " << runs.size() << " runs with every live processor halted in agreement";
        break;
    case CriterionKind::RatioSpread: {
        const auto s = summarize(completed, c.model.value_or("*"), c.eps);
        double SummaryRow::*field = nullptr;
        const bool work = c.metric == "work";
        switch (c.normalizer) {
        case Normalizer::NLogN: field = work ? &SummaryRow::work_per_nlogn : &SummaryRow::msgs_per_nlogn; break;
        case Normalizer::NLogNLogLogN:
            field = work ? &SummaryRow::work_per_nlognloglogn : &SummaryRow::msgs_per_nlognloglogn;
            break;
        case Normalizer::NPow1PlusEps: field = work ? &SummaryRow::work_per_n1eps : &SummaryRow::msgs_per_n1eps; break;
        }
        out.measured = s.spread(field);
        out.bound = c.max;
        out.passed = s.rows.size() >= 1 && out.measured <= c.max;
        detail << "max/min over n of mean " << c.metric << " ratio;";
        for (const auto& row : s.rows) {
            detail << " n=" << row.n << ":" << row.*field;
        }
        break;
    }
    case CriterionKind::TerminationCascade: {
        std::size_t ok = 0;
        for (const auto& r : completed) {
            const auto& m = r.metrics;
            if (m.first_enlightened_round && m.last_halt_round &&
                static_cast<double>(*m.last_halt_round - *m.first_enlightened_round) <=
                    c.factor * static_cast<double>(ceil_log2(r.n))) {
                ++ok;
            }
        }
        out.measured = static_cast<double>(ok) / static_cast<double>(completed.size());
        out.bound = c.min;
        out.passed = out.measured >= c.min;
        detail << "fraction of " << completed.size() << " completed runs with last_halt - first_enlightened <= "
               << c.factor << " * ceil(log2 n)";
        break;
    }
    case CriterionKind::RoundsBound: {
        double worst = 0.0;
        for (const auto& r : completed) {
            worst = std::max(worst, static_cast<double>(r.metrics.rounds) / static_cast<double>(r.n));
        }
        out.measured = worst;
        out.bound = c.factor;
        out.passed = worst <= c.factor;
        detail << "max rounds / n over " << completed.size() << " completed runs";
        break;
    }
    case CriterionKind::NoTruncation:
        out.measured = static_cast<double>(runs.size() - completed.size());
        out.bound = 0.0;
        out.passed = completed.size() == runs.size();
        detail << "truncated runs";
        break;
    }
    out.detail = detail.str();
    return out;
}

inline std::vector<CheckResult> check(std::span<const RunRecord> runs, std::span<const Criterion> criteria)
{
    std::vector<CheckResult> out;
    if (runs.empty()) {
        out.push_back(CheckResult{"results", false, 0.0, 0.0, "no completed runs"});
        return out;
    }
    for (const auto& c : criteria) {
        out.push_back(evaluate(c, runs));
    }
    return out;
}

inline void print_checks(std::ostream& os, std::span<const CheckResult> results)
{
    for (const auto& r : results) {
        os << (r.passed ? "PASS " : "FAIL ") << r.id << ": measured " << r.measured << " vs bound " << r.bound
           << " (" << r.detail << ")\n";
    }
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationSpec {
    std::vector<double> H_values{default_H};
    std::vector<double> K_values{default_K};
    std::vector<std::size_t> n_values{64};
    std::size_t t_ratio = 1;
    std::size_t seeds = 20;
    std::uint64_t base_seed = 1;
    double min_fraction = 0.98;
    Round max_rounds = 0;
    AdversarySpec adversary;
    std::string out_dir = "out/calibration";
};

inline CalibrationSpec parse_calibration(const nlohmann::json& doc)
{
    detail::Fields f(doc, "");
    CalibrationSpec s;
    s.H_values = f.list<double>("H", s.H_values);
    s.K_values = f.list<double>("K", s.K_values);
    s.n_values = f.list<std::size_t>("n", s.n_values);
    s.t_ratio = f.get<std::size_t>("t_ratio", s.t_ratio);
    s.seeds = f.get<std::size_t>("seeds", s.seeds);
    s.base_seed = f.get<std::uint64_t>("base_seed", s.base_seed);
    s.min_fraction = f.get<double>("min_fraction", s.min_fraction);
    s.max_rounds = f.get<Round>("max_rounds", s.max_rounds);
    s.out_dir = f.get<std::string>("out_dir", s.out_dir);
    if (f.has("adversary")) {
        detail::Fields a(f.raw("adversary"), "adversary");
        s.adversary = detail::parse_adversary(a);
        a.reject_unknown();
    }
    f.reject_unknown();
    auto positive = [](double v) { return v > 0.0; };
    if (s.H_values.empty() || !std::all_of(s.H_values.begin(), s.H_values.end(), positive)) {
        throw ConfigError("field 'H': expected one or more positive numbers");
    }
    if (s.K_values.empty() || !std::all_of(s.K_values.begin(), s.K_values.end(), positive)) {
        throw ConfigError("field 'K': expected one or more positive numbers");
    }
    if (s.n_values.empty() || std::any_of(s.n_values.begin(), s.n_values.end(), [](auto n) { return n == 0; })) {
        throw ConfigError("field 'n': expected one or more positive integers");
    }
    if (s.seeds == 0 || s.t_ratio == 0) {
        throw ConfigError("fields 'seeds' and 't_ratio' must be >= 1");
    }
    return s;
}

struct CalibrationRow {
    double H = 0;
    double K = 0;
    std::size_t n = 0;
    std::size_t runs = 0;
    double correct_fraction = 0;
    std::size_t truncated = 0;
    bool passed = false;
};

struct CalibrationReport {
    std::vector<CalibrationRow> rows;
    std::vector<std::pair<double, double>> passing;  // (H, K), in search order
    std::optional<std::pair<double, double>> recommended;
};

/// Grid search over (H, K), ordered by K then H. A pair passes when, at every
/// n, the all-correct fraction reaches min_fraction and no run is truncated.
inline CalibrationReport calibrate(const CalibrationSpec& spec, unsigned threads = default_threads())
{
    auto Ks = spec.K_values;
    auto Hs = spec.H_values;
    std::sort(Ks.begin(), Ks.end());
    std::sort(Hs.begin(), Hs.end());
    CalibrationReport report;
    for (double K : Ks) {
        for (double H : Hs) {
            std::vector<ExperimentConfig> configs;
            for (std::size_t n : spec.n_values) {
                for (std::size_t k = 0; k < spec.seeds; ++k) {
                    ExperimentConfig c;
                    c.n = n;
                    c.t = n * spec.t_ratio;
                    c.H = H;
                    c.K = K;
                    c.seed = spec.base_seed + k;
                    c.max_rounds = spec.max_rounds;
                    c.adversary = spec.adversary;
                    configs.push_back(c);
                }
            }
            std::vector<RunRecord> records(configs.size());
            parallel_for(configs.size(), threads,
                         [&](std::size_t i) { records[i] = to_record(configs[i], run(configs[i])); });
            bool pair_ok = true;
            for (std::size_t ni = 0; ni < spec.n_values.size(); ++ni) {
                CalibrationRow row{H, K, spec.n_values[ni], spec.seeds, 0.0, 0, false};
                std::size_t correct = 0;
                for (std::size_t k = 0; k < spec.seeds; ++k) {
                    const auto& r = records[ni * spec.seeds + k];
                    correct += (r.all_correct && !r.truncated) ? 1 : 0;
                    row.truncated += r.truncated ? 1 : 0;
                }
                row.correct_fraction = static_cast<double>(correct) / static_cast<double>(spec.seeds);
                row.passed = row.correct_fraction >= spec.min_fraction && row.truncated == 0;
                pair_ok = pair_ok && row.passed;
                report.rows.push_back(row);
            }
            if (pair_ok) {
                report.passing.emplace_back(H, K);
                if (!report.recommended) {
                    report.recommended = std::make_pair(H, K);
                }
            }
        }
    }
    return report;
}

inline void write_calibration_csv(std::ostream& os, const CalibrationReport& report)
{
    os << "H,K,n,runs,correct_fraction,truncated,passed\n";
    for (const auto& r : report.rows) {
        os << r.H << ',' << r.K << ',' << r.n << ',' << r.runs << ',' << r.correct_fraction << ',' << r.truncated << ','
           << int{r.passed} << '\n';
    }
}

}  // namespace daks
