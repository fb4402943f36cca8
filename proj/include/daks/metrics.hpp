#pragma once

// Efficiency measures (rounds, time, work, point-to-point messages) and the
// protocol event markers derived from per-round traces.

#include "daks/protocol.hpp"
#include "daks/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace daks {

struct SendRecord {
    ProcId sender;
    MessageKind kind = MessageKind::Share;
    std::uint64_t draws = 0;  // profess draws before dedup
    std::uint32_t sent = 0;   // messages actually sent
};

/// Everything that happened in one round.
struct RoundTrace {
    Round round = 0;
    std::uint32_t chunk_size = 1;
    std::uint32_t active = 0;  // live, non-halted processors that took the round's steps
    std::uint32_t workers = 0;
    std::uint32_t enlightened = 0;
    std::uint64_t work = 0;
    std::uint64_t msgs_share = 0;
    std::uint64_t msgs_profess = 0;
    std::uint64_t profess_draws = 0;
    std::uint64_t delivered = 0;
    std::vector<ProcId> crashed;
    std::vector<ProcId> newly_enlightened;
    std::vector<ProcId> newly_halted;
    std::vector<SendRecord> sends;  // only filled when detailed tracing is on
};

struct RunMetrics {
    std::uint64_t rounds = 0;
    std::uint64_t time_units = 0;
    std::uint64_t work = 0;
    std::uint64_t msgs_share = 0;
    std::uint64_t msgs_profess = 0;
    std::uint64_t profess_draws = 0;
    std::optional<Round> first_enlightened_round;
    std::optional<Round> last_halt_round;
    std::uint64_t survivor_count = 0;

    std::uint64_t messages() const noexcept { return msgs_share + msgs_profess; }

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

/// Folds one run's traces (rounds 1, 2, ... in order) into totals.
inline RunMetrics accumulate(std::span<const RoundTrace> events, std::size_t n)
{
    RunMetrics m;
    std::uint64_t crashed = 0;
    Round expected = 1;
    for (const auto& e : events) {
        if (e.round != expected) {
            throw std::invalid_argument("accumulate: out-of-order trace event (expected round " +
                                        std::to_string(expected) + ", got " + std::to_string(e.round) + ")");
        }
        ++expected;
        ++m.rounds;
        m.time_units += e.chunk_size;
        m.work += e.work;
        m.msgs_share += e.msgs_share;
        m.msgs_profess += e.msgs_profess;
        m.profess_draws += e.profess_draws;
        crashed += e.crashed.size();
        if (!e.newly_enlightened.empty() && !m.first_enlightened_round) {
            m.first_enlightened_round = e.round;
        }
        if (!e.newly_halted.empty()) {
            m.last_halt_round = e.round;
        }
    }
    if (crashed > n) {
        throw std::invalid_argument("accumulate: more crashes than processors");
    }
    m.survivor_count = n - crashed;
    return m;
}

/// One completed (or truncated) run as reported in the summary CSV.
struct RunRecord {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t t = 0;
    std::string model;
    RunMetrics metrics;
    bool all_correct = false;
    bool agreement = false;
    bool all_halted = false;
    bool truncated = false;
    double H = default_H;
    double K = default_K;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// ---------------------------------------------------------------------------
// Normalizers used by the scaling checks.

enum class Normalizer : std::uint8_t { NLogN, NLogNLogLogN, NPow1PlusEps };

inline double normalizer_value(Normalizer kind, double n, double eps = 0.5)
{
    const double lg = std::log2(n);
    switch (kind) {
    case Normalizer::NLogN: return n * lg;
    case Normalizer::NLogNLogLogN: return n * lg * std::log2(lg);
    case Normalizer::NPow1PlusEps: return std::pow(n, 1.0 + eps);
    }
    return 1.0;
}

struct SummaryRow {
    std::size_t n = 0;
    std::size_t runs = 0;
    double mean_rounds = 0, max_rounds = 0;
    double mean_work = 0, max_work = 0;
    double mean_msgs = 0, max_msgs = 0;
    double correct_fraction = 0;
    double work_per_nlogn = 0;
    double work_per_nlognloglogn = 0;
    double work_per_n1eps = 0;
    double msgs_per_nlogn = 0;
    double msgs_per_nlognloglogn = 0;
    double msgs_per_n1eps = 0;
};

struct SweepSummary {
    std::string model;
    double eps = 0.5;
    std::vector<SummaryRow> rows;  // ascending n
    std::size_t skipped_truncated = 0;

    /// max over n of a per-n mean ratio divided by its min over n.
    double spread(double SummaryRow::*field) const
    {
        if (rows.empty()) {
            return 0.0;
        }
        double lo = rows.front().*field;
        double hi = lo;
        for (const auto& r : rows) {
            lo = std::min(lo, r.*field);
            hi = std::max(hi, r.*field);
        }
        return lo > 0 ? hi / lo : INFINITY;
    }
};

/// Per-n aggregates over completed runs. Truncated runs are skipped and counted.
inline SweepSummary summarize(std::span<const RunRecord> runs, const std::string& model, double eps = 0.5)
{
    SweepSummary s;
    s.model = model;
    s.eps = eps;
    std::map<std::size_t, std::vector<const RunRecord*>> by_n;
    for (const auto& r : runs) {
        if (r.truncated) {
            ++s.skipped_truncated;
            continue;
        }
        by_n[r.n].push_back(&r);
    }
    for (const auto& [n, group] : by_n) {
        SummaryRow row;
        row.n = n;
        row.runs = group.size();
        std::size_t correct = 0;
        for (const auto* r : group) {
            const auto& m = r->metrics;
            row.mean_rounds += static_cast<double>(m.rounds);
            row.max_rounds = std::max(row.max_rounds, static_cast<double>(m.rounds));
            row.mean_work += static_cast<double>(m.work);
            row.max_work = std::max(row.max_work, static_cast<double>(m.work));
            row.mean_msgs += static_cast<double>(m.messages());
            row.max_msgs = std::max(row.max_msgs, static_cast<double>(m.messages()));
            correct += r->all_correct ? 1 : 0;
        }
        const double k = static_cast<double>(group.size());
        row.mean_rounds /= k;
        row.mean_work /= k;
        row.mean_msgs /= k;
        row.correct_fraction = static_cast<double>(correct) / k;
        const double nd = static_cast<double>(n);
        auto norm = [&](Normalizer z) {
            const double v = normalizer_value(z, nd, eps);
            return v > 0 ? v : NAN;
        };
        row.work_per_nlogn = row.mean_work / norm(Normalizer::NLogN);
        row.work_per_nlognloglogn = row.mean_work / norm(Normalizer::NLogNLogLogN);
        row.work_per_n1eps = row.mean_work / norm(Normalizer::NPow1PlusEps);
        row.msgs_per_nlogn = row.mean_msgs / norm(Normalizer::NLogN);
        row.msgs_per_nlognloglogn = row.mean_msgs / norm(Normalizer::NLogNLogLogN);
        row.msgs_per_n1eps = row.mean_msgs / norm(Normalizer::NPow1PlusEps);
        s.rows.push_back(row);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Summary CSV. The first twelve columns are a stable contract; later columns
// carry extra per-run data and are only ever appended.

inline const std::vector<std::string>& csv_columns()
{
    static const std::vector<std::string> cols = {
        "seed", "n", "t", "model", "rounds", "time_units", "work", "msgs_share", "msgs_profess",
        "first_enlightened_round", "all_correct", "agreement",
        "last_halt_round", "profess_draws", "survivor_count", "truncated", "all_halted", "H", "K"};
    return cols;
}

inline std::string csv_header()
{
    std::string out;
    for (const auto& c : csv_columns()) {
        if (!out.empty()) {
            out += ',';
        }
        out += c;
    }
    return out;
}

inline std::string csv_row(const RunRecord& r)
{
    auto opt = [](const std::optional<Round>& v) { return v ? std::to_string(*v) : std::string{}; };
    std::ostringstream os;
    os << r.seed << ',' << r.n << ',' << r.t << ',' << r.model << ',' << r.metrics.rounds << ','
       << r.metrics.time_units << ',' << r.metrics.work << ',' << r.metrics.msgs_share << ','
       << r.metrics.msgs_profess << ',' << opt(r.metrics.first_enlightened_round) << ',' << int{r.all_correct} << ','
       << int{r.agreement} << ',' << opt(r.metrics.last_halt_round) << ',' << r.metrics.profess_draws << ','
       << r.metrics.survivor_count << ',' << int{r.truncated} << ',' << int{r.all_halted} << ',' << r.H << ','
       << r.K;
    return os.str();
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') {
            cell.pop_back();
        }
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}
}  // namespace detail

/// Parses a summary CSV. Columns are located by name; a missing one is an error.
inline std::vector<RunRecord> parse_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        return {};
    }
    const auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < header.size(); ++i) {
        at[header[i]] = i;
    }
    for (const auto& c : csv_columns()) {
        if (!at.contains(c)) {
            throw std::runtime_error("results CSV is missing column '" + c + "'");
        }
    }
    std::vector<RunRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        if (cells.size() < header.size()) {
            throw std::runtime_error("results CSV line " + std::to_string(line_no) + " has too few fields");
        }
        auto get = [&](const char* name) -> const std::string& { return cells[at.at(name)]; };
        auto u64 = [&](const char* name) { return static_cast<std::uint64_t>(std::stoull(get(name))); };
        auto opt = [&](const char* name) -> std::optional<Round> {
            const auto& v = get(name);
            return v.empty() ? std::nullopt : std::optional<Round>(static_cast<Round>(std::stoul(v)));
        };
        RunRecord r;
        try {
            r.seed = u64("seed");
            r.n = u64("n");
            r.t = u64("t");
            r.model = get("model");
            r.metrics.rounds = u64("rounds");
            r.metrics.time_units = u64("time_units");
            r.metrics.work = u64("work");
            r.metrics.msgs_share = u64("msgs_share");
            r.metrics.msgs_profess = u64("msgs_profess");
            r.metrics.first_enlightened_round = opt("first_enlightened_round");
            r.all_correct = u64("all_correct") != 0;
            r.agreement = u64("agreement") != 0;
            r.metrics.last_halt_round = opt("last_halt_round");
            r.metrics.profess_draws = u64("profess_draws");
            r.metrics.survivor_count = u64("survivor_count");
            r.truncated = u64("truncated") != 0;
            r.all_halted = u64("all_halted") != 0;
            r.H = std::stod(get("H"));
            r.K = std::stod(get("K"));
        } catch (const std::logic_error& e) {
            throw std::runtime_error("results CSV line " + std::to_string(line_no) + ": malformed field (" +
                                     e.what() + ")");
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace daks
