#pragma once

// JSON documents: versioned adversary fixtures, per-round traces and per-run
// outcome lines.

#include "daks/adversary.hpp"
#include "daks/metrics.hpp"
#include "daks/simulator.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace daks {

inline constexpr int adversary_format_version = 1;

/// Malformed input document; the message names the offending field.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
T require(const nlohmann::json& j, const char* field)
{
    if (!j.contains(field)) {
        throw FormatError(std::string("missing field '") + field + "'");
    }
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(std::string("field '") + field + "' has the wrong type");
    }
}

}  // namespace detail

inline nlohmann::json to_json(const AdversaryInput& in)
{
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : in.schedule.crash_round) {
        rounds.push_back(r ? nlohmann::json(*r) : nlohmann::json(nullptr));
    }
    const auto& m = in.schedule.model;
    return {
        {"version", adversary_format_version},
        {"n", in.n()},
        {"seed", in.seed},
        {"model", m.kind == CrashModelKind::Mfp ? "mfp" : "mpl"},
        {"params", {{"exponent", m.exponent}, {"floor_coeff", m.floor_coeff}}},
        {"crash_round", std::move(rounds)},
        {"p", in.profile.p},
        {"zeta", in.profile.zeta},
    };
}

inline AdversaryInput adversary_from_json(const nlohmann::json& j)
{
    using detail::require;
    if (!j.is_object()) {
        throw FormatError("adversary document must be a JSON object");
    }
    const int version = require<int>(j, "version");
    if (version != adversary_format_version) {
        throw FormatError("field 'version': unsupported adversary format version " + std::to_string(version));
    }
    AdversaryInput out;
    const auto n = require<std::size_t>(j, "n");
    out.seed = require<std::uint64_t>(j, "seed");
    const auto model = require<std::string>(j, "model");
    if (model != "mfp" && model != "mpl") {
        throw FormatError("field 'model': expected \"mfp\" or \"mpl\", got \"" + model + "\"");
    }
    if (!j.contains("params") || !j.at("params").is_object()) {
        throw FormatError("missing field 'params'");
    }
    const auto& params = j.at("params");
    out.schedule.model.kind = model == "mfp" ? CrashModelKind::Mfp : CrashModelKind::Mpl;
    out.schedule.model.exponent = require<double>(params, "exponent");
    out.schedule.model.floor_coeff = params.contains("floor_coeff") ? require<double>(params, "floor_coeff") : 1.0;

    if (!j.contains("crash_round") || !j.at("crash_round").is_array()) {
        throw FormatError("missing field 'crash_round'");
    }
    for (const auto& r : j.at("crash_round")) {
        if (r.is_null()) {
            out.schedule.crash_round.emplace_back();
        } else if (r.is_number_unsigned()) {
            out.schedule.crash_round.emplace_back(r.get<Round>());
        } else {
            throw FormatError("field 'crash_round': entries must be null or a positive round number");
        }
    }
    out.profile.p = require<std::vector<double>>(j, "p");
    out.profile.zeta = require<double>(j, "zeta");
    if (out.schedule.crash_round.size() != n) {
        throw FormatError("field 'crash_round': length differs from n");
    }
    if (out.profile.p.size() != n) {
        throw FormatError("field 'p': length differs from n");
    }
    return out;
}

inline nlohmann::json to_json(const RoundTrace& tr)
{
    auto ids = [](const std::vector<ProcId>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (auto p : v) {
            a.push_back(p.value);
        }
        return a;
    };
    nlohmann::json j = {
        {"round", tr.round},
        {"chunk_size", tr.chunk_size},
        {"active", tr.active},
        {"workers", tr.workers},
        {"enlightened", tr.enlightened},
        {"work", tr.work},
        {"msgs_share", tr.msgs_share},
        {"msgs_profess", tr.msgs_profess},
        {"profess_draws", tr.profess_draws},
        {"delivered", tr.delivered},
        {"crashed", ids(tr.crashed)},
        {"newly_enlightened", ids(tr.newly_enlightened)},
        {"newly_halted", ids(tr.newly_halted)},
    };
    if (!tr.sends.empty()) {
        nlohmann::json sends = nlohmann::json::array();
        for (const auto& s : tr.sends) {
            sends.push_back({{"sender", s.sender.value},
                             {"kind", s.kind == MessageKind::Share ? "share" : "profess"},
                             {"draws", s.draws},
                             {"sent", s.sent}});
        }
        j["sends"] = std::move(sends);
    }
    return j;
}

inline nlohmann::json to_json(const RunMetrics& m)
{
    auto opt = [](const std::optional<Round>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {
        {"rounds", m.rounds},
        {"time_units", m.time_units},
        {"work", m.work},
        {"msgs_share", m.msgs_share},
        {"msgs_profess", m.msgs_profess},
        {"profess_draws", m.profess_draws},
        {"first_enlightened_round", opt(m.first_enlightened_round)},
        {"last_halt_round", opt(m.last_halt_round)},
        {"survivor_count", m.survivor_count},
    };
}

/// One JSON line per run: identity, outcome flags, metrics and final sets.
inline nlohmann::json outcome_json(const ExperimentConfig& config, const RunOutcome& out)
{
    auto ids = [](const std::vector<ProcId>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (auto p : v) {
            a.push_back(p.value);
        }
        return a;
    };
    return {
        {"seed", config.seed},
        {"n", config.n},
        {"t", config.t},
        {"model", config.model_label()},
        {"H", config.H},
        {"K", config.K},
        {"chunk_size", out.chunks.chunk_size},
        {"truncated", out.truncated},
        {"all_halted", out.all_halted},
        {"all_correct", out.all_correct},
        {"agreement", out.agreement},
        {"disagreement_events", out.disagreement_events},
        {"halted", ids(out.halted)},
        {"crashed", ids(out.crashed)},
        {"metrics", to_json(out.metrics)},
    };
}

}  // namespace daks
