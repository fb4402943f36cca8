#pragma once

// Oblivious adversary inputs: per-processor error probabilities and crash
// rounds, fixed before the run from (seed, n, model, schedule parameters).

#include "daks/rng.hpp"
#include "daks/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace daks {

enum class CrashModelKind : std::uint8_t { Mfp, Mpl };

/// Survivor floor |P - F| >= ceil(a * n^eps) for Mfp, ceil(a * (log2 n)^c) for Mpl.
struct CrashModel {
    CrashModelKind kind = CrashModelKind::Mfp;
    double exponent = 0.5;  // eps in (0,1) for Mfp, c >= 1 for Mpl
    double floor_coeff = 1.0;

    static CrashModel fractional_polynomial(double eps, double coeff = 1.0) { return {CrashModelKind::Mfp, eps, coeff}; }
    static CrashModel poly_log(double c, double coeff = 1.0) { return {CrashModelKind::Mpl, c, coeff}; }

    void validate() const
    {
        if (kind == CrashModelKind::Mfp && !(exponent > 0.0 && exponent < 1.0)) {
            throw std::invalid_argument("crash model mfp: epsilon must lie in (0, 1)");
        }
        if (kind == CrashModelKind::Mpl && !(exponent >= 1.0)) {
            throw std::invalid_argument("crash model mpl: c must be >= 1");
        }
        if (!(floor_coeff > 0.0)) {
            throw std::invalid_argument("crash model: floor coefficient must be positive");
        }
    }

    /// Minimum number of processors that must never crash, clamped to [1, n].
    std::size_t survivor_floor(std::size_t n) const
    {
        const double raw = kind == CrashModelKind::Mfp
                               ? floor_coeff * std::pow(static_cast<double>(n), exponent)
                               : floor_coeff * std::pow(std::log2(static_cast<double>(n)), exponent);
        const double c = std::ceil(raw - 1e-9);
        if (c < 1.0) {
            return std::min<std::size_t>(1, n);
        }
        return std::min(n, static_cast<std::size_t>(c));
    }

    std::string label() const
    {
        std::ostringstream os;
        os << (kind == CrashModelKind::Mfp ? "mfp" : "mpl") << '(' << exponent << ')';
        return os.str();
    }

    friend bool operator==(const CrashModel&, const CrashModel&) = default;
};

enum class Aggressiveness : std::uint8_t { None, Attrition, Cliff };

constexpr std::string_view to_string(Aggressiveness a) noexcept
{
    switch (a) {
    case Aggressiveness::None: return "none";
    case Aggressiveness::Attrition: return "attrition";
    case Aggressiveness::Cliff: return "cliff";
    }
    return "?";
}

struct ScheduleParams {
    Aggressiveness kind = Aggressiveness::None;
    Round cliff_round = 10;        // all victims crash at the start of this round
    Round attrition_horizon = 64;  // victims crash at rounds uniform in [1, horizon]
};

struct CrashSchedule {
    CrashModel model;
    std::vector<std::optional<Round>> crash_round;  // indexed by processor; nullopt = never crashes

    std::size_t n() const noexcept { return crash_round.size(); }

    std::size_t survivors() const noexcept
    {
        return static_cast<std::size_t>(
            std::count_if(crash_round.begin(), crash_round.end(), [](const auto& r) { return !r.has_value(); }));
    }

    bool crashed_by(ProcId p, Round r) const
    {
        const auto& c = crash_round.at(p.index());
        return c.has_value() && *c <= r;
    }

    friend bool operator==(const CrashSchedule&, const CrashSchedule&) = default;
};

struct ErrorProfile {
    std::vector<double> p;
    double zeta = 0.05;

    double mean() const
    {
        return p.empty() ? 0.0 : std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
    }

    friend bool operator==(const ErrorProfile&, const ErrorProfile&) = default;
};

enum class ProfileMode : std::uint8_t { Uniform, Heterogeneous };

/// Heterogeneous profiles put `bad_fraction` of the processors at `bad_p`
/// and spread the rest around the mean that keeps the overall average on target.
struct ProfileParams {
    ProfileMode mode = ProfileMode::Uniform;
    double bad_fraction = 0.1;
    double bad_p = 0.9;
};

inline ErrorProfile gen_error_profile(Rng& rng, std::size_t n, double target_avg, double zeta,
                                      const ProfileParams& params = {})
{
    if (!(zeta > 0.0) || !(target_avg >= 0.0) || !(target_avg + zeta < 0.5)) {
        std::ostringstream os;
        os << "infeasible error profile: the average-probability constraint needs target_avg >= 0, zeta > 0 and "
              "target_avg + zeta < 1/2 (got target_avg = "
           << target_avg << ", zeta = " << zeta << ")";
        throw std::invalid_argument(os.str());
    }
    if (n == 0) {
        throw std::invalid_argument("gen_error_profile: n must be positive");
    }
    ErrorProfile out{std::vector<double>(n, target_avg), zeta};
    if (params.mode == ProfileMode::Uniform || target_avg == 0.0) {
        return out;
    }
    if (!(params.bad_p > 0.0 && params.bad_p < 1.0) || !(params.bad_fraction >= 0.0 && params.bad_fraction < 1.0)) {
        throw std::invalid_argument("gen_error_profile: bad_p must lie in (0,1) and bad_fraction in [0,1)");
    }

    auto bad = static_cast<std::size_t>(std::llround(params.bad_fraction * static_cast<double>(n)));
    // The remaining processors cannot have negative probabilities.
    while (bad > 0 && static_cast<double>(bad) * params.bad_p > target_avg * static_cast<double>(n)) {
        --bad;
    }
    const std::size_t good = n - bad;
    const double low_mean =
        good == 0 ? 0.0 : (target_avg * static_cast<double>(n) - static_cast<double>(bad) * params.bad_p) / static_cast<double>(good);
    const double spread = 0.9 * std::min(low_mean, 1.0 - low_mean);

    std::vector<double> values;
    values.reserve(n);
    for (std::size_t i = 0; i < bad; ++i) {
        values.push_back(params.bad_p);
    }
    // Antithetic pairs keep the low group's mean exact.
    for (std::size_t i = 0; i + 1 < good; i += 2) {
        const double u = spread * (2.0 * rng.unit() - 1.0);
        values.push_back(low_mean + u);
        values.push_back(low_mean - u);
    }
    if (good % 2 == 1) {
        values.push_back(low_mean);
    }
    for (std::size_t i = n; i > 1; --i) {
        std::swap(values[i - 1], values[rng.below(i)]);
    }
    for (auto& v : values) {
        v = std::clamp(v, 0.0, std::nextafter(1.0, 0.0));
    }
    out.p = std::move(values);
    return out;
}

inline CrashSchedule gen_crash_schedule(Rng& rng, std::size_t n, const CrashModel& model, const ScheduleParams& params)
{
    model.validate();
    CrashSchedule out{model, std::vector<std::optional<Round>>(n)};
    if (params.kind == Aggressiveness::None || n == 0) {
        return out;
    }
    if (params.cliff_round == 0 || params.attrition_horizon == 0) {
        throw std::invalid_argument("gen_crash_schedule: crash rounds start at 1");
    }
    const std::size_t victims = n - model.survivor_floor(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < victims; ++i) {
        std::swap(order[i], order[i + rng.below(n - i)]);
    }
    for (std::size_t i = 0; i < victims; ++i) {
        const Round r = params.kind == Aggressiveness::Cliff
                            ? params.cliff_round
                            : static_cast<Round>(1 + rng.below(params.attrition_horizon));
        out.crash_round[order[i]] = r;
    }
    return out;
}

struct Violation {
    enum class Kind : std::uint8_t { Malformed, SurvivorFloor, AverageProbability };
    Kind kind = Kind::Malformed;
    std::optional<Round> round;  // round at which the violation takes effect; 0 = before any crash
    std::string message;
};

/// Checks the survivor floor and, for every crash prefix F_r (including the
/// empty one), that the mean error probability over P - F_r stays below 1/2 - zeta.
inline std::vector<Violation> validate_schedule(const CrashSchedule& schedule, const ErrorProfile& profile)
{
    std::vector<Violation> out;
    const std::size_t n = schedule.n();
    if (profile.p.size() != n) {
        out.push_back({Violation::Kind::Malformed, std::nullopt, "profile length differs from schedule length"});
        return out;
    }
    if (n == 0) {
        out.push_back({Violation::Kind::Malformed, std::nullopt, "empty processor set"});
        return out;
    }
    if (!(profile.zeta > 0.0)) {
        out.push_back({Violation::Kind::Malformed, std::nullopt, "zeta must be positive"});
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(profile.p[i] >= 0.0 && profile.p[i] < 1.0)) {
            out.push_back({Violation::Kind::Malformed, std::nullopt,
                           "error probability of processor " + std::to_string(i + 1) + " outside [0, 1)"});
        }
        if (schedule.crash_round[i].has_value() && *schedule.crash_round[i] == 0) {
            out.push_back({Violation::Kind::Malformed, std::nullopt,
                           "crash round of processor " + std::to_string(i + 1) + " must be >= 1"});
        }
    }
    if (!out.empty()) {
        return out;
    }

    std::vector<Round> rounds;
    for (const auto& r : schedule.crash_round) {
        if (r) {
            rounds.push_back(*r);
        }
    }
    std::sort(rounds.begin(), rounds.end());
    rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());

    const std::size_t floor = [&]() -> std::size_t {
        try {
            schedule.model.validate();
        } catch (const std::invalid_argument& e) {
            out.push_back({Violation::Kind::Malformed, std::nullopt, e.what()});
            return 0;
        }
        return schedule.model.survivor_floor(n);
    }();
    if (schedule.survivors() < floor) {
        out.push_back({Violation::Kind::SurvivorFloor, rounds.empty() ? std::nullopt : std::optional<Round>(rounds.back()),
                       "only " + std::to_string(schedule.survivors()) + " survivors, model " +
                           schedule.model.label() + " requires " + std::to_string(floor)});
    }

    const double bound = 0.5 - profile.zeta;
    auto check_prefix = [&](Round r) {
        double sum = 0.0;
        std::size_t live = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = schedule.crash_round[i];
            if (!c || *c > r) {
                sum += profile.p[i];
                ++live;
            }
        }
        if (live == 0) {
            out.push_back({Violation::Kind::SurvivorFloor, r, "no live processors remain"});
            return;
        }
        const double avg = sum / static_cast<double>(live);
        if (!(avg < bound)) {
            std::ostringstream os;
            os << "average error probability " << avg << " over " << live
               << " live processors is not below 1/2 - zeta = " << bound;
            out.push_back({Violation::Kind::AverageProbability, r, os.str()});
        }
    };
    check_prefix(0);
    for (Round r : rounds) {
        check_prefix(r);
    }
    return out;
}

/// Correct result bit for each of the t original tasks.
inline std::vector<std::uint8_t> gen_ground_truth(std::uint64_t seed, std::size_t t)
{
    if (t == 0) {
        throw std::invalid_argument("gen_ground_truth: t must be positive");
    }
    Rng rng(derive_seed(seed, {stream::truth}));
    std::vector<std::uint8_t> bits(t);
    for (auto& b : bits) {
        b = static_cast<std::uint8_t>(rng.next() >> 63);
    }
    return bits;
}

/// Everything the adversary fixes before round 1.
struct AdversaryInput {
    std::uint64_t seed = 0;
    CrashSchedule schedule;
    ErrorProfile profile;

    std::size_t n() const noexcept { return schedule.n(); }
};

struct AdversarySpec {
    CrashModel model;
    ScheduleParams schedule;
    double avg_p = 0.0;
    double zeta = 0.05;
    ProfileParams profile;
};

/// Draws a profile and then crash schedules until the pair validates. Only
/// (seed, n, spec) are consumed. Throws if no valid pair is found.
inline AdversaryInput gen_adversary(std::uint64_t seed, std::size_t n, const AdversarySpec& spec, int max_attempts = 256)
{
    Rng profile_rng(derive_seed(seed, {stream::adversary, stream::profile}));
    ErrorProfile profile = gen_error_profile(profile_rng, n, spec.avg_p, spec.zeta, spec.profile);
    std::string last;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Rng rng(derive_seed(seed, {stream::adversary, stream::schedule, static_cast<std::uint64_t>(attempt)}));
        CrashSchedule schedule = gen_crash_schedule(rng, n, spec.model, spec.schedule);
        const auto violations = validate_schedule(schedule, profile);
        if (violations.empty()) {
            return AdversaryInput{seed, std::move(schedule), std::move(profile)};
        }
        last = violations.front().message;
    }
    throw std::runtime_error("gen_adversary: no valid crash schedule after " + std::to_string(max_attempts) +
                             " attempts; last violation: " + last);
}

}  // namespace daks
