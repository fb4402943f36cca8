#pragma once

// Per-processor protocol logic: the Send, Receive and Compute stages of one
// loop iteration and the loop guard. Every stage takes a state by value and
// returns the successor; the only shared structure is the append-only
// TripleLedger that gives triples their ids.

#include "daks/knowledge.hpp"
#include "daks/rng.hpp"
#include "daks/types.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace daks {

/// A protocol precondition was violated by the caller.
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline constexpr std::int8_t result_unset = -1;

struct ProcessorState {
    ProcId me;
    Phase phase = Phase::Worker;
    Knowledge knowledge;
    std::vector<std::int8_t> results;  // per chunk-task: 0, 1 or result_unset
    std::uint64_t prof_ctr = 0;
    std::uint32_t ell = 0;
    Round round = 0;

    static ProcessorState initial(ProcId me, std::size_t task_count)
    {
        return ProcessorState{me, Phase::Worker, Knowledge(task_count),
                              std::vector<std::int8_t>(task_count, result_unset), 0, 0, 0};
    }

    std::size_t task_count() const noexcept { return results.size(); }

    bool results_complete() const noexcept
    {
        return std::none_of(results.begin(), results.end(), [](std::int8_t r) { return r == result_unset; });
    }
};

enum class MessageKind : std::uint8_t { Share, Profess };

struct Message {
    MessageKind kind = MessageKind::Share;
    ProcId sender;
    std::shared_ptr<const KnowledgeArray> payload;
};

struct Envelope {
    ProcId target;
    Message message;
};

// ---------------------------------------------------------------------------
// Decisions

/// Plurality from per-value counts; ties go to 0.
constexpr std::uint8_t plurality(std::uint32_t zeros, std::uint32_t ones)
{
    if (zeros == 0 && ones == 0) {
        throw ProtocolError("no results for task");
    }
    return ones > zeros ? 1 : 0;
}

/// Plurality over a set of triples. Duplicates are counted once.
inline std::uint8_t plurality(std::span<const ResultTriple> triples)
{
    std::vector<ResultTriple> distinct(triples.begin(), triples.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::uint32_t zeros = 0;
    std::uint32_t ones = 0;
    for (const auto& t : distinct) {
        (t.value ? ones : zeros) += 1;
    }
    return plurality(zeros, ones);
}

inline bool enlightenment_ready(const KnowledgeArray& knowledge, const Thresholds& th)
{
    return knowledge.all_at_least(th.results_needed);
}

inline bool halt_check(const ProcessorState& state, const Thresholds& th) noexcept
{
    return state.prof_ctr >= th.profess_needed;
}

// ---------------------------------------------------------------------------
// Target selection

/// Uniform over [1, n]; the sender itself is a valid target.
inline ProcId choose_share_target(Rng& rng, std::size_t n)
{
    if (n == 0) {
        throw std::invalid_argument("choose_share_target: n must be positive");
    }
    return ProcId::from_index(rng.below(n));
}

/// Draw count for a profess round: 2^ell * log n, capped at n * log n.
inline std::uint64_t profess_draw_count(std::size_t n, std::uint32_t ell) noexcept
{
    const std::uint64_t lf = log_factor(n);
    const std::uint64_t cap = static_cast<std::uint64_t>(n) * lf;
    // n * log n < 2^40 for any n that fits in 32 bits, so 2^40 * lf is past the cap.
    if (ell >= 40) {
        return cap;
    }
    return std::min(cap, lf << ell);
}

struct ProfessTargets {
    std::vector<ProcId> targets;  // distinct, ascending
    std::uint64_t draws = 0;      // before deduplication
};

/// Samples with replacement, then collapses the multiset to a set.
inline ProfessTargets choose_profess_targets(Rng& rng, std::size_t n, std::uint32_t ell)
{
    if (n == 0) {
        throw std::invalid_argument("choose_profess_targets: n must be positive");
    }
    ProfessTargets out;
    out.draws = profess_draw_count(n, ell);
    std::vector<bool> hit(n, false);
    for (std::uint64_t d = 0; d < out.draws; ++d) {
        hit[rng.below(n)] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (hit[i]) {
            out.targets.push_back(ProcId::from_index(i));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stages

struct SendOutcome {
    ProcessorState state;
    std::vector<Envelope> outbox;
    std::uint64_t draws = 0;  // profess draws before dedup; 0 for a share
};

/// Workers share with one random processor; enlightened processors profess
/// to a random set and double their fanout. The payload is a snapshot of the
/// knowledge as of this stage.
inline SendOutcome send_phase(ProcessorState state, Rng& rng, std::size_t n)
{
    if (state.phase == Phase::Halted) {
        throw ProtocolError("send_phase: halted processors take no steps");
    }
    std::vector<Envelope> outbox;
    std::uint64_t draws = 0;
    auto payload = state.knowledge.snapshot();
    if (state.phase == Phase::Worker) {
        const ProcId q = choose_share_target(rng, n);
        outbox.push_back(Envelope{q, Message{MessageKind::Share, state.me, std::move(payload)}});
    } else {
        auto picked = choose_profess_targets(rng, n, state.ell);
        draws = picked.draws;
        outbox.reserve(picked.targets.size());
        for (ProcId q : picked.targets) {
            outbox.push_back(Envelope{q, Message{MessageKind::Profess, state.me, payload}});
        }
        ++state.ell;
    }
    return SendOutcome{std::move(state), std::move(outbox), draws};
}

inline ProcessorState receive_phase(ProcessorState state, std::span<const Message> inbox, const TripleLedger& ledger)
{
    if (state.phase == Phase::Halted) {
        throw ProtocolError("receive_phase: halted processors take no steps");
    }
    if (inbox.empty()) {
        return state;
    }
    auto& mine = state.knowledge.mutate();
    for (const auto& m : inbox) {
        if (m.kind == MessageKind::Profess) {
            ++state.prof_ctr;
        }
        if (m.payload) {
            mine.merge(*m.payload, ledger);
        }
    }
    return state;
}

struct ComputeOutcome {
    ProcessorState state;
    std::uint64_t work_units = 0;
    bool performed_task = false;
    bool became_enlightened = false;
};

/// One Compute stage. `truth` holds the correct bit of every chunk-task; an
/// erroneous execution (probability `p_err`) yields its complement.
/// `chunk_cost` is the work charged for one worker iteration.
inline ComputeOutcome compute_phase(ProcessorState state, Rng& rng, std::span<const std::uint8_t> truth, double p_err,
                                    const Thresholds& th, TripleLedger& ledger, std::uint64_t chunk_cost = 1)
{
    if (state.phase == Phase::Halted) {
        throw ProtocolError("compute_phase: halted processors take no steps");
    }
    if (truth.size() != state.task_count()) {
        throw std::invalid_argument("compute_phase: truth length differs from task count");
    }
    ++state.round;
    if (state.phase == Phase::Enlightened) {
        return ComputeOutcome{std::move(state), 1, false, false};
    }

    const TaskId j = TaskId::from_index(rng.below(state.task_count()));
    const bool bogus = rng.bernoulli(p_err);
    const auto value = static_cast<std::uint8_t>(truth[j.index()] ^ (bogus ? 1U : 0U));
    const TripleId id = ledger.add(j, ResultTriple{value, state.me, state.round});
    state.knowledge.mutate().insert(id, ledger);
    bool enlightened_now = false;

    const auto& known = state.knowledge.get();
    if (enlightenment_ready(known, th)) {
        for (std::size_t k = 0; k < state.task_count(); ++k) {
            const TaskId task = TaskId::from_index(k);
            state.results[k] = static_cast<std::int8_t>(plurality(known.zeros(task), known.ones(task)));
        }
        state.phase = Phase::Enlightened;
        enlightened_now = true;
    }
    return ComputeOutcome{std::move(state), chunk_cost, true, enlightened_now};
}

}  // namespace daks
