#pragma once

// Global synchronous execution: each round applies scheduled crashes, then
// runs Send, Receive (same-round delivery) and Compute at every live,
// non-halted processor, then the halting guard.

#include "daks/adversary.hpp"
#include "daks/knowledge.hpp"
#include "daks/metrics.hpp"
#include "daks/protocol.hpp"
#include "daks/rng.hpp"
#include "daks/types.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace daks {

/// Maps chunk-tasks [1, n] onto contiguous blocks of ceil(t/n) original tasks.
/// The last chunks may be shorter (or, when t < n * (chunk_size - 1) + 1, empty).
struct ChunkMap {
    std::size_t t = 1;
    std::size_t n = 1;
    std::size_t chunk_size = 1;

    /// Original task ids [first, last] covered by `chunk`; first > last when empty.
    std::pair<std::size_t, std::size_t> range(TaskId chunk) const
    {
        if (chunk.value == 0 || chunk.index() >= n) {
            throw std::out_of_range("ChunkMap::range: chunk id out of range");
        }
        const std::size_t first = chunk.index() * chunk_size + 1;
        const std::size_t last = std::min(t, first + chunk_size - 1);
        return {first, last};
    }

    TaskId chunk_of(std::size_t task) const
    {
        if (task == 0 || task > t) {
            throw std::out_of_range("ChunkMap::chunk_of: task id out of range");
        }
        return TaskId::from_index((task - 1) / chunk_size);
    }
};

inline ChunkMap build_chunk_map(std::size_t t, std::size_t n)
{
    if (n == 0 || t < n) {
        throw std::invalid_argument("build_chunk_map: need t >= n >= 1");
    }
    return ChunkMap{t, n, (t + n - 1) / n};
}

/// One chunk-task's protocol-level bit: the first original task's bit. A
/// bogus chunk execution complements the whole block, so this bit identifies
/// which of the two possible block results was produced.
inline std::vector<std::uint8_t> chunk_truth(const ChunkMap& chunks, std::span<const std::uint8_t> truth)
{
    std::vector<std::uint8_t> out(chunks.n, 0);
    for (std::size_t j = 0; j < chunks.n; ++j) {
        const auto [first, last] = chunks.range(TaskId::from_index(j));
        if (first <= last) {
            out[j] = truth[first - 1];
        }
    }
    return out;
}

/// Expands a processor's chunk-level results into per-task results.
inline std::vector<std::uint8_t> decode_results(const ProcessorState& state, const ChunkMap& chunks,
                                                std::span<const std::uint8_t> truth)
{
    if (!state.results_complete()) {
        throw ProtocolError("decode_results: processor has not decided every task");
    }
    std::vector<std::uint8_t> out(chunks.t);
    for (std::size_t j = 0; j < chunks.n; ++j) {
        const auto [first, last] = chunks.range(TaskId::from_index(j));
        if (first > last) {
            continue;
        }
        const auto flip = static_cast<std::uint8_t>(state.results[j] != truth[first - 1]);
        for (std::size_t k = first; k <= last; ++k) {
            out[k - 1] = truth[k - 1] ^ flip;
        }
    }
    return out;
}

struct ExperimentConfig {
    std::size_t n = 16;
    std::size_t t = 16;
    double H = default_H;
    double K = default_K;
    std::uint64_t seed = 1;
    Round max_rounds = 0;  // 0 selects 64 * n * chunk_size
    AdversarySpec adversary;
    std::optional<AdversaryInput> fixed_adversary;  // overrides `adversary` when set
    bool detailed_trace = false;

    void validate() const
    {
        if (n == 0) {
            throw std::invalid_argument("config: n must be >= 1");
        }
        if (t < n) {
            throw std::invalid_argument("config: t must be >= n");
        }
        if (!(H > 0.0) || !(K > 0.0)) {
            throw std::invalid_argument("config: H and K must be positive");
        }
    }

    Round effective_max_rounds() const
    {
        if (max_rounds != 0) {
            return max_rounds;
        }
        const std::uint64_t cap = 64ULL * n * build_chunk_map(t, n).chunk_size;
        return static_cast<Round>(std::min<std::uint64_t>(cap, UINT32_MAX));
    }

    std::string model_label() const
    {
        const auto& m = fixed_adversary ? fixed_adversary->schedule.model : adversary.model;
        return fixed_adversary ? m.label() + ":fixture" : m.label() + ":" + std::string(to_string(adversary.schedule.kind));
    }
};

/// Adversary input rejected before round 1.
class InvalidAdversary : public std::runtime_error {
public:
    InvalidAdversary(const std::string& what, std::vector<Violation> v)
        : std::runtime_error(what), violations(std::move(v))
    {
    }
    std::vector<Violation> violations;
};

struct RunOutcome {
    std::vector<ProcessorState> states;
    std::vector<ProcId> halted;
    std::vector<ProcId> crashed;
    RunMetrics metrics;
    bool truncated = false;
    std::vector<RoundTrace> traces;
    std::vector<std::uint8_t> truth;  // per original task
    ChunkMap chunks;
    bool all_halted = false;   // every non-crashed processor halted
    bool all_correct = false;  // at least one halted, and every halted one decided every task correctly
    bool agreement = false;    // all halted processors hold identical results
    std::size_t disagreement_events = 0;
};

class World {
public:
    explicit World(const ExperimentConfig& config)
        : World(config, config.fixed_adversary ? *config.fixed_adversary : make_adversary(config))
    {
    }

    World(const ExperimentConfig& config, AdversaryInput adversary)
        : config_(config),
          adversary_(std::move(adversary)),
          chunks_(build_chunk_map(config.t, config.n)),
          thresholds_(Thresholds::make(config.H, config.K, config.n)),
          ledger_(config.n),
          crashed_(config.n, false),
          delivered_profess_(config.n, 0),
          inboxes_(config.n)
    {
        config_.validate();
        if (adversary_.n() != config_.n) {
            throw InvalidAdversary("adversary input is for n = " + std::to_string(adversary_.n()) +
                                       ", config has n = " + std::to_string(config_.n),
                                   {});
        }
        auto violations = validate_schedule(adversary_.schedule, adversary_.profile);
        if (!violations.empty()) {
            std::string what = "adversary input rejected: " + violations.front().message;
            throw InvalidAdversary(what, std::move(violations));
        }
        truth_ = gen_ground_truth(config_.seed, config_.t);
        chunk_truth_ = chunk_truth(chunks_, truth_);
        states_.reserve(config_.n);
        rngs_.reserve(config_.n);
        for (std::size_t i = 0; i < config_.n; ++i) {
            states_.push_back(ProcessorState::initial(ProcId::from_index(i), config_.n));
            rngs_.emplace_back(derive_seed(config_.seed, {stream::processor, i + 1}));
        }
    }

    static AdversaryInput make_adversary(const ExperimentConfig& config)
    {
        config.validate();
        return gen_adversary(config.seed, config.n, config.adversary);
    }

    const ExperimentConfig& config() const noexcept { return config_; }
    const AdversaryInput& adversary() const noexcept { return adversary_; }
    const ChunkMap& chunks() const noexcept { return chunks_; }
    const Thresholds& thresholds() const noexcept { return thresholds_; }
    const TripleLedger& ledger() const noexcept { return ledger_; }
    const std::vector<ProcessorState>& states() const noexcept { return states_; }
    const std::vector<std::uint8_t>& truth() const noexcept { return truth_; }
    const std::vector<std::uint8_t>& chunk_truth_bits() const noexcept { return chunk_truth_; }
    const std::vector<RoundTrace>& traces() const noexcept { return traces_; }
    Round round() const noexcept { return round_; }

    bool crashed(ProcId p) const { return crashed_.at(p.index()); }

    /// Profess messages delivered to `p` so far, counted on the delivery side.
    std::uint64_t delivered_profess(ProcId p) const { return delivered_profess_.at(p.index()); }

    bool active(std::size_t i) const noexcept { return !crashed_[i] && states_[i].phase != Phase::Halted; }

    /// No live processor is still running.
    bool finished() const noexcept
    {
        for (std::size_t i = 0; i < states_.size(); ++i) {
            if (active(i)) {
                return false;
            }
        }
        return true;
    }

    /// One full round. Returns the round's trace (also appended to traces()).
    const RoundTrace& step()
    {
        RoundTrace tr;
        tr.round = ++round_;
        tr.chunk_size = static_cast<std::uint32_t>(chunks_.chunk_size);
        const std::size_t n = config_.n;

        // Crashes take effect at the start of the round. A processor that has
        // already halted has terminated and is not counted as crashed.
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = adversary_.schedule.crash_round[i];
            if (!crashed_[i] && c && *c == round_ && states_[i].phase != Phase::Halted) {
                crashed_[i] = true;
                tr.crashed.push_back(ProcId::from_index(i));
            }
        }

        active_.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (active(i)) {
                active_.push_back(i);
                (states_[i].phase == Phase::Worker ? tr.workers : tr.enlightened) += 1;
            }
        }
        tr.active = static_cast<std::uint32_t>(active_.size());

        // Send. Messages to crashed or halted processors count as sent but are not delivered.
        for (std::size_t i : active_) {
            auto sent = send_phase(std::move(states_[i]), rngs_[i], n);
            states_[i] = std::move(sent.state);
            const bool profess = !sent.outbox.empty() && sent.outbox.front().message.kind == MessageKind::Profess;
            (profess ? tr.msgs_profess : tr.msgs_share) += sent.outbox.size();
            tr.profess_draws += sent.draws;
            if (config_.detailed_trace) {
                tr.sends.push_back(SendRecord{ProcId::from_index(i), profess ? MessageKind::Profess : MessageKind::Share,
                                              sent.draws, static_cast<std::uint32_t>(sent.outbox.size())});
            }
            for (auto& env : sent.outbox) {
                const auto q = env.target.index();
                if (active(q)) {
                    inboxes_[q].push_back(std::move(env.message));
                    ++tr.delivered;
                }
            }
        }

        // Receive.
        for (std::size_t i : active_) {
            auto& inbox = inboxes_[i];
            for (const auto& m : inbox) {
                delivered_profess_[i] += m.kind == MessageKind::Profess ? 1 : 0;
            }
            states_[i] = receive_phase(std::move(states_[i]), inbox, ledger_);
            inbox.clear();
        }

        // Compute.
        for (std::size_t i : active_) {
            auto done = compute_phase(std::move(states_[i]), rngs_[i], chunk_truth_, adversary_.profile.p[i],
                                      thresholds_, ledger_, chunks_.chunk_size);
            states_[i] = std::move(done.state);
            tr.work += done.work_units;
            if (done.became_enlightened) {
                tr.newly_enlightened.push_back(ProcId::from_index(i));
            }
        }

        // Loop guard.
        for (std::size_t i : active_) {
            auto& s = states_[i];
            if (halt_check(s, thresholds_)) {
                if (s.phase != Phase::Enlightened || !s.results_complete()) {
                    throw std::logic_error("processor " + std::to_string(i + 1) + " reached the halting threshold before deciding");
                }
                s.phase = Phase::Halted;
                tr.newly_halted.push_back(ProcId::from_index(i));
            }
        }

        traces_.push_back(std::move(tr));
        return traces_.back();
    }

    /// Runs until every live processor halts or the round cap is reached.
    RunOutcome run_to_completion()
    {
        const Round cap = config_.effective_max_rounds();
        while (!finished() && round_ < cap) {
            step();
        }
        return outcome();
    }

    RunOutcome outcome() const
    {
        RunOutcome out;
        out.states = states_;
        out.truncated = !finished();
        out.traces = traces_;
        out.truth = truth_;
        out.chunks = chunks_;
        out.metrics = accumulate(traces_, config_.n);

        const std::vector<std::int8_t>* reference = nullptr;
        bool correct = true;
        out.all_halted = true;
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const ProcId id = ProcId::from_index(i);
            if (crashed_[i]) {
                out.crashed.push_back(id);
                continue;
            }
            if (states_[i].phase != Phase::Halted) {
                out.all_halted = false;
                continue;
            }
            out.halted.push_back(id);
            const auto& res = states_[i].results;
            for (std::size_t j = 0; j < res.size(); ++j) {
                if (res[j] != static_cast<std::int8_t>(chunk_truth_[j])) {
                    correct = false;
                    break;
                }
            }
            if (reference == nullptr) {
                reference = &res;
            } else if (res != *reference) {
                ++out.disagreement_events;
            }
        }
        out.all_correct = correct && !out.halted.empty();
        out.agreement = out.disagreement_events == 0 && !out.halted.empty();
        return out;
    }

private:
    ExperimentConfig config_;
    AdversaryInput adversary_;
    ChunkMap chunks_;
    Thresholds thresholds_;
    TripleLedger ledger_;
    std::vector<ProcessorState> states_;
    std::vector<Rng> rngs_;
    std::vector<bool> crashed_;
    std::vector<std::uint64_t> delivered_profess_;
    std::vector<std::vector<Message>> inboxes_;
    std::vector<std::size_t> active_;
    std::vector<std::uint8_t> truth_;
    std::vector<std::uint8_t> chunk_truth_;
    std::vector<RoundTrace> traces_;
    Round round_ = 0;
};

inline RunOutcome run(const ExperimentConfig& config)
{
    World world(config);
    return world.run_to_completion();
}

inline RunRecord to_record(const ExperimentConfig& config, const RunOutcome& out)
{
    RunRecord r;
    r.seed = config.seed;
    r.n = config.n;
    r.t = config.t;
    r.model = config.model_label();
    r.metrics = out.metrics;
    r.all_correct = out.all_correct;
    r.agreement = out.agreement;
    r.all_halted = out.all_halted;
    r.truncated = out.truncated;
    r.H = config.H;
    r.K = config.K;
    return r;
}

}  // namespace daks
