#include "daks/protocol.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace daks;

namespace {

// Registers `count` distinct triples of `value` for `task` and inserts them.
void fill(KnowledgeArray& k, TripleLedger& ledger, TaskId task, std::uint32_t count, std::uint8_t value,
          Round& next_round)
{
    for (std::uint32_t c = 0; c < count; ++c) {
        const auto id = ledger.add(task, ResultTriple{value, ProcId{9}, next_round++});
        k.insert(id, ledger);
    }
}

Message profess_from(ProcId sender, std::shared_ptr<const KnowledgeArray> payload)
{
    return Message{MessageKind::Profess, sender, std::move(payload)};
}

}  // namespace

TEST(Plurality, StrictMajority)
{
    const std::vector<ResultTriple> t = {{0, ProcId{1}, 1}, {0, ProcId{2}, 1}, {1, ProcId{3}, 1}};
    EXPECT_EQ(plurality(t), 0);
}

TEST(Plurality, Singleton)
{
    const std::vector<ResultTriple> t = {{1, ProcId{5}, 2}};
    EXPECT_EQ(plurality(t), 1);
}

TEST(Plurality, TieGoesToZero)
{
    const std::vector<ResultTriple> t = {{0, ProcId{1}, 1}, {1, ProcId{2}, 1}};
    EXPECT_EQ(plurality(t), 0);
    EXPECT_EQ(plurality(3u, 3u), 0);
}

TEST(Plurality, DuplicatesCountOnce)
{
    const std::vector<ResultTriple> t = {{1, ProcId{1}, 1}, {1, ProcId{1}, 1}, {1, ProcId{1}, 1},
                                         {0, ProcId{2}, 1}, {0, ProcId{3}, 1}};
    EXPECT_EQ(plurality(t), 0);
}

TEST(Plurality, EmptyIsAnError)
{
    const std::vector<ResultTriple> none;
    EXPECT_THROW(plurality(none), ProtocolError);
    try {
        plurality(0u, 0u);
    } catch (const ProtocolError& e) {
        EXPECT_STREQ(e.what(), "no results for task");
    }
}

TEST(Thresholds, FromConstants)
{
    const auto th = Thresholds::make(2.0, 8.0, 16);
    EXPECT_EQ(th.results_needed, 32u);
    EXPECT_EQ(th.profess_needed, 8u);
    EXPECT_EQ(Thresholds::make(2.0, 8.0, 1024).results_needed, 80u);
    EXPECT_EQ(Thresholds::make(2.0, 8.0, 1024).profess_needed, 20u);
    EXPECT_EQ(Thresholds::make(2.0, 8.0, 1000).results_needed, 80u);
    EXPECT_EQ(Thresholds::make(1.5, 0.1, 256).results_needed, 1u);
    EXPECT_EQ(Thresholds::make(1.5, 0.1, 256).profess_needed, 12u);
}

TEST(Thresholds, FloorRule)
{
    const auto one = Thresholds::make(2.0, 8.0, 1);
    EXPECT_EQ(one.results_needed, 1u);
    EXPECT_EQ(one.profess_needed, 1u);
    const auto two = Thresholds::make(2.0, 8.0, 2);
    EXPECT_EQ(two.results_needed, 8u);
    EXPECT_EQ(two.profess_needed, 2u);
    EXPECT_THROW(Thresholds::make(0.0, 8.0, 4), std::invalid_argument);
    EXPECT_THROW(Thresholds::make(2.0, -1.0, 4), std::invalid_argument);
}

TEST(EnlightenmentReady, BoundaryMet)
{
    const std::size_t n = 16;
    const auto th = Thresholds::make(2.0, 8.0, n);
    TripleLedger ledger(n);
    KnowledgeArray k(n);
    Round r = 1;
    for (std::size_t j = 0; j < n; ++j) {
        fill(k, ledger, TaskId::from_index(j), 32, 0, r);
    }
    EXPECT_TRUE(enlightenment_ready(k, th));
}

TEST(EnlightenmentReady, MinimumGoverns)
{
    const std::size_t n = 16;
    const auto th = Thresholds::make(2.0, 8.0, n);
    TripleLedger ledger(n);
    KnowledgeArray k(n);
    Round r = 1;
    fill(k, ledger, TaskId{1}, 31, 1, r);
    for (std::size_t j = 1; j < n; ++j) {
        fill(k, ledger, TaskId::from_index(j), 40, 0, r);
    }
    EXPECT_EQ(k.min_size(), 31u);
    EXPECT_FALSE(enlightenment_ready(k, th));
}

TEST(EnlightenmentReady, SingleProcessorFloor)
{
    const auto th = Thresholds::make(2.0, 8.0, 1);
    TripleLedger ledger(1);
    KnowledgeArray k(1);
    EXPECT_FALSE(enlightenment_ready(k, th));
    Round r = 1;
    fill(k, ledger, TaskId{1}, 1, 0, r);
    EXPECT_TRUE(enlightenment_ready(k, th));
}

TEST(ShareTarget, SingleProcessor)
{
    Rng rng(99);
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(choose_share_target(rng, 1), ProcId{1});
    }
}

TEST(ShareTarget, UniformWithinFiveSigma)
{
    const std::size_t n = 1024;
    const int draws = 1'000'000;
    std::vector<int> hits(n, 0);
    Rng rng(2718);
    for (int d = 0; d < draws; ++d) {
        const auto q = choose_share_target(rng, n);
        ASSERT_GE(q.value, 1u);
        ASSERT_LE(q.value, n);
        ++hits[q.index()];
    }
    const double expect = static_cast<double>(draws) / n;
    const double sigma = std::sqrt(draws * (1.0 / n) * (1.0 - 1.0 / n));
    double chi2 = 0.0;
    for (int h : hits) {
        EXPECT_LE(std::abs(h - expect), 5.0 * sigma);
        chi2 += (h - expect) * (h - expect) / expect;
    }
    // 1023 degrees of freedom: mean 1023, sd ~45.2; allow 5 sd.
    EXPECT_LT(chi2, 1023.0 + 5.0 * std::sqrt(2.0 * 1023.0));
}

TEST(ShareTarget, ReproducibleSequence)
{
    // Frozen from tests/oracles/rng_oracle.py.
    const std::vector<std::uint32_t> golden = {6, 7, 12, 9, 10, 4, 1, 12, 8, 4};
    for (int rep = 0; rep < 2; ++rep) {
        Rng rng(12345);
        for (auto g : golden) {
            EXPECT_EQ(choose_share_target(rng, 16).value, g);
        }
    }
}

TEST(ProfessTargets, FanoutAtEllZero)
{
    Rng rng(5);
    const auto p = choose_profess_targets(rng, 16, 0);
    EXPECT_EQ(p.draws, 4u);
    EXPECT_GE(p.targets.size(), 1u);
    EXPECT_LE(p.targets.size(), 4u);
}

TEST(ProfessTargets, BoundedByPopulation)
{
    Rng rng(6);
    const auto p = choose_profess_targets(rng, 16, 3);
    EXPECT_EQ(p.draws, 32u);
    EXPECT_GE(p.targets.size(), 1u);
    EXPECT_LE(p.targets.size(), 16u);
    EXPECT_TRUE(std::is_sorted(p.targets.begin(), p.targets.end()));
}

TEST(ProfessTargets, GoldenSet)
{
    // Frozen from tests/oracles/rng_oracle.py (n = 256, ell = 2, seed 2024).
    const std::vector<std::uint32_t> golden = {1,   2,   13,  27,  36,  39,  60,  68,  69,  86,
                                               87,  110, 118, 120, 137, 146, 155, 157, 165, 173,
                                               175, 191, 193, 204, 223, 240, 242, 246, 248};
    for (int rep = 0; rep < 2; ++rep) {
        Rng rng(2024);
        const auto p = choose_profess_targets(rng, 256, 2);
        EXPECT_EQ(p.draws, 32u);
        std::vector<std::uint32_t> ids;
        for (auto q : p.targets) {
            ids.push_back(q.value);
        }
        EXPECT_EQ(ids, golden);
    }
}

TEST(ProfessTargets, DrawCountCapped)
{
    EXPECT_EQ(profess_draw_count(16, 0), 4u);
    EXPECT_EQ(profess_draw_count(16, 4), 64u);
    EXPECT_EQ(profess_draw_count(16, 5), 64u);   // n * log n = 64
    EXPECT_EQ(profess_draw_count(16, 200), 64u);
    EXPECT_EQ(profess_draw_count(1, 0), 1u);
    EXPECT_EQ(profess_draw_count(1, 3), 1u);
}

TEST(ReceivePhase, EmptyInboxIsIdentity)
{
    TripleLedger ledger(4);
    auto s = ProcessorState::initial(ProcId{2}, 4);
    s.prof_ctr = 3;
    const auto before = s.knowledge.snapshot();
    const auto after = receive_phase(s, {}, ledger);
    EXPECT_EQ(after.prof_ctr, 3u);
    EXPECT_EQ(after.knowledge.snapshot(), before);
    EXPECT_EQ(after.phase, Phase::Worker);
}

TEST(ReceivePhase, ProfessCounterAndUnion)
{
    TripleLedger ledger(4);
    KnowledgeArray a(4), b(4);
    a.insert(ledger.add(TaskId{1}, {1, ProcId{3}, 1}), ledger);
    b.insert(ledger.add(TaskId{2}, {0, ProcId{4}, 1}), ledger);
    b.insert(ledger.add(TaskId{2}, {1, ProcId{4}, 2}), ledger);
    std::vector<Message> inbox = {profess_from(ProcId{3}, std::make_shared<KnowledgeArray>(a)),
                                  profess_from(ProcId{4}, std::make_shared<KnowledgeArray>(b))};
    const auto s = receive_phase(ProcessorState::initial(ProcId{1}, 4), inbox, ledger);
    EXPECT_EQ(s.prof_ctr, 2u);
    EXPECT_EQ(s.knowledge->size(TaskId{1}), 1u);
    EXPECT_EQ(s.knowledge->size(TaskId{2}), 2u);
    EXPECT_EQ(s.knowledge->total(), 3u);
}

TEST(ReceivePhase, ShareDoesNotCount)
{
    TripleLedger ledger(2);
    auto payload = std::make_shared<KnowledgeArray>(2);
    std::vector<Message> inbox = {Message{MessageKind::Share, ProcId{2}, payload}};
    const auto s = receive_phase(ProcessorState::initial(ProcId{1}, 2), inbox, ledger);
    EXPECT_EQ(s.prof_ctr, 0u);
}

TEST(ReceivePhase, KnownTripleIsIdempotent)
{
    TripleLedger ledger(2);
    auto s = ProcessorState::initial(ProcId{1}, 2);
    const auto id = ledger.add(TaskId{1}, {0, ProcId{1}, 1});
    s.knowledge.mutate().insert(id, ledger);
    KnowledgeArray p(2);
    p.insert(id, ledger);
    std::vector<Message> inbox = {Message{MessageKind::Share, ProcId{2}, std::make_shared<KnowledgeArray>(p)}};
    const auto after = receive_phase(s, inbox, ledger);
    EXPECT_EQ(after.knowledge->size(TaskId{1}), 1u);
}

TEST(ReceivePhase, HaltedIsRejected)
{
    TripleLedger ledger(2);
    auto s = ProcessorState::initial(ProcId{1}, 2);
    s.phase = Phase::Halted;
    EXPECT_THROW(receive_phase(s, {}, ledger), ProtocolError);
}

TEST(ComputePhase, NoiseFreeMatchesTruth)
{
    const std::size_t n = 8;
    TripleLedger ledger(n);
    const std::vector<std::uint8_t> truth = {1, 0, 1, 1, 0, 0, 1, 0};
    const auto th = Thresholds::make(2.0, 1e6, n);
    Rng rng(11);
    auto s = ProcessorState::initial(ProcId{1}, n);
    for (int i = 0; i < 500; ++i) {
        auto out = compute_phase(std::move(s), rng, truth, 0.0, th, ledger);
        s = std::move(out.state);
        ASSERT_TRUE(out.performed_task);
    }
    for (TripleId id = 0; id < ledger.size(); ++id) {
        EXPECT_EQ(ledger.triple(id).value, truth[ledger.task_of(id).index()]);
    }
}

TEST(ComputePhase, FullyBogusComplements)
{
    const std::size_t n = 8;
    TripleLedger ledger(n);
    const std::vector<std::uint8_t> truth = {1, 0, 1, 1, 0, 0, 1, 0};
    const auto th = Thresholds::make(2.0, 1e6, n);
    Rng rng(12);
    auto s = ProcessorState::initial(ProcId{1}, n);
    for (int i = 0; i < 500; ++i) {
        s = compute_phase(std::move(s), rng, truth, 1.0, th, ledger).state;
    }
    for (TripleId id = 0; id < ledger.size(); ++id) {
        EXPECT_EQ(ledger.triple(id).value, 1 - truth[ledger.task_of(id).index()]);
    }
}

TEST(ComputePhase, BogusFrequency)
{
    const std::size_t n = 4;
    TripleLedger ledger(n);
    const std::vector<std::uint8_t> truth = {0, 1, 0, 1};
    const auto th = Thresholds::make(2.0, 1e9, n);
    Rng rng(13);
    auto s = ProcessorState::initial(ProcId{1}, n);
    const int runs = 100'000;
    int bogus = 0;
    for (int i = 0; i < runs; ++i) {
        s = compute_phase(std::move(s), rng, truth, 0.3, th, ledger).state;
        const auto id = static_cast<TripleId>(ledger.size() - 1);
        bogus += ledger.triple(id).value != truth[ledger.task_of(id).index()];
    }
    EXPECT_NEAR(static_cast<double>(bogus) / runs, 0.3, 0.01);
}

TEST(ComputePhase, EnlightensWithPluralityResults)
{
    const std::size_t n = 2;
    TripleLedger ledger(n);
    const std::vector<std::uint8_t> truth = {1, 0};
    const auto th = Thresholds::make(2.0, 3.0, n);  // results_needed = 3
    ASSERT_EQ(th.results_needed, 3u);
    auto s = ProcessorState::initial(ProcId{1}, n);
    // Task 1 starts at {1,1,0}, task 2 at {0,0}; noise-free work on task 2 enlightens.
    Round r = 100;
    auto& k = s.knowledge.mutate();
    fill(k, ledger, TaskId{1}, 2, 1, r);
    fill(k, ledger, TaskId{1}, 1, 0, r);
    fill(k, ledger, TaskId{2}, 2, 0, r);
    Rng rng(3);
    int steps = 0;
    while (s.phase == Phase::Worker && steps < 100) {
        auto out = compute_phase(std::move(s), rng, truth, 0.0, th, ledger);
        s = std::move(out.state);
        ++steps;
        if (out.became_enlightened) {
            break;
        }
    }
    ASSERT_EQ(s.phase, Phase::Enlightened);
    EXPECT_TRUE(s.results_complete());
    EXPECT_EQ(s.results[0], 1);
    EXPECT_EQ(s.results[1], 0);
    EXPECT_EQ(s.ell, 0u);
}

TEST(ComputePhase, EnlightenedDoesNoTaskWork)
{
    TripleLedger ledger(2);
    const std::vector<std::uint8_t> truth = {0, 0};
    auto s = ProcessorState::initial(ProcId{1}, 2);
    s.phase = Phase::Enlightened;
    s.results = {0, 0};
    s.round = 7;
    Rng rng(1);
    const auto out = compute_phase(s, rng, truth, 0.0, Thresholds::make(2, 8, 2), ledger, 5);
    EXPECT_FALSE(out.performed_task);
    EXPECT_EQ(out.work_units, 1u);
    EXPECT_EQ(out.state.round, 8u);
    EXPECT_EQ(ledger.size(), 0u);
}

TEST(ComputePhase, WorkerChargesChunkCost)
{
    TripleLedger ledger(2);
    const std::vector<std::uint8_t> truth = {0, 0};
    Rng rng(1);
    const auto out = compute_phase(ProcessorState::initial(ProcId{1}, 2), rng, truth, 0.0,
                                   Thresholds::make(2, 8, 2), ledger, 4);
    EXPECT_EQ(out.work_units, 4u);
    EXPECT_EQ(out.state.round, 1u);
}

TEST(SendPhase, WorkerSendsOneShare)
{
    Rng rng(21);
    const auto out = send_phase(ProcessorState::initial(ProcId{3}, 16), rng, 16);
    ASSERT_EQ(out.outbox.size(), 1u);
    EXPECT_EQ(out.outbox[0].message.kind, MessageKind::Share);
    EXPECT_EQ(out.outbox[0].message.sender, ProcId{3});
    EXPECT_EQ(out.draws, 0u);
    EXPECT_EQ(out.state.ell, 0u);
}

TEST(SendPhase, EnlightenedProfessesAndDoubles)
{
    auto s = ProcessorState::initial(ProcId{3}, 16);
    s.phase = Phase::Enlightened;
    s.results.assign(16, 0);
    Rng rng(22);
    const auto out = send_phase(s, rng, 16);
    EXPECT_LE(out.outbox.size(), 4u);
    EXPECT_GE(out.outbox.size(), 1u);
    EXPECT_EQ(out.draws, 4u);
    EXPECT_EQ(out.state.ell, 1u);
    for (const auto& e : out.outbox) {
        EXPECT_EQ(e.message.kind, MessageKind::Profess);
    }
}

TEST(SendPhase, HaltedIsRejected)
{
    auto s = ProcessorState::initial(ProcId{1}, 4);
    s.phase = Phase::Halted;
    Rng rng(1);
    EXPECT_THROW(send_phase(s, rng, 4), ProtocolError);
    TripleLedger ledger(4);
    const std::vector<std::uint8_t> truth(4, 0);
    EXPECT_THROW(compute_phase(s, rng, truth, 0.0, Thresholds::make(2, 8, 4), ledger), ProtocolError);
}

TEST(SendPhase, PayloadIsASnapshot)
{
    const std::size_t n = 4;
    TripleLedger ledger(n);
    const std::vector<std::uint8_t> truth(n, 0);
    Rng rng(5);
    auto sent = send_phase(ProcessorState::initial(ProcId{1}, n), rng, n);
    const auto payload = sent.outbox[0].message.payload;
    auto later = compute_phase(std::move(sent.state), rng, truth, 0.0, Thresholds::make(2, 8, n), ledger);
    EXPECT_EQ(payload->total(), 0u);
    EXPECT_EQ(later.state.knowledge->total(), 1u);
}

TEST(HaltCheck, Boundaries)
{
    const auto th = Thresholds::make(2.0, 8.0, 16);
    auto s = ProcessorState::initial(ProcId{1}, 16);
    EXPECT_FALSE(halt_check(s, th));
    s.prof_ctr = th.profess_needed - 1;
    EXPECT_FALSE(halt_check(s, th));
    s.prof_ctr = th.profess_needed;
    EXPECT_TRUE(halt_check(s, th));
}
