#pragma once

// Knowledge arrays R_i[1..n] as bitsets over a run-wide triple registry.
//
// Every triple produced in a run is registered once in a TripleLedger and
// identified by its registration index. A processor's knowledge is then the
// set of triple ids it has seen, kept as a bitset plus per-task value counts,
// so set union is a word-wise OR and |R_i[j]| is O(1).

#include "daks/types.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace daks {

using TripleId = std::uint32_t;

/// Append-only registry of every triple produced during a run.
class TripleLedger {
public:
    explicit TripleLedger(std::size_t task_count) : task_count_(task_count) {}

    std::size_t task_count() const noexcept { return task_count_; }
    std::size_t size() const noexcept { return triples_.size(); }

    /// Registers a triple for `task`. An executor produces at most one triple
    /// per round, so its rounds must strictly increase.
    TripleId add(TaskId task, ResultTriple triple)
    {
        if (task.value == 0 || task.index() >= task_count_) {
            throw std::out_of_range("TripleLedger::add: task id out of range");
        }
        if (triple.value > 1) {
            throw std::invalid_argument("TripleLedger::add: value must be a bit");
        }
        const auto exec = triple.executor.index();
        if (exec >= last_round_.size()) {
            last_round_.resize(exec + 1, 0);
        }
        if (triple.round <= last_round_[exec]) {
            throw std::logic_error("TripleLedger::add: executor already produced a triple in this or a later round");
        }
        last_round_[exec] = triple.round;
        codes_.push_back(static_cast<std::uint32_t>(task.index() << 1) | triple.value);
        triples_.push_back(triple);
        return static_cast<TripleId>(triples_.size() - 1);
    }

    TaskId task_of(TripleId id) const { return TaskId::from_index(codes_.at(id) >> 1); }
    const ResultTriple& triple(TripleId id) const { return triples_.at(id); }

    /// Packed (task index << 1 | value), unchecked; used by merge loops.
    std::uint32_t code(TripleId id) const noexcept { return codes_[id]; }

private:
    std::size_t task_count_;
    std::vector<std::uint32_t> codes_;
    std::vector<ResultTriple> triples_;
    std::vector<Round> last_round_;
};

class KnowledgeArray {
public:
    explicit KnowledgeArray(std::size_t task_count) : zeros_(task_count, 0), ones_(task_count, 0) {}

    std::size_t task_count() const noexcept { return zeros_.size(); }
    std::size_t total() const noexcept { return total_; }

    std::uint32_t size(TaskId task) const { return zeros_.at(task.index()) + ones_.at(task.index()); }
    std::uint32_t zeros(TaskId task) const { return zeros_.at(task.index()); }
    std::uint32_t ones(TaskId task) const { return ones_.at(task.index()); }

    std::uint32_t min_size() const noexcept
    {
        std::uint32_t m = UINT32_MAX;
        for (std::size_t j = 0; j < zeros_.size(); ++j) {
            m = std::min(m, zeros_[j] + ones_[j]);
        }
        return zeros_.empty() ? 0 : m;
    }

    /// True iff every task holds at least `needed` triples.
    bool all_at_least(std::uint32_t needed) const noexcept
    {
        for (std::size_t j = 0; j < zeros_.size(); ++j) {
            if (zeros_[j] + ones_[j] < needed) {
                return false;
            }
        }
        return true;
    }

    bool contains(TripleId id) const noexcept
    {
        const auto w = id >> 6;
        return w < bits_.size() && ((bits_[w] >> (id & 63)) & 1U);
    }

    /// Adds one triple; returns false if it was already known.
    bool insert(TripleId id, const TripleLedger& ledger)
    {
        const auto w = id >> 6;
        if (w >= bits_.size()) {
            bits_.resize(w + 1, 0);
        }
        const std::uint64_t mask = std::uint64_t{1} << (id & 63);
        if (bits_[w] & mask) {
            return false;
        }
        bits_[w] |= mask;
        count(ledger.code(id));
        return true;
    }

    /// Set union with `other`; returns the number of newly learned triples.
    std::size_t merge(const KnowledgeArray& other, const TripleLedger& ledger)
    {
        if (other.task_count() != task_count()) {
            throw std::invalid_argument("KnowledgeArray::merge: task count mismatch");
        }
        if (other.bits_.size() > bits_.size()) {
            bits_.resize(other.bits_.size(), 0);
        }
        std::size_t learned = 0;
        for (std::size_t w = 0; w < other.bits_.size(); ++w) {
            std::uint64_t fresh = other.bits_[w] & ~bits_[w];
            if (fresh == 0) {
                continue;
            }
            bits_[w] |= fresh;
            while (fresh != 0) {
                const auto b = static_cast<unsigned>(std::countr_zero(fresh));
                fresh &= fresh - 1;
                count(ledger.code(static_cast<TripleId>((w << 6) | b)));
                ++learned;
            }
        }
        return learned;
    }

    bool subset_of(const KnowledgeArray& other) const noexcept
    {
        for (std::size_t w = 0; w < bits_.size(); ++w) {
            const std::uint64_t theirs = w < other.bits_.size() ? other.bits_[w] : 0;
            if (bits_[w] & ~theirs) {
                return false;
            }
        }
        return true;
    }

    /// Materializes R_i[task] as triples, ordered by id.
    std::vector<ResultTriple> triples(TaskId task, const TripleLedger& ledger) const
    {
        std::vector<ResultTriple> out;
        for_each_id([&](TripleId id) {
            if (ledger.task_of(id) == task) {
                out.push_back(ledger.triple(id));
            }
        });
        return out;
    }

    std::vector<TripleId> ids() const
    {
        std::vector<TripleId> out;
        out.reserve(total_);
        for_each_id([&](TripleId id) { out.push_back(id); });
        return out;
    }

    friend bool operator==(const KnowledgeArray& a, const KnowledgeArray& b) noexcept
    {
        return a.total_ == b.total_ && a.subset_of(b) && b.subset_of(a);
    }

private:
    template <class F>
    void for_each_id(F&& f) const
    {
        for (std::size_t w = 0; w < bits_.size(); ++w) {
            std::uint64_t word = bits_[w];
            while (word != 0) {
                const auto b = static_cast<unsigned>(std::countr_zero(word));
                word &= word - 1;
                f(static_cast<TripleId>((w << 6) | b));
            }
        }
    }

    void count(std::uint32_t code) noexcept
    {
        const auto j = code >> 1;
        if (code & 1U) {
            ++ones_[j];
        } else {
            ++zeros_[j];
        }
        ++total_;
    }

    std::vector<std::uint64_t> bits_;
    std::vector<std::uint32_t> zeros_;
    std::vector<std::uint32_t> ones_;
    std::size_t total_ = 0;
};

/// Value-semantic handle over a KnowledgeArray with copy-on-write, so message
/// payloads can share the sender's array until the sender next changes it.
class Knowledge {
public:
    explicit Knowledge(std::size_t task_count) : data_(std::make_shared<KnowledgeArray>(task_count)) {}

    const KnowledgeArray& get() const noexcept { return *data_; }
    const KnowledgeArray* operator->() const noexcept { return data_.get(); }

    std::shared_ptr<const KnowledgeArray> snapshot() const noexcept { return data_; }

    KnowledgeArray& mutate()
    {
        if (data_.use_count() > 1) {
            data_ = std::make_shared<KnowledgeArray>(*data_);
        }
        return *data_;
    }

private:
    std::shared_ptr<KnowledgeArray> data_;
};

}  // namespace daks
