#pragma once

#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace daks {

using Round = std::uint32_t;

/// Processor identifier, 1-based as in the model (P = [n]).
struct ProcId {
    std::uint32_t value = 1;

    constexpr std::size_t index() const noexcept { return value - 1; }
    static constexpr ProcId from_index(std::size_t i) noexcept { return ProcId{static_cast<std::uint32_t>(i + 1)}; }
    friend constexpr auto operator<=>(ProcId, ProcId) = default;
};

/// Chunk-task identifier in [1, n]. With t == n every chunk holds one task.
struct TaskId {
    std::uint32_t value = 1;

    constexpr std::size_t index() const noexcept { return value - 1; }
    static constexpr TaskId from_index(std::size_t i) noexcept { return TaskId{static_cast<std::uint32_t>(i + 1)}; }
    friend constexpr auto operator<=>(TaskId, TaskId) = default;
};

/// One task execution: the value computed by `executor` in `round`.
struct ResultTriple {
    std::uint8_t value = 0;
    ProcId executor;
    Round round = 1;

    friend constexpr auto operator<=>(const ResultTriple&, const ResultTriple&) = default;
};

enum class Phase : std::uint8_t { Worker, Enlightened, Halted };

constexpr std::string_view to_string(Phase p) noexcept
{
    switch (p) {
    case Phase::Worker: return "worker";
    case Phase::Enlightened: return "enlightened";
    case Phase::Halted: return "halted";
    }
    return "?";
}

/// ceil(log2 n); 0 for n == 1.
constexpr std::uint32_t ceil_log2(std::uint64_t n) noexcept
{
    return n <= 1 ? 0 : static_cast<std::uint32_t>(std::bit_width(n - 1));
}

/// The "log n" used for fanouts: ceil(log2 n), floored at 1.
constexpr std::uint32_t log_factor(std::uint64_t n) noexcept
{
    const auto l = ceil_log2(n);
    return l == 0 ? 1 : l;
}

struct Thresholds {
    double H = 2.0;
    double K = 8.0;
    std::uint32_t results_needed = 1;  // max(1, ceil(K * ceil(log2 n)))
    std::uint32_t profess_needed = 1;  // max(1, ceil(H * ceil(log2 n)))

    static Thresholds make(double H, double K, std::uint64_t n)
    {
        if (!(H > 0.0) || !(K > 0.0)) {
            throw std::invalid_argument("Thresholds: H and K must be positive");
        }
        if (n == 0) {
            throw std::invalid_argument("Thresholds: n must be positive");
        }
        const double lg = ceil_log2(n);
        auto scaled = [lg](double c) {
            // Guard against 8.0 * 4 landing at 32.000000001.
            const double v = std::ceil(c * lg - 1e-9);
            return v < 1.0 ? std::uint32_t{1} : static_cast<std::uint32_t>(v);
        };
        return Thresholds{H, K, scaled(K), scaled(H)};
    }
};

inline constexpr double default_H = 2.0;
inline constexpr double default_K = 8.0;

}  // namespace daks
