#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace ixy {

// A percentile as an exact fraction, e.g. {999999, 1000000} for p99.9999.
struct Quantile {
    std::uint64_t num;
    std::uint64_t den;
};

inline constexpr Quantile q50{50, 100};
inline constexpr Quantile q90{90, 100};
inline constexpr Quantile q99{99, 100};
inline constexpr Quantile q999{999, 1000};
inline constexpr Quantile q9999{9999, 10000};
inline constexpr Quantile q99999{99999, 100000};
inline constexpr Quantile q999999{999999, 1000000};

/**
 * Latency samples (any unit, picoseconds in the bench) with nearest-rank
 * percentiles: the value at rank ceil(N * num / den), 1-based, in sorted order.
 * Queries on an empty distribution throw invalid_argument.
 */
class LatencyDistribution {
public:
    LatencyDistribution() = default;
    explicit LatencyDistribution(std::vector<std::uint64_t> samples);

    void add(std::uint64_t sample);
    void reserve(std::size_t n) { samples_.reserve(n); }

    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }

    [[nodiscard]] std::uint64_t percentile(Quantile q) const;
    [[nodiscard]] std::uint64_t min() const;
    [[nodiscard]] std::uint64_t max() const;
    // Fraction of samples >= x.
    [[nodiscard]] double ccdf(std::uint64_t x) const;
    // (bucket lower bound, count) for every non-empty bucket of width `bin`.
    [[nodiscard]] std::vector<std::pair<std::uint64_t, std::uint64_t>> histogram(std::uint64_t bin) const;
    [[nodiscard]] const std::vector<std::uint64_t>& sorted() const;

private:
    void require_samples() const;

    mutable std::vector<std::uint64_t> samples_;
    mutable bool sorted_ = true;
};

// Rank used for quantile q of n samples (1-based); exposed for tests.
[[nodiscard]] std::size_t nearest_rank(std::size_t n, Quantile q);

} // namespace ixy
