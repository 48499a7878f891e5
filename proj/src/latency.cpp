#include "ixy/latency.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "ixy/checked.hpp"
#include "ixy/error.hpp"

namespace ixy {

std::size_t nearest_rank(std::size_t n, Quantile q) {
    if (q.den == 0 || q.num > q.den) {
        throw Error(ErrorKind::invalid_argument, fmt::format("quantile {}/{} outside [0, 1]", q.num, q.den));
    }
    const uint128 scaled = static_cast<uint128>(n) * q.num;
    auto rank = static_cast<std::size_t>((scaled + q.den - 1) / q.den);
    return std::max<std::size_t>(rank, 1);
}

LatencyDistribution::LatencyDistribution(std::vector<std::uint64_t> samples)
    : samples_(std::move(samples)), sorted_(false) {}

void LatencyDistribution::add(std::uint64_t sample) {
    if (sorted_ && !samples_.empty() && sample < samples_.back()) {
        sorted_ = false;
    }
    samples_.push_back(sample);
}

void LatencyDistribution::require_samples() const {
    if (samples_.empty()) {
        throw Error(ErrorKind::invalid_argument, "latency distribution is empty");
    }
}

const std::vector<std::uint64_t>& LatencyDistribution::sorted() const {
    if (!sorted_) {
        std::sort(samples_.begin(), samples_.end());
        sorted_ = true;
    }
    return samples_;
}

std::uint64_t LatencyDistribution::percentile(Quantile q) const {
    require_samples();
    const std::size_t rank = nearest_rank(samples_.size(), q);
    return sorted()[rank - 1];
}

std::uint64_t LatencyDistribution::min() const {
    require_samples();
    return sorted().front();
}

std::uint64_t LatencyDistribution::max() const {
    require_samples();
    return sorted().back();
}

double LatencyDistribution::ccdf(std::uint64_t x) const {
    require_samples();
    const auto& s = sorted();
    const auto below = std::lower_bound(s.begin(), s.end(), x) - s.begin();
    return static_cast<double>(s.size() - static_cast<std::size_t>(below)) / static_cast<double>(s.size());
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> LatencyDistribution::histogram(std::uint64_t bin) const {
    if (bin == 0) {
        throw Error(ErrorKind::invalid_argument, "histogram bin width must be positive");
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (const std::uint64_t v : sorted()) {
        const std::uint64_t lower = v / bin * bin;
        if (out.empty() || out.back().first != lower) {
            out.emplace_back(lower, 0);
        }
        ++out.back().second;
    }
    return out;
}

} // namespace ixy
