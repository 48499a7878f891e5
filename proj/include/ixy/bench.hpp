#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ixy/checked.hpp"
#include "ixy/device_model.hpp"
#include "ixy/latency.hpp"

namespace ixy {

// Virtual cost of the harness loop, in picoseconds. Device costs go to the
// model NICs, the rest is charged by the forwarding loop itself.
struct BenchCosts {
    std::uint64_t call = 20'000;
    std::uint64_t per_packet = 20'000;
    std::uint64_t mmio_read = 100'000;
    std::uint64_t mmio_write = 100'000;
    std::uint64_t descriptor = 10'000;

    [[nodiscard]] CostModel device() const noexcept { return {mmio_read, mmio_write, descriptor}; }
};

// Two 10 GbE line-rate streams of minimum-size frames.
inline constexpr std::uint64_t saturating_pps = 2 * 14'880'000;

struct BenchConfig {
    std::string scenario = "run";
    std::size_t batch = 32;
    std::uint32_t ring = 512;
    // Aggregate over both directions; even arrivals enter device A, odd ones B.
    std::uint64_t offered_pps = saturating_pps;
    double secs = 0.01;
    std::size_t frame_size = 60;
    std::size_t touch_offset = 48;
    std::uint64_t seed = 1;
    BenchCosts costs;
    bool record_latency = true;
    bool access_log = false;

    [[nodiscard]] std::uint64_t offered_count() const;
};

struct BenchRecord {
    std::string scenario;
    std::size_t batch = 0;
    std::uint32_t ring = 0;
    std::uint64_t offered_pps = 0;
    double secs = 0;
    std::uint64_t offered = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t dev_drops = 0;
    std::uint64_t app_drops = 0;
    // Picoseconds from arrival on the wire to transmission by the other device.
    LatencyDistribution latency;

    // Steady-state window: from 10% of the offered interval until the last arrival.
    std::uint64_t window_ps = 0;
    std::uint64_t window_forwarded = 0;
    std::uint64_t window_tail_writes = 0;

    std::size_t pool_capacity = 0;
    // Largest number of buffers of one pool outside that pool at any point.
    std::size_t peak_outside_pool = 0;
    std::uint64_t virtual_ps = 0;
    std::uint64_t model_tail_writes = 0;

    [[nodiscard]] double window_rate_pps() const;
};

// Runs the two-device forwarder in virtual time. Deterministic for a config.
template <class Arith>
BenchRecord run_scenario_with(const BenchConfig& config);
BenchRecord run_scenario(const BenchConfig& config);

// One record per distinct size, in input order. Sizes outside [1, 256] throw.
std::vector<BenchRecord> sweep_batches(const std::vector<std::size_t>& sizes, const BenchConfig& base);

BenchRecord measure_latency(std::uint64_t pps, double secs, const BenchConfig& base);

// One loop iteration with both directions at a full batch, in picoseconds.
[[nodiscard]] std::uint64_t service_bound_ps(const BenchConfig& config);

struct OverflowResult {
    std::size_t batch = 0;
    double checked_mpps = 0;
    double unchecked_mpps = 0;
    double delta = 0;
    std::string note;
};

// (off - on) / off with the reporting rules: identical builds give exactly 0,
// negative values are clamped to 0 and annotated.
[[nodiscard]] OverflowResult overflow_delta(std::size_t batch, double checked_mpps, double unchecked_mpps,
                                            bool identical);

// Wall-clock rate of the forwarding loop instantiated with `On` vs `Off`,
// best of `repeats` interleaved runs each.
template <class On, class Off>
OverflowResult overflow_cost_with(std::size_t batch, std::size_t repeats, const BenchConfig& base);
OverflowResult overflow_cost(std::size_t batch = 8, std::size_t repeats = 5, const BenchConfig& base = {});

void export_csv(std::ostream& out, const std::vector<BenchRecord>& records);
void export_csv(const std::string& path, const std::vector<BenchRecord>& records);
void export_histogram_csv(std::ostream& out, const LatencyDistribution& latency, std::uint64_t bin_ps);
void export_overflow_csv(std::ostream& out, const std::vector<OverflowResult>& results);

inline constexpr const char* bench_csv_header =
    "scenario,batch,ring,offered_pps,secs,forwarded,dev_drops,app_drops,p50,p90,p99,p999,p9999,p99999,p999999,max,"
    "unit";

// IXY_SEED when set and numeric, otherwise `fallback`.
[[nodiscard]] std::uint64_t seed_from_env(std::uint64_t fallback);

// Parses "1,2,4" into sizes; throws invalid_argument.
[[nodiscard]] std::vector<std::size_t> parse_sizes(const std::string& text);

} // namespace ixy
