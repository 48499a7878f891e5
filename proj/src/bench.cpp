#include "ixy/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>

#include <fmt/core.h>

#include "ixy/apps.hpp"
#include "ixy/checked.hpp"
#include "ixy/error.hpp"
#include "ixy/frames.hpp"
#include "ixy/ixgbe.hpp"
#include "ixy/ixgbe_regs.hpp"
#include "ixy/log.hpp"
#include "ixy/platform.hpp"

namespace ixy {

namespace {

constexpr std::uint64_t ps_per_sec = 1'000'000'000'000;

std::uint64_t arrival_offset(std::uint64_t k, std::uint64_t pps) {
    if (pps == 0) {
        return 0;
    }
    return static_cast<std::uint64_t>(static_cast<uint128>(k) * ps_per_sec / pps);
}

std::uint64_t tail_writes(const ModelNic& nic) {
    return nic.writes_of(regs::RDT(0)) + nic.writes_of(regs::TDT(0));
}

std::string format_ps(std::uint64_t ps) {
    return fmt::format("{}.{:03}", ps / 1000, ps % 1000);
}

} // namespace

std::uint64_t BenchConfig::offered_count() const {
    if (!(secs > 0)) {
        throw Error(ErrorKind::invalid_argument, "bench duration must be positive");
    }
    // Guard against 0.1 * 10 landing just below an integer.
    return static_cast<std::uint64_t>(std::floor(static_cast<long double>(offered_pps) * secs + 1e-6L));
}

double BenchRecord::window_rate_pps() const {
    if (window_ps == 0) {
        return 0;
    }
    return static_cast<double>(window_forwarded) * 1e12 / static_cast<double>(window_ps);
}

template <class Arith>
BenchRecord run_scenario_with(const BenchConfig& config) {
    if (config.batch < 1 || config.batch > 256) {
        throw Error(ErrorKind::invalid_argument, fmt::format("batch size {} outside [1, 256]", config.batch));
    }
    const std::uint64_t total = config.offered_count();

    auto clock = std::make_shared<VirtualClock>();
    Platform platform(clock);
    ModelConfig model;
    model.access_log = config.access_log;
    model.store_captures = false;
    model.costs = config.costs.device();
    model.link_capacity = std::size_t{1} << 20;
    model.seed = config.seed;
    const auto nic_a = platform.add_model(model);
    const auto nic_b = platform.add_model(model);
    DeviceHandle handle_a = platform.open_device("model:0");
    DeviceHandle handle_b = platform.open_device("model:1");
    DriverConfig driver;
    driver.ring_size = config.ring;
    driver.max_batch = config.batch;
    IxgbeDevice a(handle_a, 1, 1, driver);
    IxgbeDevice b(handle_b, 1, 1, driver);

    BenchRecord record;
    record.scenario = config.scenario;
    record.batch = config.batch;
    record.ring = config.ring;
    record.offered_pps = config.offered_pps;
    record.secs = config.secs;
    record.offered = total;
    record.pool_capacity = driver.effective_pool_capacity();
    if (config.record_latency) {
        record.latency.reserve(total);
    }

    const std::uint64_t t0 = clock->now();
    const auto arrival = [&](std::uint64_t k) { return t0 + arrival_offset(k, config.offered_pps); };

    // Frames from A's side leave through B and vice versa.
    SequenceTracker trackers[2];
    if (config.record_latency) {
        const auto sink = [&record, &trackers, &arrival](int direction) {
            return [&record, &trackers, &arrival, direction](std::span<const std::uint8_t> frame, std::uint64_t ts) {
                const std::uint64_t j = trackers[direction].next(read_sequence(frame));
                record.latency.add(ts - arrival(2 * j + static_cast<std::uint64_t>(direction)));
            };
        };
        nic_b->set_capture_sink(sink(0));
        nic_a->set_capture_sink(sink(1));
    }

    const FrameGenerator generators[2] = {FrameGenerator(config.seed, config.frame_size),
                                          FrameGenerator(config.seed + 1, config.frame_size)};
    std::vector<std::uint8_t> frame(config.frame_size);
    const auto& costs = config.costs;
    DirectionSummary ab;
    DirectionSummary ba;
    std::vector<PacketBuffer> bufs;
    bufs.reserve(config.batch);

    const std::uint64_t window_start = t0 + arrival_offset(total / 10, config.offered_pps);
    const std::uint64_t window_end = total == 0 ? t0 : arrival(total - 1);
    bool in_window = false;
    bool window_closed = total == 0;
    std::uint64_t start_writes = 0;
    std::uint64_t start_forwarded = 0;
    std::uint64_t start_time = 0;

    const auto observe = [&] {
        record.peak_outside_pool = std::max({record.peak_outside_pool, a.rx_pool(0)->outstanding(),
                                             b.rx_pool(0)->outstanding()});
    };
    const auto direction = [&](IxgbeDevice& rx, IxgbeDevice& tx, DirectionSummary& d) {
        const std::size_t n = forward_step<Arith>(rx, tx, bufs, config.batch, config.touch_offset, d, observe);
        clock->advance(costs.call);
        if (n != 0) {
            clock->advance(costs.call + n * costs.per_packet);
        }
        return n;
    };

    std::uint64_t k = 0;
    for (;;) {
        const std::uint64_t now = clock->now();
        if (!window_closed) {
            const auto snapshot = [&] {
                return std::pair{tail_writes(*nic_a) + tail_writes(*nic_b), ab.tx_packets + ba.tx_packets};
            };
            if (!in_window && now >= window_start) {
                std::tie(start_writes, start_forwarded) = snapshot();
                start_time = now;
                in_window = true;
            }
            if (in_window && now >= window_end) {
                const auto [writes, forwarded] = snapshot();
                record.window_tail_writes = writes - start_writes;
                record.window_forwarded = forwarded - start_forwarded;
                record.window_ps = now - start_time;
                window_closed = true;
            }
        }
        while (k < total && arrival(k) <= now) {
            const int side = static_cast<int>(k % 2);
            generators[side].fill(frame, static_cast<std::uint16_t>(k / 2));
            static_cast<void>((side == 0 ? nic_a : nic_b)->inject(frame, arrival(k)));
            ++k;
        }
        std::size_t work = nic_a->step(SIZE_MAX);
        work += nic_b->step(SIZE_MAX);
        work += direction(a, b, ab);
        work += direction(b, a, ba);
        if (work == 0) {
            if (k == total) {
                break;
            }
            clock->advance_to(arrival(k));
        }
    }

    const ModelCounters ca = nic_a->counters();
    const ModelCounters cb = nic_b->counters();
    record.forwarded = ca.tx_sent + cb.tx_sent;
    record.dev_drops = ca.rx_dropped + ca.link_drops + ca.rx_filtered + cb.rx_dropped + cb.link_drops + cb.rx_filtered;
    record.app_drops = ab.app_drops + ba.app_drops;
    record.virtual_ps = clock->now() - t0;
    record.model_tail_writes = tail_writes(*nic_a) + tail_writes(*nic_b);
    nic_a->set_capture_sink(nullptr);
    nic_b->set_capture_sink(nullptr);
    return record;
}

template BenchRecord run_scenario_with<CheckedArith>(const BenchConfig&);
template BenchRecord run_scenario_with<WrappingArith>(const BenchConfig&);

BenchRecord run_scenario(const BenchConfig& config) {
    return run_scenario_with<HotPathArith>(config);
}

std::vector<BenchRecord> sweep_batches(const std::vector<std::size_t>& sizes, const BenchConfig& base) {
    for (const std::size_t s : sizes) {
        if (s < 1 || s > 256) {
            throw Error(ErrorKind::invalid_argument, fmt::format("batch size {} outside [1, 256]", s));
        }
    }
    std::vector<BenchRecord> records;
    std::set<std::size_t> seen;
    for (const std::size_t s : sizes) {
        if (!seen.insert(s).second) {
            log::warn("batch size {} listed more than once, running it once", s);
            continue;
        }
        BenchConfig config = base;
        config.batch = s;
        config.scenario = "sweep";
        records.push_back(run_scenario(config));
    }
    return records;
}

BenchRecord measure_latency(std::uint64_t pps, double secs, const BenchConfig& base) {
    BenchConfig config = base;
    config.offered_pps = pps;
    config.secs = secs;
    config.record_latency = true;
    config.scenario = "latency";
    return run_scenario(config);
}

std::uint64_t service_bound_ps(const BenchConfig& config) {
    const BenchCosts& c = config.costs;
    const std::uint64_t one_direction =
        2 * c.call + 2 * c.mmio_write + config.batch * (c.per_packet + 2 * c.descriptor);
    return 2 * one_direction;
}

OverflowResult overflow_delta(std::size_t batch, double checked_mpps, double unchecked_mpps, bool identical) {
    OverflowResult r;
    r.batch = batch;
    r.checked_mpps = checked_mpps;
    r.unchecked_mpps = unchecked_mpps;
    if (identical) {
        r.delta = 0;
        r.note = "identical";
        return r;
    }
    if (!(unchecked_mpps > 0)) {
        throw Error(ErrorKind::invalid_argument, "unchecked rate must be positive");
    }
    r.delta = (unchecked_mpps - checked_mpps) / unchecked_mpps;
    if (r.delta < 0) {
        r.delta = 0;
        r.note = "noise";
    }
    return r;
}

template <class On, class Off>
OverflowResult overflow_cost_with(std::size_t batch, std::size_t repeats, const BenchConfig& base) {
    BenchConfig config = base;
    config.batch = batch;
    config.record_latency = false;
    config.scenario = "overflow";
    const auto timed = [&config]<class Arith>(std::type_identity<Arith>) {
        const auto start = std::chrono::steady_clock::now();
        const BenchRecord r = run_scenario_with<Arith>(config);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return static_cast<double>(r.forwarded) / secs / 1e6;
    };
    double on = 0;
    double off = 0;
    for (std::size_t i = 0; i < std::max<std::size_t>(repeats, 1); ++i) {
        on = std::max(on, timed(std::type_identity<On>{}));
        off = std::max(off, timed(std::type_identity<Off>{}));
    }
    return overflow_delta(batch, on, off, std::is_same_v<On, Off>);
}

template OverflowResult overflow_cost_with<CheckedArith, WrappingArith>(std::size_t, std::size_t, const BenchConfig&);
template OverflowResult overflow_cost_with<WrappingArith, WrappingArith>(std::size_t, std::size_t, const BenchConfig&);

OverflowResult overflow_cost(std::size_t batch, std::size_t repeats, const BenchConfig& base) {
    return overflow_cost_with<HotPathArith, WrappingArith>(batch, repeats, base);
}

void export_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
    out << bench_csv_header << '\n';
    for (const auto& r : records) {
        out << fmt::format("{},{},{},{},{},{},{},{}", r.scenario, r.batch, r.ring, r.offered_pps, r.secs, r.forwarded,
                           r.dev_drops, r.app_drops);
        const Quantile qs[] = {q50, q90, q99, q999, q9999, q99999, q999999};
        for (const Quantile q : qs) {
            out << ',' << (r.latency.empty() ? std::string() : format_ps(r.latency.percentile(q)));
        }
        out << ',' << (r.latency.empty() ? std::string() : format_ps(r.latency.max())) << ",ns\n";
    }
}

void export_csv(const std::string& path, const std::vector<BenchRecord>& records) {
    std::ostringstream text;
    export_csv(text, records);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text.str();
    out.flush();
    if (!out) {
        throw Error(ErrorKind::io_error, fmt::format("cannot write {}", path));
    }
}

void export_histogram_csv(std::ostream& out, const LatencyDistribution& latency, std::uint64_t bin_ps) {
    out << "latency_ns,count\n";
    if (latency.empty()) {
        return;
    }
    for (const auto& [lower, count] : latency.histogram(bin_ps)) {
        out << format_ps(lower) << ',' << count << '\n';
    }
}

void export_overflow_csv(std::ostream& out, const std::vector<OverflowResult>& results) {
    out << "batch,checked_mpps,unchecked_mpps,delta,note\n";
    for (const auto& r : results) {
        out << fmt::format("{},{:.4f},{:.4f},{:.6f},{}\n", r.batch, r.checked_mpps, r.unchecked_mpps, r.delta, r.note);
    }
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
    const char* text = std::getenv("IXY_SEED");
    if (text == nullptr || *text == '\0') {
        return fallback;
    }
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text, &end, 0);
    if (end == nullptr || *end != '\0') {
        log::warn("ignoring non-numeric IXY_SEED '{}'", text);
        return fallback;
    }
    return v;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> sizes;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw Error(ErrorKind::invalid_argument, fmt::format("bad batch size '{}'", item));
        }
        sizes.push_back(v);
    }
    if (sizes.empty()) {
        throw Error(ErrorKind::invalid_argument, "no batch sizes given");
    }
    return sizes;
}

} // namespace ixy
