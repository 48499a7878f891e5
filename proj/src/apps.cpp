#include "ixy/apps.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <ostream>
#include <thread>

#include <fmt/core.h>

#include "ixy/error.hpp"
#include "ixy/frames.hpp"
#include "ixy/ixgbe_regs.hpp"
#include "ixy/pcap.hpp"

namespace ixy {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t pump_budget = 64;

struct Feed {
    std::shared_ptr<ModelNic> src;
    std::shared_ptr<ModelNic> dst;
    FrameGenerator generator;
    std::uint64_t target;
    std::atomic<std::uint64_t> injected{0};
    std::atomic<std::uint64_t> app_drops{0};

    Feed(std::shared_ptr<ModelNic> s, std::shared_ptr<ModelNic> d, std::uint64_t seed, std::size_t size,
         std::uint64_t count)
        : src(std::move(s)), dst(std::move(d)), generator(seed, size), target(count) {}

    // Frames injected at src and not yet sent by dst or dropped on the way.
    [[nodiscard]] std::uint64_t accounted() const {
        const ModelCounters in = src->counters();
        return dst->counters().tx_sent + in.rx_dropped + in.link_drops + app_drops.load();
    }

    [[nodiscard]] bool drained() const { return injected.load() == target && accounted() == target; }

    bool pump(std::size_t window, std::vector<std::uint8_t>& frame) {
        std::uint64_t sent = injected.load();
        if (sent >= target) {
            return false;
        }
        std::uint64_t limit = target;
        if (window != 0) {
            const std::uint64_t done = std::min(accounted(), sent);
            limit = std::min(target, done + window);
        }
        const bool progress = sent < limit;
        while (sent < limit) {
            generator.fill(frame, static_cast<std::uint16_t>(sent));
            static_cast<void>(src->inject(frame));
            ++sent;
        }
        injected.store(sent);
        return progress;
    }
};

double seconds_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

} // namespace

void ForwarderConfig::validate() const {
    if (batch_size < 1 || batch_size > 256) {
        throw Error(ErrorKind::invalid_argument, fmt::format("batch size {} outside [1, 256]", batch_size));
    }
    if (!(duration.count() > 0)) {
        throw Error(ErrorKind::invalid_argument, "duration must be positive");
    }
    if (!(stats_interval.count() > 0)) {
        throw Error(ErrorKind::invalid_argument, "stats interval must be positive");
    }
    if (touch_offset >= IxgbeDevice::min_frame_size) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("touch offset {} must be below the minimum frame size {}", touch_offset,
                                IxgbeDevice::min_frame_size));
    }
    if (frame_size < min_frame_size || frame_size > Mempool::default_entry_size) {
        throw Error(ErrorKind::invalid_argument, fmt::format("frame size {} outside [{}, {}]", frame_size,
                                                             min_frame_size, Mempool::default_entry_size));
    }
}

std::string format_stats_line(const std::string& device, const DeviceStats& stats, double secs) {
    const auto mpps = [&](std::uint64_t packets) { return static_cast<double>(packets) / secs / 1e6; };
    const auto mbit = [&](std::uint64_t packets, std::uint64_t bytes) {
        return static_cast<double>(bytes + 20 * packets) * 8 / secs / 1e6;
    };
    return fmt::format("[{}] RX: {:.2f} Mpps, {:.2f} Mbit/s | TX: {:.2f} Mpps, {:.2f} Mbit/s", device,
                       mpps(stats.rx_packets), mbit(stats.rx_packets, stats.rx_bytes), mpps(stats.tx_packets),
                       mbit(stats.tx_packets, stats.tx_bytes));
}

ForwarderSummary run_forwarder(Platform& platform, const ForwarderConfig& config) {
    config.validate();
    DeviceHandle handle_a = platform.open_device(config.dev_a);
    DeviceHandle handle_b = platform.open_device(config.dev_b);
    DriverConfig driver;
    driver.ring_size = config.ring_size;
    driver.max_batch = config.batch_size;
    IxgbeDevice a(handle_a, 1, 1, driver);
    IxgbeDevice b(handle_b, 1, 1, driver);

    const auto model_a = handle_a.model();
    const auto model_b = handle_b.model();
    const bool pumped = model_a && model_b;
    if (!pumped && (config.inject_a != 0 || config.inject_b != 0)) {
        throw Error(ErrorKind::invalid_argument, "frame injection needs two model devices");
    }
    if (!config.pcap_out.empty()) {
        if (!model_b) {
            throw Error(ErrorKind::invalid_argument, "pcap output needs a model device B");
        }
        auto writer = std::make_shared<PcapWriter>(config.pcap_out);
        model_b->set_capture_sink([writer](std::span<const std::uint8_t> frame, std::uint64_t ts) { writer->write(frame, ts); });
    }

    std::unique_ptr<Feed> feed_a;
    std::unique_ptr<Feed> feed_b;
    std::atomic<bool> done{false};
    std::thread pump;
    if (pumped) {
        feed_a = std::make_unique<Feed>(model_a, model_b, config.seed, config.frame_size, config.inject_a);
        feed_b = std::make_unique<Feed>(model_b, model_a, config.seed + 1, config.frame_size, config.inject_b);
        pump = std::thread([&] {
            std::vector<std::uint8_t> frame(config.frame_size);
            while (!done.load(std::memory_order_relaxed)) {
                bool busy = feed_a->pump(config.window, frame);
                busy = feed_b->pump(config.window, frame) || busy;
                busy = model_a->step(pump_budget) > 0 || busy;
                busy = model_b->step(pump_budget) > 0 || busy;
                if (!busy) {
                    std::this_thread::yield();
                }
            }
        });
    }

    ForwarderSummary summary;
    const auto collect = [&](bool print, double secs) {
        const DeviceStats sa = a.read_stats();
        const DeviceStats sb = b.read_stats();
        summary.a_to_b.dev_drops += sa.rx_dropped;
        summary.b_to_a.dev_drops += sb.rx_dropped;
        if (print && config.stats_out != nullptr) {
            *config.stats_out << format_stats_line(handle_a.identity(), sa, secs) << '\n'
                              << format_stats_line(handle_b.identity(), sb, secs) << '\n';
            config.stats_out->flush();
        }
    };

    std::vector<PacketBuffer> bufs;
    bufs.reserve(config.batch_size);
    const auto interval = std::chrono::duration_cast<Clock::duration>(config.stats_interval);
    const Clock::time_point start = Clock::now();
    const Clock::time_point end = start + std::chrono::duration_cast<Clock::duration>(config.duration);
    Clock::time_point last_stats = start;
    Clock::time_point next_stats = start + interval;
    std::uint64_t iteration = 0;

    try {
        for (;; ++iteration) {
            std::size_t n = forward_step<HotPathArith>(a, b, bufs, config.batch_size, config.touch_offset, summary.a_to_b);
            n += forward_step<HotPathArith>(b, a, bufs, config.batch_size, config.touch_offset, summary.b_to_a);
            const Clock::time_point now = Clock::now();
            if (now >= next_stats) {
                collect(true, seconds_between(last_stats, now));
                last_stats = now;
                next_stats += interval;
                ++summary.intervals;
            }
            if (now >= end) {
                break;
            }
            if (pumped) {
                feed_a->app_drops.store(summary.a_to_b.app_drops);
                feed_b->app_drops.store(summary.b_to_a.app_drops);
                summary.injected_a = feed_a->injected.load();
                summary.injected_b = feed_b->injected.load();
                if (config.stop_when_drained && (n == 0 || iteration % 64 == 0) && feed_a->drained() &&
                    feed_b->drained()) {
                    break;
                }
            }
            if (config.stop && config.stop(summary)) {
                break;
            }
            if (n == 0 && pumped) {
                std::this_thread::yield();
            }
        }
    } catch (...) {
        done = true;
        if (pump.joinable()) {
            pump.join();
        }
        throw;
    }
    done = true;
    if (pump.joinable()) {
        pump.join();
    }
    collect(false, 0);
    if (pumped) {
        summary.injected_a = feed_a->injected.load();
        summary.injected_b = feed_b->injected.load();
        summary.a_to_b.dev_drops += model_a->counters().link_drops;
        summary.b_to_a.dev_drops += model_b->counters().link_drops;
        if (!config.pcap_out.empty()) {
            model_b->set_capture_sink(nullptr);
        }
    }
    summary.elapsed_secs = seconds_between(start, Clock::now());
    return summary;
}

void GeneratorConfig::validate(std::size_t entry_size) const {
    if (frame_size < min_frame_size || frame_size > entry_size) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("frame size {} outside [{}, {}]", frame_size, min_frame_size, entry_size));
    }
    if (!count && !rate_pps) {
        throw Error(ErrorKind::invalid_argument, "generator needs a count or a rate");
    }
    if (rate_pps && !(*rate_pps > 0)) {
        throw Error(ErrorKind::invalid_argument, "rate must be positive");
    }
    if (!count && !(duration.count() > 0)) {
        throw Error(ErrorKind::invalid_argument, "duration must be positive");
    }
    if (batch_size < 1 || batch_size > 256) {
        throw Error(ErrorKind::invalid_argument, fmt::format("batch size {} outside [1, 256]", batch_size));
    }
}

std::uint64_t run_generator(Platform& platform, const GeneratorConfig& config) {
    config.validate();
    DeviceHandle handle = platform.open_device(config.device);
    DriverConfig driver;
    driver.ring_size = config.ring_size;
    driver.max_batch = config.batch_size;
    IxgbeDevice dev(handle, 1, 1, driver);
    const auto model = handle.model();
    if (!config.pcap_out.empty() && !model) {
        throw Error(ErrorKind::invalid_argument, "pcap output needs a model device");
    }
    const auto pool = create_mempool(handle, 2 * static_cast<std::size_t>(config.ring_size) + config.batch_size);
    const FrameGenerator generator(config.seed, config.frame_size);

    std::vector<PacketBuffer> pending;
    std::uint64_t built = 0;
    std::uint64_t sent = 0;
    const Clock::time_point start = Clock::now();
    const Clock::time_point end = start + std::chrono::duration_cast<Clock::duration>(config.duration);
    for (;;) {
        const Clock::time_point now = Clock::now();
        std::uint64_t target = config.count.value_or(UINT64_MAX);
        if (config.rate_pps) {
            if (!config.count && now >= end) {
                break;
            }
            const auto allowed = static_cast<std::uint64_t>(*config.rate_pps * seconds_between(start, now));
            target = std::min(target, allowed);
        }
        if (config.count && sent >= *config.count) {
            break;
        }
        const auto room = static_cast<std::size_t>(std::min<std::uint64_t>(target - std::min(target, built),
                                                                           config.batch_size - pending.size()));
        const std::size_t first = pending.size();
        pool->alloc_batch(room, pending);
        for (std::size_t i = first; i < pending.size(); ++i) {
            generator.fill(pending[i].data(), static_cast<std::uint16_t>(built));
            pending[i].resize(config.frame_size);
            ++built;
        }
        sent += dev.tx_batch(0, pending);
        if (model) {
            model->step(SIZE_MAX);
        } else if (pending.empty() && built == target) {
            std::this_thread::yield();
        }
    }
    free_all(pending);
    if (model) {
        while (model->tx_pending() != 0) {
            model->step(SIZE_MAX);
        }
        if (!config.pcap_out.empty()) {
            write_pcap(config.pcap_out, model->capture());
        }
    }
    dev.tx_clean_all(0);
    return sent;
}

std::string dump_device(Platform& platform, const std::string& spec) {
    using namespace regs;
    DeviceHandle handle = platform.open_device(spec);
    const MmioRegion& r = handle.registers();
    std::string out;
    const auto line = [&out](const std::string& text) {
        out += text;
        out += '\n';
    };
    const char* backend = handle.backend() == Backend::model ? "model" : "uio";
    line(fmt::format("device: {} ({})", handle.identity(), backend));

    const std::uint32_t links = r.read32(LINKS);
    const std::uint32_t speed = link_speed_mbit(links);
    line(fmt::format("link: {}, {} Mbit/s", (links & LINKS_UP) != 0 ? "up" : "down", speed));

    const std::uint32_t ral = r.read32(RAL0);
    const std::uint32_t rah = r.read32(RAH0);
    line(fmt::format("mac: {:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", ral & 0xFF, (ral >> 8) & 0xFF,
                     (ral >> 16) & 0xFF, ral >> 24, rah & 0xFF, (rah >> 8) & 0xFF));

    line("registers:");
    const std::pair<const char*, std::uint32_t> shown[] = {
        {"CTRL", CTRL},       {"STATUS", STATUS},     {"LINKS", LINKS},     {"AUTOC", AUTOC},
        {"HLREG0", HLREG0},   {"FCTRL", FCTRL},       {"RXCTRL", RXCTRL},   {"DMATXCTL", DMATXCTL},
        {"RDH0", RDH(0)},     {"RDT0", RDT(0)},       {"RXDCTL0", RXDCTL(0)}, {"SRRCTL0", SRRCTL(0)},
        {"TDH0", TDH(0)},     {"TDT0", TDT(0)},       {"TXDCTL0", TXDCTL(0)},
    };
    for (const auto& [name, offset] : shown) {
        line(fmt::format("  {:<9} 0x{:05x} = 0x{:08x}", name, offset, r.read32(offset)));
    }

    // Low word first: it latches the high word.
    const std::uint64_t rx_packets = r.read32(GPRC);
    const std::uint64_t tx_packets = r.read32(GPTC);
    const std::uint64_t rx_bytes_lo = r.read32(GORCL);
    const std::uint64_t rx_bytes = rx_bytes_lo | static_cast<std::uint64_t>(r.read32(GORCH)) << 32;
    const std::uint64_t tx_bytes_lo = r.read32(GOTCL);
    const std::uint64_t tx_bytes = tx_bytes_lo | static_cast<std::uint64_t>(r.read32(GOTCH)) << 32;
    const std::uint64_t missed = r.read32(MPC0);
    line("stats (clear-on-read, consumed by this dump):");
    line(fmt::format("  rx_packets {}", rx_packets));
    line(fmt::format("  tx_packets {}", tx_packets));
    line(fmt::format("  rx_bytes {}", rx_bytes));
    line(fmt::format("  tx_bytes {}", tx_bytes));
    line(fmt::format("  rx_dropped {}", missed));
    return out;
}

void ensure_models(Platform& platform, const std::vector<std::string>& specs, const ModelConfig& config) {
    for (const auto& text : specs) {
        const DeviceSpec spec = DeviceSpec::parse(text);
        if (spec.backend != Backend::model) {
            continue;
        }
        while (platform.model_count() <= spec.model_index) {
            platform.add_model(config);
        }
    }
}

} // namespace ixy
