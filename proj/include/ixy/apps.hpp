#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ixy/checked.hpp"
#include "ixy/ixgbe.hpp"
#include "ixy/platform.hpp"

namespace ixy {

struct DirectionSummary {
    std::uint64_t rx_packets = 0;
    std::uint64_t rx_bytes = 0;
    std::uint64_t tx_packets = 0;
    // Received but not accepted by the tx ring; freed by the forwarder.
    std::uint64_t app_drops = 0;
    // Discarded by the receiving device (full ring, full link).
    std::uint64_t dev_drops = 0;

    friend bool operator==(const DirectionSummary&, const DirectionSummary&) = default;
};

struct ForwarderSummary {
    DirectionSummary a_to_b;
    DirectionSummary b_to_a;
    std::uint64_t injected_a = 0;
    std::uint64_t injected_b = 0;
    std::size_t intervals = 0;
    double elapsed_secs = 0;
};

struct ForwarderConfig {
    std::string dev_a;
    std::string dev_b;
    std::size_t batch_size = 32;
    std::uint32_t ring_size = 512;
    std::chrono::duration<double> duration{10.0};
    std::chrono::duration<double> stats_interval{1.0};
    std::size_t touch_offset = 48;

    // Model backends only: seeded frames a pump thread feeds into each side,
    // keeping at most `window` frames per direction unaccounted for.
    std::uint64_t inject_a = 0;
    std::uint64_t inject_b = 0;
    std::size_t frame_size = 60;
    std::uint64_t seed = 1;
    std::size_t window = 256;
    // Stop as soon as every injected frame is forwarded or dropped.
    bool stop_when_drained = false;

    // Frames device B transmits; model backends only. Replaces any capture sink on B.
    std::string pcap_out;

    std::ostream* stats_out = nullptr;
    // Checked on every loop iteration; true ends the run.
    std::function<bool(const ForwarderSummary&)> stop;

    // Throws invalid_argument.
    void validate() const;
};

/**
 * One forwarding step in one direction: receive up to `batch` buffers from `rx`,
 * bump the byte at `touch_offset` of each, hand them to `tx`. Buffers the tx
 * ring does not take are freed and counted as app drops. `on_received` sees
 * the batch while the forwarder holds it.
 */
template <class Arith, class OnReceived>
std::size_t forward_step(IxgbeDevice& rx, IxgbeDevice& tx, std::vector<PacketBuffer>& bufs, std::size_t batch,
                         std::size_t touch_offset, DirectionSummary& d, OnReceived&& on_received) {
    bufs.clear();
    const std::size_t n = rx.rx_batch(0, bufs, batch);
    if (n == 0) {
        return 0;
    }
    std::uint64_t bytes = 0;
    for (PacketBuffer& buf : bufs) {
        std::uint8_t& b = buf.at(touch_offset);
        // The one intentionally wrapping operation: 255 + 1 == 0.
        b = static_cast<std::uint8_t>(b + 1);
        bytes = Arith::add(bytes, static_cast<std::uint64_t>(buf.size()));
    }
    d.rx_packets = Arith::add(d.rx_packets, static_cast<std::uint64_t>(n));
    d.rx_bytes = Arith::add(d.rx_bytes, bytes);
    on_received();
    const std::size_t sent = tx.tx_batch(0, bufs);
    d.tx_packets = Arith::add(d.tx_packets, static_cast<std::uint64_t>(sent));
    if (!bufs.empty()) {
        d.app_drops = Arith::add(d.app_drops, static_cast<std::uint64_t>(bufs.size()));
        free_all(bufs);
    }
    return n;
}

template <class Arith>
std::size_t forward_step(IxgbeDevice& rx, IxgbeDevice& tx, std::vector<PacketBuffer>& bufs, std::size_t batch,
                         std::size_t touch_offset, DirectionSummary& d) {
    return forward_step<Arith>(rx, tx, bufs, batch, touch_offset, d, [] {});
}

// `[<dev>] RX: <mpps> Mpps, <mbit> Mbit/s | TX: <mpps> Mpps, <mbit> Mbit/s`;
// Mbit/s includes 20 bytes of preamble and inter-frame gap per packet.
[[nodiscard]] std::string format_stats_line(const std::string& device, const DeviceStats& stats, double secs);

ForwarderSummary run_forwarder(Platform& platform, const ForwarderConfig& config);

struct GeneratorConfig {
    std::string device;
    std::size_t frame_size = 60;
    std::optional<std::uint64_t> count;
    std::optional<double> rate_pps;
    // Run time when only a rate is given.
    std::chrono::duration<double> duration{1.0};
    std::uint64_t seed = 1;
    std::size_t batch_size = 32;
    std::uint32_t ring_size = 512;
    std::string pcap_out;

    void validate(std::size_t entry_size = Mempool::default_entry_size) const;
};

// Returns the number of frames handed to the device.
std::uint64_t run_generator(Platform& platform, const GeneratorConfig& config);

// Register, link and statistics snapshot. Opens the device without
// initializing it; the statistics registers are consumed by the read.
[[nodiscard]] std::string dump_device(Platform& platform, const std::string& spec);

// Registers enough models on `platform` for every model spec in `specs`.
void ensure_models(Platform& platform, const std::vector<std::string>& specs, const ModelConfig& config = {});

} // namespace ixy
