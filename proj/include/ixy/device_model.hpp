#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ixy/mmio.hpp"

namespace ixy {

class DmaRegion;

// Virtual time in picoseconds, shared by a set of model NICs and the harness.
class VirtualClock {
public:
    [[nodiscard]] std::uint64_t now() const noexcept { return now_.load(std::memory_order_relaxed); }
    void advance(std::uint64_t picos) noexcept { now_.fetch_add(picos, std::memory_order_relaxed); }
    // Moves forward to `t` if `t` is in the future.
    void advance_to(std::uint64_t t) noexcept;

private:
    std::atomic<std::uint64_t> now_{0};
};

// Virtual cost of device transactions, in picoseconds. All zero by default.
struct CostModel {
    std::uint64_t mmio_read = 0;
    std::uint64_t mmio_write = 0;
    std::uint64_t descriptor = 0;
};

// Device address space of the host as seen by model NICs: registered DMA
// regions, addressed as (region sequence << 32) | offset.
class HostMemory {
public:
    struct Resolved {
        std::shared_ptr<DmaRegion> region;
        std::size_t offset;
    };

    [[nodiscard]] std::uint64_t next_sequence();
    void register_region(std::uint64_t sequence, const std::shared_ptr<DmaRegion>& region);

    // Region and offset covering [address, address + length), or nullopt-like
    // empty region if no single registered region covers it.
    [[nodiscard]] Resolved resolve(std::uint64_t address, std::size_t length) const;

    [[nodiscard]] static constexpr std::uint64_t base_of(std::uint64_t sequence) noexcept { return sequence << 32; }

private:
    mutable std::mutex mutex_;
    std::uint64_t next_sequence_ = 1;
    std::map<std::uint64_t, std::weak_ptr<DmaRegion>> regions_;
};

/**
 * Scripted register behavior for tests.
 *
 * plain: reads return the stored value, writes store.
 * read_clear: first read returns the value, later reads 0 until written.
 * set_after_reads: the n-th read and every later one has `mask` set.
 * clear_after_reads: `mask` bits read back set until the n-th read clears them.
 * sequence: successive reads return the listed values; the last one sticks.
 */
struct RegisterBehavior {
    enum class Kind { plain, read_clear, set_after_reads, clear_after_reads, sequence };

    Kind kind = Kind::plain;
    std::uint32_t value = 0;
    std::uint32_t mask = 0;
    std::uint32_t reads = 0;
    std::vector<std::uint32_t> values;

    static RegisterBehavior plain(std::uint32_t value);
    static RegisterBehavior read_clear(std::uint32_t value);
    static RegisterBehavior set_after_reads(std::uint32_t mask, std::uint32_t n, std::uint32_t base = 0);
    static RegisterBehavior clear_after_reads(std::uint32_t mask, std::uint32_t n, std::uint32_t base = 0);
    static RegisterBehavior sequence(std::vector<std::uint32_t> values);
};

enum class AccessKind : std::uint8_t { reg_read, reg_write, dma_read, dma_write };

struct AccessRecord {
    std::uint64_t sequence;
    AccessKind kind;
    // Register offset, or device address for DMA.
    std::uint64_t address;
    // Register value, or byte count for DMA.
    std::uint32_t value;

    friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

struct ModelCounters {
    std::uint64_t rx_delivered = 0;
    std::uint64_t rx_dropped = 0;
    std::uint64_t rx_filtered = 0;
    std::uint64_t rx_ring_full_events = 0;
    std::uint64_t link_drops = 0;
    std::uint64_t tx_sent = 0;
    std::uint64_t reg_reads = 0;
    std::uint64_t reg_writes = 0;
    std::uint64_t dma_reads = 0;
    std::uint64_t dma_writes = 0;

    friend bool operator==(const ModelCounters&, const ModelCounters&) = default;
};

struct CapturedFrame {
    std::vector<std::uint8_t> bytes;
    std::uint64_t timestamp;

    friend bool operator==(const CapturedFrame&, const CapturedFrame&) = default;
};

struct ModelConfig {
    std::uint32_t instance = 0;
    std::size_t link_capacity = 4096;
    std::size_t min_frame = 60;
    std::size_t max_frame = 2048;
    std::uint32_t link_speed_mbit = 10000;
    bool link_up = true;
    bool access_log = true;
    bool store_captures = true;
    CostModel costs;
    std::uint64_t seed = 0;
};

using CaptureSink = std::function<void(std::span<const std::uint8_t> frame, std::uint64_t timestamp)>;

/**
 * Deterministic software model of an 82599-like NIC with one rx and one tx queue.
 *
 * Register accesses arrive through the RegisterBacking interface (so an
 * MmioRegion can sit on top), DMA goes through HostMemory. Nothing runs in the
 * background: descriptor processing only happens inside step(). The model is
 * internally synchronized so a driver thread and a pump thread can share it.
 */
class ModelNic : public RegisterBacking, public std::enable_shared_from_this<ModelNic> {
public:
    ModelNic(ModelConfig config, std::shared_ptr<HostMemory> host, std::shared_ptr<VirtualClock> clock);

    std::uint32_t read32(std::uint32_t offset) override;
    void write32(std::uint32_t offset, std::uint32_t value) override;

    // Processes up to `budget` descriptor transactions (tx completions first,
    // then rx deliveries of frames whose arrival time has passed).
    std::size_t step(std::size_t budget);

    // Queues a frame on the receive side of the link. Returns false on tail drop.
    bool inject(std::span<const std::uint8_t> frame);
    bool inject(std::span<const std::uint8_t> frame, std::uint64_t arrival);
    // Deterministic pseudo-random frame from the model's seed.
    [[nodiscard]] std::vector<std::uint8_t> random_frame(std::size_t size);

    void script_register(std::uint32_t offset, RegisterBehavior behavior);

    [[nodiscard]] std::vector<CapturedFrame> capture() const;
    [[nodiscard]] std::vector<CapturedFrame> take_capture();
    void set_capture_sink(CaptureSink sink);

    [[nodiscard]] std::vector<AccessRecord> access_log() const;
    void clear_access_log();
    void set_access_log_enabled(bool enabled);
    [[nodiscard]] ModelCounters counters() const;
    [[nodiscard]] std::uint64_t reads_of(std::uint32_t offset) const;
    [[nodiscard]] std::uint64_t writes_of(std::uint32_t offset) const;

    [[nodiscard]] std::size_t link_pending() const;
    [[nodiscard]] bool rx_ring_full() const;
    [[nodiscard]] std::size_t tx_pending() const;
    [[nodiscard]] std::vector<std::string> faults() const;

    void set_bus_master(bool enabled);
    [[nodiscard]] bool bus_master() const;
    void set_link_up(bool up);

    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::array<std::uint8_t, 6> mac() const noexcept;
    [[nodiscard]] const std::shared_ptr<VirtualClock>& clock() const noexcept { return clock_; }
    [[nodiscard]] const std::shared_ptr<HostMemory>& host() const noexcept { return host_; }

    static bool is_modeled(std::uint32_t offset) noexcept;

    friend void link_connect(const std::shared_ptr<ModelNic>& a, const std::shared_ptr<ModelNic>& b);

private:
    struct Register {
        std::uint32_t value = 0;
        bool scripted = false;
        RegisterBehavior behavior;
        std::uint32_t reads = 0;
    };

    struct LinkFrame {
        std::vector<std::uint8_t> bytes;
        std::uint64_t arrival;
    };

    struct Ring {
        HostMemory::Resolved memory;
        std::uint32_t size;
    };

    void reset_locked();
    std::uint32_t& reg(std::uint32_t offset);
    std::uint32_t reg_value(std::uint32_t offset) const;
    std::uint32_t read_locked(std::uint32_t offset);
    void write_locked(std::uint32_t offset, std::uint32_t value);
    std::uint32_t read_scripted(Register& r);
    std::uint32_t read_stat(std::uint32_t offset);
    void log_access(AccessKind kind, std::uint64_t address, std::uint32_t value);
    [[noreturn]] void fault(const std::string& what);
    Ring ring_at(std::uint32_t bal, std::uint32_t bah, std::uint32_t len, const char* which);
    HostMemory::Resolved dma(std::uint64_t address, std::size_t length, const char* what);
    bool accepts(std::span<const std::uint8_t> frame) const;
    bool rx_enabled() const;
    bool tx_enabled() const;
    bool tx_step(std::vector<CapturedFrame>& outgoing);
    enum class RxResult { delivered, dropped, filtered, blocked };
    RxResult rx_step();
    void receive_from_peer(std::vector<CapturedFrame> frames);

    ModelConfig config_;
    std::shared_ptr<HostMemory> host_;
    std::shared_ptr<VirtualClock> clock_;

    mutable std::mutex mutex_;
    std::unordered_map<std::uint32_t, Register> registers_;
    std::set<std::uint32_t> warned_offsets_;
    std::deque<LinkFrame> link_;
    std::weak_ptr<ModelNic> peer_;
    CaptureSink sink_;
    std::vector<CapturedFrame> captures_;
    std::vector<AccessRecord> log_;
    std::uint64_t access_sequence_ = 0;
    std::unordered_map<std::uint32_t, std::uint64_t> read_counts_;
    std::unordered_map<std::uint32_t, std::uint64_t> write_counts_;
    ModelCounters counters_;
    std::vector<std::string> faults_;
    bool bus_master_ = false;
    bool ring_full_seen_ = false;

    // Statistic accumulators behind the clear-on-read registers.
    std::uint64_t stat_gprc_ = 0;
    std::uint64_t stat_gptc_ = 0;
    std::uint64_t stat_gorc_ = 0;
    std::uint64_t stat_gotc_ = 0;
    std::uint64_t stat_mpc_ = 0;
    std::uint32_t gorc_high_latch_ = 0;
    std::uint32_t gotc_high_latch_ = 0;

    std::mt19937_64 rng_;
};

// Wires a's transmit side to b's receive side and vice versa.
void link_connect(const std::shared_ptr<ModelNic>& a, const std::shared_ptr<ModelNic>& b);

} // namespace ixy
