#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "ixy/dma_memory.hpp"
#include "ixy/platform.hpp"

namespace ixy {

struct DriverConfig {
    std::uint32_t ring_size = 512;
    std::size_t max_batch = 32;
    std::size_t entry_size = Mempool::default_entry_size;
    // 0 selects 2 * ring_size + 2 * max_batch.
    std::size_t pool_capacity = 0;
    std::chrono::nanoseconds timeout = std::chrono::seconds(10);
    // Pause after the reset bits clear; real hardware wants ~10 ms.
    std::chrono::nanoseconds reset_settle{0};
    bool promiscuous = true;
    bool drop_on_full = true;

    [[nodiscard]] std::size_t effective_pool_capacity() const noexcept {
        return pool_capacity != 0 ? pool_capacity : 2 * static_cast<std::size_t>(ring_size) + 2 * max_batch;
    }
};

struct DeviceStats {
    std::uint64_t rx_packets = 0;
    std::uint64_t tx_packets = 0;
    std::uint64_t rx_bytes = 0;
    std::uint64_t tx_bytes = 0;
    // Frames the device discarded because the receive ring was full.
    std::uint64_t rx_dropped = 0;

    DeviceStats& operator+=(const DeviceStats& other) noexcept;
    friend bool operator==(const DeviceStats&, const DeviceStats&) = default;
};

// Receive ring: every slot except the one just behind next_index holds a buffer.
struct RxQueue {
    std::shared_ptr<DmaRegion> ring;
    std::uint32_t ring_size = 0;
    std::uint32_t next_index = 0;
    std::vector<PacketBuffer> slots;
    std::shared_ptr<Mempool> pool;

    [[nodiscard]] std::size_t buffers_in_custody() const noexcept;
};

// Transmit ring: slots in [clean_index, next_index) hold in-flight buffers.
struct TxQueue {
    std::shared_ptr<DmaRegion> ring;
    std::uint32_t ring_size = 0;
    std::uint32_t next_index = 0;
    std::uint32_t clean_index = 0;
    std::vector<PacketBuffer> slots;

    [[nodiscard]] std::size_t in_flight() const noexcept;
    [[nodiscard]] std::size_t free_slots() const noexcept;
};

/**
 * Poll-mode driver for the ixgbe family, over any DeviceHandle backend.
 *
 * All datapath calls work on batches. Each rx_batch/tx_batch call that makes
 * progress writes the queue's tail register exactly once; calls that make no
 * progress touch no register at all.
 *
 * The handle must outlive the device. One thread per queue pair.
 */
class IxgbeDevice {
public:
    static constexpr std::uint32_t min_ring_size = 64;
    static constexpr std::uint32_t max_ring_size = 4096;
    static constexpr std::uint32_t tx_clean_batch = 32;
    static constexpr std::size_t min_frame_size = 60;

    IxgbeDevice(DeviceHandle& handle, std::uint16_t num_rx_queues, std::uint16_t num_tx_queues,
                DriverConfig config = {});

    IxgbeDevice(const IxgbeDevice&) = delete;
    IxgbeDevice& operator=(const IxgbeDevice&) = delete;
    IxgbeDevice(IxgbeDevice&&) noexcept = default;
    IxgbeDevice& operator=(IxgbeDevice&&) noexcept = default;

    // Appends up to `max` received buffers to `out`; returns the count.
    std::size_t rx_batch(std::uint16_t queue, std::vector<PacketBuffer>& out, std::size_t max);
    // Takes custody of a prefix of `bufs` (erased from the vector) and returns
    // its length. Whatever remains in `bufs` stays with the caller.
    std::size_t tx_batch(std::uint16_t queue, std::vector<PacketBuffer>& bufs);
    // Returns every completed transmit buffer to its pool, regardless of chunking.
    std::size_t tx_clean_all(std::uint16_t queue);

    // Counters accumulated since the last call (hardware counters are clear-on-read).
    DeviceStats read_stats();
    void reset_stats();

    void set_promisc(bool enabled);
    // Mbit/s, 0 when the link is down.
    [[nodiscard]] std::uint32_t get_link_speed() const;

    [[nodiscard]] std::size_t num_rx_queues() const noexcept { return rx_.size(); }
    [[nodiscard]] std::size_t num_tx_queues() const noexcept { return tx_.size(); }
    [[nodiscard]] const RxQueue& rx_queue(std::uint16_t queue) const;
    [[nodiscard]] const TxQueue& tx_queue(std::uint16_t queue) const;
    [[nodiscard]] const std::shared_ptr<Mempool>& rx_pool(std::uint16_t queue) const;
    [[nodiscard]] DeviceHandle& handle() noexcept { return *handle_; }
    [[nodiscard]] const MmioRegion& registers() const noexcept { return handle_->registers(); }
    [[nodiscard]] const DriverConfig& config() const noexcept { return config_; }

private:
    void reset_and_init(std::uint16_t num_rx, std::uint16_t num_tx);
    void init_rx(std::uint16_t num_rx);
    void init_tx(std::uint16_t num_tx);
    void start_rx_queue(std::uint16_t queue);
    void start_tx_queue(std::uint16_t queue);
    std::size_t tx_clean(TxQueue& q);
    RxQueue& rx_at(std::uint16_t queue);
    TxQueue& tx_at(std::uint16_t queue);

    DeviceHandle* handle_;
    DriverConfig config_;
    std::vector<RxQueue> rx_;
    std::vector<TxQueue> tx_;
};

// Decodes a LINKS register value; 0 when down.
[[nodiscard]] std::uint32_t link_speed_mbit(std::uint32_t links) noexcept;

} // namespace ixy
