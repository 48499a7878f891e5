#include "ixy/ixgbe.hpp"

#include <algorithm>
#include <thread>

#include <fmt/core.h>

#include "ixy/checked.hpp"
#include "ixy/error.hpp"
#include "ixy/ixgbe_regs.hpp"

namespace ixy {

using namespace regs;

namespace {

std::uint16_t max_queues(const DeviceHandle& handle) {
    // The software model has a single queue pair; the 82599 has 64 usable here.
    return handle.backend() == Backend::model ? 1 : 64;
}

} // namespace

DeviceStats& DeviceStats::operator+=(const DeviceStats& other) noexcept {
    rx_packets += other.rx_packets;
    tx_packets += other.tx_packets;
    rx_bytes += other.rx_bytes;
    tx_bytes += other.tx_bytes;
    rx_dropped += other.rx_dropped;
    return *this;
}

std::size_t RxQueue::buffers_in_custody() const noexcept {
    return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const PacketBuffer& b) { return !b.empty(); }));
}

std::size_t TxQueue::in_flight() const noexcept {
    return ring_size == 0 ? 0 : ring_distance(clean_index, next_index, ring_size);
}

std::size_t TxQueue::free_slots() const noexcept {
    return ring_size == 0 ? 0 : ring_size - 1 - in_flight();
}

IxgbeDevice::IxgbeDevice(DeviceHandle& handle, std::uint16_t num_rx_queues, std::uint16_t num_tx_queues,
                         DriverConfig config)
    : handle_(&handle), config_(config) {
    const std::uint32_t ring = config_.ring_size;
    if (ring < min_ring_size || ring > max_ring_size || (ring & (ring - 1)) != 0) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("ring size {} must be a power of two in [{}, {}]", ring, min_ring_size, max_ring_size));
    }
    if (config_.entry_size < 1024 || config_.entry_size % 1024 != 0 || config_.entry_size > 16 * 1024) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("entry size {} must be a multiple of 1 KiB up to 16 KiB", config_.entry_size));
    }
    const std::uint16_t limit = max_queues(handle);
    if (num_rx_queues < 1 || num_rx_queues > limit || num_tx_queues < 1 || num_tx_queues > limit) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("{} rx / {} tx queues requested, device supports 1..{}", num_rx_queues,
                                num_tx_queues, limit));
    }
    if (config_.effective_pool_capacity() < ring) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("pool capacity {} cannot fill a ring of {}", config_.effective_pool_capacity(), ring));
    }
    handle.claim_for_driver();
    reset_and_init(num_rx_queues, num_tx_queues);
}

void IxgbeDevice::reset_and_init(std::uint16_t num_rx, std::uint16_t num_tx) {
    const MmioRegion& r = registers();
    const auto timeout = config_.timeout;

    // Interrupts off, global reset, interrupts off again (reset re-enables them).
    r.write32(EIMC, EIMC_ALL);
    r.write32(CTRL, CTRL_RST_MASK);
    r.wait_clear32(CTRL, CTRL_RST_MASK, timeout);
    if (config_.reset_settle.count() > 0) {
        std::this_thread::sleep_for(config_.reset_settle);
    }
    r.write32(EIMC, EIMC_ALL);

    r.wait_set32(EEC, EEC_ARD, timeout);
    r.wait_set32(RDRXCTL, RDRXCTL_DMAIDONE, timeout);

    r.set_flags32(AUTOC, AUTOC_AN_RESTART);

    handle_->enable_bus_master();
    reset_stats();

    init_rx(num_rx);
    init_tx(num_tx);
    for (std::uint16_t q = 0; q < num_rx; ++q) {
        start_rx_queue(q);
    }
    for (std::uint16_t q = 0; q < num_tx; ++q) {
        start_tx_queue(q);
    }
    set_promisc(config_.promiscuous);
    r.wait_set32(LINKS, LINKS_UP, timeout);
}

void IxgbeDevice::init_rx(std::uint16_t num_rx) {
    const MmioRegion& r = registers();
    r.clear_flags32(RXCTRL, RXCTRL_RXEN);
    // CRC stripping, accept broadcast.
    r.set_flags32(HLREG0, HLREG0_RXCRCSTRP);
    r.set_flags32(FCTRL, FCTRL_BAM);

    const std::size_t ring_bytes = static_cast<std::size_t>(config_.ring_size) * desc::SIZE;
    for (std::uint16_t q = 0; q < num_rx; ++q) {
        std::uint32_t srrctl = SRRCTL_DESCTYPE_ADV_ONEBUF |
                               (static_cast<std::uint32_t>(config_.entry_size / 1024) & SRRCTL_BSIZEPKT_MASK);
        if (config_.drop_on_full) {
            srrctl |= SRRCTL_DROP_EN;
        }
        r.write32(SRRCTL(q), srrctl);

        RxQueue queue;
        queue.ring = allocate_dma(*handle_, ring_bytes, true);
        std::fill(queue.ring->bytes().begin(), queue.ring->bytes().end(), std::uint8_t{0});
        queue.ring_size = config_.ring_size;
        queue.slots.resize(config_.ring_size);
        queue.pool = create_mempool(*handle_, config_.effective_pool_capacity(), config_.entry_size);

        const std::uint64_t base = queue.ring->device_address();
        r.write32(RDBAL(q), static_cast<std::uint32_t>(base));
        r.write32(RDBAH(q), static_cast<std::uint32_t>(base >> 32));
        r.write32(RDLEN(q), static_cast<std::uint32_t>(ring_bytes));
        r.write32(RDH(q), 0);
        r.write32(RDT(q), 0);
        rx_.push_back(std::move(queue));
    }
}

void IxgbeDevice::init_tx(std::uint16_t num_tx) {
    const MmioRegion& r = registers();
    r.set_flags32(HLREG0, HLREG0_TXCRCEN | HLREG0_TXPADEN);

    const std::size_t ring_bytes = static_cast<std::size_t>(config_.ring_size) * desc::SIZE;
    for (std::uint16_t q = 0; q < num_tx; ++q) {
        TxQueue queue;
        queue.ring = allocate_dma(*handle_, ring_bytes, true);
        std::fill(queue.ring->bytes().begin(), queue.ring->bytes().end(), std::uint8_t{0});
        queue.ring_size = config_.ring_size;
        queue.slots.resize(config_.ring_size);

        const std::uint64_t base = queue.ring->device_address();
        r.write32(TDBAL(q), static_cast<std::uint32_t>(base));
        r.write32(TDBAH(q), static_cast<std::uint32_t>(base >> 32));
        r.write32(TDLEN(q), static_cast<std::uint32_t>(ring_bytes));
        tx_.push_back(std::move(queue));
    }
    r.write32(DMATXCTL, DMATXCTL_TE);
}

void IxgbeDevice::start_rx_queue(std::uint16_t queue) {
    const MmioRegion& r = registers();
    RxQueue& q = rx_at(queue);
    // Fill every slot but the last; the empty slot keeps tail != head on a full ring.
    for (std::uint32_t i = 0; i + 1 < q.ring_size; ++i) {
        PacketBuffer buf = q.pool->alloc();
        if (buf.empty()) {
            throw Error(ErrorKind::allocation_failure, "mempool too small to fill the rx ring");
        }
        const std::size_t slot = static_cast<std::size_t>(i) * desc::SIZE;
        q.ring->store64(slot + desc::RX_PKT_ADDR, buf.device_address());
        q.ring->store64(slot + desc::RX_HDR_ADDR, 0);
        q.slots[i] = std::move(buf);
    }
    r.set_flags32(RXDCTL(queue), RXDCTL_ENABLE);
    r.wait_set32(RXDCTL(queue), RXDCTL_ENABLE, config_.timeout);
    r.write32(RDH(queue), 0);
    r.write32(RDT(queue), q.ring_size - 1);
    q.next_index = 0;
    r.set_flags32(RXCTRL, RXCTRL_RXEN);
}

void IxgbeDevice::start_tx_queue(std::uint16_t queue) {
    const MmioRegion& r = registers();
    TxQueue& q = tx_at(queue);
    r.write32(TDH(queue), 0);
    r.write32(TDT(queue), 0);
    q.next_index = 0;
    q.clean_index = 0;
    r.set_flags32(TXDCTL(queue), TXDCTL_ENABLE);
    r.wait_set32(TXDCTL(queue), TXDCTL_ENABLE, config_.timeout);
}

RxQueue& IxgbeDevice::rx_at(std::uint16_t queue) {
    static_cast<void>(rx_queue(queue));
    return rx_[queue];
}

TxQueue& IxgbeDevice::tx_at(std::uint16_t queue) {
    static_cast<void>(tx_queue(queue));
    return tx_[queue];
}

const RxQueue& IxgbeDevice::rx_queue(std::uint16_t queue) const {
    if (queue >= rx_.size()) {
        throw Error(ErrorKind::invalid_argument, fmt::format("no rx queue {}", queue));
    }
    return rx_[queue];
}

const TxQueue& IxgbeDevice::tx_queue(std::uint16_t queue) const {
    if (queue >= tx_.size()) {
        throw Error(ErrorKind::invalid_argument, fmt::format("no tx queue {}", queue));
    }
    return tx_[queue];
}

const std::shared_ptr<Mempool>& IxgbeDevice::rx_pool(std::uint16_t queue) const {
    return rx_queue(queue).pool;
}

std::size_t IxgbeDevice::rx_batch(std::uint16_t queue, std::vector<PacketBuffer>& out, std::size_t max) {
    RxQueue& q = rx_at(queue);
    DmaRegion& ring = *q.ring;
    std::uint32_t index = q.next_index;
    std::size_t received = 0;
    while (received < max) {
        const std::size_t slot = static_cast<std::size_t>(index) * desc::SIZE;
        const std::uint32_t status = ring.load32(slot + desc::RX_STATUS, std::memory_order_acquire);
        if ((status & desc::RXD_STAT_DD) == 0) {
            break;
        }
        if ((status & desc::RXD_STAT_EOP) == 0) {
            throw Error(ErrorKind::invalid_argument, "multi-descriptor packets are not supported");
        }
        // Allocate the replacement first so a slot is never left without a buffer.
        PacketBuffer fresh = q.pool->alloc();
        if (fresh.empty()) {
            break;
        }
        PacketBuffer filled = std::move(q.slots[index]);
        filled.resize(ring.load32(slot + desc::RX_LENGTH) & 0xFFFF);
        out.push_back(std::move(filled));

        // The refill goes into the unused slot just behind this one, which the
        // tail write below hands back to the device.
        const std::uint32_t refill = ring_retreat(index, q.ring_size);
        const std::size_t refill_slot = static_cast<std::size_t>(refill) * desc::SIZE;
        ring.store64(refill_slot + desc::RX_PKT_ADDR, fresh.device_address());
        ring.store64(refill_slot + desc::RX_HDR_ADDR, 0);
        q.slots[refill] = std::move(fresh);

        index = ring_advance(index, q.ring_size);
        ++received;
    }
    if (received > 0) {
        q.next_index = index;
        registers().write32(RDT(queue), ring_retreat(index, q.ring_size));
    }
    return received;
}

std::size_t IxgbeDevice::tx_clean(TxQueue& q) {
    std::size_t cleaned = 0;
    for (;;) {
        if (ring_distance(q.clean_index, q.next_index, q.ring_size) < tx_clean_batch) {
            break;
        }
        const std::uint32_t last = (q.clean_index + tx_clean_batch - 1) & (q.ring_size - 1);
        const std::uint32_t status =
            q.ring->load32(static_cast<std::size_t>(last) * desc::SIZE + desc::TX_OLINFO_STATUS,
                           std::memory_order_acquire);
        if ((status & desc::TXD_STAT_DD) == 0) {
            break;
        }
        for (std::uint32_t i = 0; i < tx_clean_batch; ++i) {
            q.slots[q.clean_index] = PacketBuffer{};
            q.clean_index = ring_advance(q.clean_index, q.ring_size);
        }
        cleaned += tx_clean_batch;
    }
    return cleaned;
}

std::size_t IxgbeDevice::tx_clean_all(std::uint16_t queue) {
    TxQueue& q = tx_at(queue);
    std::size_t cleaned = 0;
    while (q.clean_index != q.next_index) {
        const std::uint32_t status = q.ring->load32(
            static_cast<std::size_t>(q.clean_index) * desc::SIZE + desc::TX_OLINFO_STATUS, std::memory_order_acquire);
        if ((status & desc::TXD_STAT_DD) == 0) {
            break;
        }
        q.slots[q.clean_index] = PacketBuffer{};
        q.clean_index = ring_advance(q.clean_index, q.ring_size);
        ++cleaned;
    }
    return cleaned;
}

std::size_t IxgbeDevice::tx_batch(std::uint16_t queue, std::vector<PacketBuffer>& bufs) {
    TxQueue& q = tx_at(queue);
    for (const PacketBuffer& buf : bufs) {
        if (buf.empty()) {
            throw Error(ErrorKind::empty_handle, "tx_batch given an empty handle");
        }
        if (buf.size() < min_frame_size || buf.size() > buf.capacity()) {
            throw Error(ErrorKind::invalid_argument,
                        fmt::format("frame length {} outside [{}, {}]", buf.size(), min_frame_size, buf.capacity()));
        }
    }
    if (bufs.empty()) {
        return 0;
    }
    tx_clean(q);

    const std::size_t accepted = std::min(bufs.size(), q.free_slots());
    DmaRegion& ring = *q.ring;
    for (std::size_t i = 0; i < accepted; ++i) {
        PacketBuffer& buf = bufs[i];
        const auto length = static_cast<std::uint32_t>(buf.size());
        const std::size_t slot = static_cast<std::size_t>(q.next_index) * desc::SIZE;
        ring.store64(slot + desc::TX_BUF_ADDR, buf.device_address());
        ring.store32(slot + desc::TX_CMD_TYPE_LEN, desc::TXD_CMD_EOP | desc::TXD_CMD_RS | desc::TXD_CMD_IFCS |
                                                       desc::TXD_CMD_DEXT | desc::TXD_DTYP_DATA | length);
        ring.store32(slot + desc::TX_OLINFO_STATUS, length << desc::TXD_PAYLEN_SHIFT);
        q.slots[q.next_index] = std::move(buf);
        q.next_index = ring_advance(q.next_index, q.ring_size);
    }
    if (accepted > 0) {
        bufs.erase(bufs.begin(), bufs.begin() + static_cast<std::ptrdiff_t>(accepted));
        registers().write32(TDT(queue), q.next_index);
    }
    return accepted;
}

DeviceStats IxgbeDevice::read_stats() {
    const MmioRegion& r = registers();
    DeviceStats delta;
    delta.rx_packets = r.read32(GPRC);
    delta.tx_packets = r.read32(GPTC);
    delta.rx_bytes = r.read32(GORCL);
    delta.rx_bytes |= static_cast<std::uint64_t>(r.read32(GORCH)) << 32;
    delta.tx_bytes = r.read32(GOTCL);
    delta.tx_bytes |= static_cast<std::uint64_t>(r.read32(GOTCH)) << 32;
    delta.rx_dropped = r.read32(MPC0);
    return delta;
}

void IxgbeDevice::reset_stats() {
    static_cast<void>(read_stats());
}

void IxgbeDevice::set_promisc(bool enabled) {
    if (enabled) {
        registers().set_flags32(FCTRL, FCTRL_MPE | FCTRL_UPE);
    } else {
        registers().clear_flags32(FCTRL, FCTRL_MPE | FCTRL_UPE);
    }
}

std::uint32_t IxgbeDevice::get_link_speed() const {
    return link_speed_mbit(registers().read32(LINKS));
}

std::uint32_t link_speed_mbit(std::uint32_t links) noexcept {
    if ((links & LINKS_UP) == 0) {
        return 0;
    }
    switch (links & LINKS_SPEED_MASK) {
    case LINKS_SPEED_100M: return 100;
    case LINKS_SPEED_1G: return 1000;
    case LINKS_SPEED_10G: return 10000;
    default: return 0;
    }
}

} // namespace ixy
