#include "ixy/device_model.hpp"

#include <algorithm>
#include <utility>

#include <fmt/core.h>

#include "ixy/dma_memory.hpp"
#include "ixy/error.hpp"
#include "ixy/ixgbe_regs.hpp"
#include "ixy/log.hpp"

namespace ixy {

using namespace regs;

namespace {

constexpr std::uint32_t modeled_offsets[] = {
    CTRL, STATUS, EIMC, EEC, RDRXCTL, AUTOC, LINKS, HLREG0, FCTRL, RXCTRL, DMATXCTL, RAL0, RAH0,
    GPRC, GPTC, GORCL, GORCH, GOTCL, GOTCH, MPC0,
    RDBAL(0), RDBAH(0), RDLEN(0), RDH(0), RDT(0), RXDCTL(0), SRRCTL(0),
    TDBAL(0), TDBAH(0), TDLEN(0), TDH(0), TDT(0), TXDCTL(0),
};

bool is_stat(std::uint32_t offset) {
    return offset == GPRC || offset == GPTC || offset == GORCL || offset == GORCH || offset == GOTCL ||
           offset == GOTCH || offset == MPC0;
}

std::uint32_t low32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t high32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

} // namespace

void VirtualClock::advance_to(std::uint64_t t) noexcept {
    std::uint64_t current = now_.load(std::memory_order_relaxed);
    while (current < t && !now_.compare_exchange_weak(current, t, std::memory_order_relaxed)) {
    }
}

// HostMemory

std::uint64_t HostMemory::next_sequence() {
    std::lock_guard lock(mutex_);
    return next_sequence_++;
}

void HostMemory::register_region(std::uint64_t sequence, const std::shared_ptr<DmaRegion>& region) {
    std::lock_guard lock(mutex_);
    if (region->length() > (std::uint64_t{1} << 32)) {
        throw Error(ErrorKind::allocation_failure, "model regions are limited to 4 GiB");
    }
    regions_[sequence] = region;
}

HostMemory::Resolved HostMemory::resolve(std::uint64_t address, std::size_t length) const {
    std::lock_guard lock(mutex_);
    const auto it = regions_.find(address >> 32);
    if (it == regions_.end()) {
        return {nullptr, 0};
    }
    auto region = it->second.lock();
    const std::size_t offset = static_cast<std::size_t>(address & 0xFFFFFFFFu);
    if (!region || offset > region->length() || length > region->length() - offset) {
        return {nullptr, 0};
    }
    return {std::move(region), offset};
}

// RegisterBehavior

RegisterBehavior RegisterBehavior::plain(std::uint32_t value) {
    return {Kind::plain, value, 0, 0, {}};
}

RegisterBehavior RegisterBehavior::read_clear(std::uint32_t value) {
    return {Kind::read_clear, value, 0, 0, {}};
}

RegisterBehavior RegisterBehavior::set_after_reads(std::uint32_t mask, std::uint32_t n, std::uint32_t base) {
    return {Kind::set_after_reads, base, mask, n, {}};
}

RegisterBehavior RegisterBehavior::clear_after_reads(std::uint32_t mask, std::uint32_t n, std::uint32_t base) {
    return {Kind::clear_after_reads, base | mask, mask, n, {}};
}

RegisterBehavior RegisterBehavior::sequence(std::vector<std::uint32_t> values) {
    if (values.empty()) {
        throw Error(ErrorKind::invalid_argument, "register sequence needs at least one value");
    }
    return {Kind::sequence, 0, 0, 0, std::move(values)};
}

// ModelNic

ModelNic::ModelNic(ModelConfig config, std::shared_ptr<HostMemory> host, std::shared_ptr<VirtualClock> clock)
    : config_(std::move(config)), host_(std::move(host)), clock_(std::move(clock)), rng_(config_.seed) {
    if (!host_ || !clock_) {
        throw Error(ErrorKind::invalid_argument, "model nic needs host memory and a clock");
    }
    if (config_.min_frame == 0 || config_.min_frame > config_.max_frame || config_.max_frame > 0xFFFF) {
        throw Error(ErrorKind::invalid_argument, "invalid model frame size limits");
    }
    for (const std::uint32_t offset : modeled_offsets) {
        registers_.emplace(offset, Register{});
    }
    std::lock_guard lock(mutex_);
    reset_locked();
}

bool ModelNic::is_modeled(std::uint32_t offset) noexcept {
    return std::find(std::begin(modeled_offsets), std::end(modeled_offsets), offset) != std::end(modeled_offsets);
}

std::array<std::uint8_t, 6> ModelNic::mac() const noexcept {
    const std::uint32_t n = config_.instance;
    return {0x02, 0x00, static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
            static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
}

void ModelNic::reset_locked() {
    for (auto& [offset, r] : registers_) {
        r.value = 0;
        r.reads = 0;
    }
    const auto m = mac();
    reg(EEC) = EEC_ARD;
    reg(RDRXCTL) = RDRXCTL_DMAIDONE;
    reg(SRRCTL(0)) = 2;
    reg(RAL0) = static_cast<std::uint32_t>(m[0]) | static_cast<std::uint32_t>(m[1]) << 8 |
                static_cast<std::uint32_t>(m[2]) << 16 | static_cast<std::uint32_t>(m[3]) << 24;
    reg(RAH0) = static_cast<std::uint32_t>(m[4]) | static_cast<std::uint32_t>(m[5]) << 8 | RAH_AV;
    stat_gprc_ = stat_gptc_ = stat_gorc_ = stat_gotc_ = stat_mpc_ = 0;
    gorc_high_latch_ = gotc_high_latch_ = 0;
}

std::uint32_t& ModelNic::reg(std::uint32_t offset) {
    return registers_.at(offset).value;
}

std::uint32_t ModelNic::reg_value(std::uint32_t offset) const {
    return registers_.at(offset).value;
}

void ModelNic::log_access(AccessKind kind, std::uint64_t address, std::uint32_t value) {
    const std::uint64_t seq = access_sequence_++;
    switch (kind) {
    case AccessKind::reg_read: ++counters_.reg_reads; break;
    case AccessKind::reg_write: ++counters_.reg_writes; break;
    case AccessKind::dma_read: ++counters_.dma_reads; break;
    case AccessKind::dma_write: ++counters_.dma_writes; break;
    }
    if (config_.access_log) {
        log_.push_back({seq, kind, address, value});
    }
}

void ModelNic::fault(const std::string& what) {
    faults_.push_back(what);
    throw Error(ErrorKind::model_fault, fmt::format("model:{}: {}", config_.instance, what));
}

std::uint32_t ModelNic::read32(std::uint32_t offset) {
    std::lock_guard lock(mutex_);
    clock_->advance(config_.costs.mmio_read);
    const std::uint32_t value = read_locked(offset);
    ++read_counts_[offset];
    log_access(AccessKind::reg_read, offset, value);
    return value;
}

void ModelNic::write32(std::uint32_t offset, std::uint32_t value) {
    std::lock_guard lock(mutex_);
    clock_->advance(config_.costs.mmio_write);
    ++write_counts_[offset];
    log_access(AccessKind::reg_write, offset, value);
    write_locked(offset, value);
}

std::uint32_t ModelNic::read_scripted(Register& r) {
    auto& b = r.behavior;
    const std::uint32_t n = ++r.reads;
    switch (b.kind) {
    case RegisterBehavior::Kind::plain:
        return b.value;
    case RegisterBehavior::Kind::read_clear:
        return std::exchange(b.value, 0);
    case RegisterBehavior::Kind::set_after_reads:
        return n >= b.reads ? (b.value | b.mask) : (b.value & ~b.mask);
    case RegisterBehavior::Kind::clear_after_reads:
        return n >= b.reads ? (b.value & ~b.mask) : (b.value | b.mask);
    case RegisterBehavior::Kind::sequence:
        return b.values[std::min<std::size_t>(n, b.values.size()) - 1];
    }
    return 0;
}

std::uint32_t ModelNic::read_stat(std::uint32_t offset) {
    switch (offset) {
    case GPRC: return low32(std::exchange(stat_gprc_, 0));
    case GPTC: return low32(std::exchange(stat_gptc_, 0));
    case MPC0: return low32(std::exchange(stat_mpc_, 0));
    case GORCL: {
        const std::uint64_t v = std::exchange(stat_gorc_, 0);
        gorc_high_latch_ = high32(v);
        return low32(v);
    }
    case GORCH: return std::exchange(gorc_high_latch_, 0);
    case GOTCL: {
        const std::uint64_t v = std::exchange(stat_gotc_, 0);
        gotc_high_latch_ = high32(v);
        return low32(v);
    }
    case GOTCH: return std::exchange(gotc_high_latch_, 0);
    default: return 0;
    }
}

std::uint32_t ModelNic::read_locked(std::uint32_t offset) {
    const auto it = registers_.find(offset);
    if (it == registers_.end()) {
        if (warned_offsets_.insert(offset).second) {
            log::warn("model:{}: read of unmodeled register 0x{:05x} returns 0", config_.instance, offset);
        }
        return 0;
    }
    Register& r = it->second;
    if (r.scripted) {
        return read_scripted(r);
    }
    if (is_stat(offset)) {
        return read_stat(offset);
    }
    if (offset == LINKS) {
        if (!config_.link_up) {
            return 0;
        }
        std::uint32_t speed = LINKS_SPEED_10G;
        if (config_.link_speed_mbit == 1000) {
            speed = LINKS_SPEED_1G;
        } else if (config_.link_speed_mbit == 100) {
            speed = LINKS_SPEED_100M;
        }
        return LINKS_UP | speed;
    }
    return r.value;
}

void ModelNic::write_locked(std::uint32_t offset, std::uint32_t value) {
    const auto it = registers_.find(offset);
    if (it == registers_.end()) {
        if (warned_offsets_.insert(offset).second) {
            log::warn("model:{}: write to unmodeled register 0x{:05x} ignored", config_.instance, offset);
        }
        return;
    }
    if (offset == CTRL && (value & CTRL_RST_MASK) != 0) {
        reset_locked();
    }
    Register& r = registers_.at(offset);
    if (r.scripted) {
        r.behavior.value = value;
        r.reads = 0;
        return;
    }
    if (is_stat(offset) || offset == LINKS) {
        return;
    }
    // Reset bits are self-clearing.
    r.value = offset == CTRL ? (value & ~CTRL_RST_MASK) : value;
}

void ModelNic::script_register(std::uint32_t offset, RegisterBehavior behavior) {
    std::lock_guard lock(mutex_);
    const auto it = registers_.find(offset);
    if (it == registers_.end()) {
        throw Error(ErrorKind::invalid_argument, fmt::format("register 0x{:x} is not in the model's register map", offset));
    }
    it->second.scripted = true;
    it->second.behavior = std::move(behavior);
    it->second.reads = 0;
}

bool ModelNic::rx_enabled() const {
    return bus_master_ && (reg_value(RXCTRL) & RXCTRL_RXEN) != 0 && (reg_value(RXDCTL(0)) & RXDCTL_ENABLE) != 0;
}

bool ModelNic::tx_enabled() const {
    return bus_master_ && (reg_value(DMATXCTL) & DMATXCTL_TE) != 0 && (reg_value(TXDCTL(0)) & TXDCTL_ENABLE) != 0;
}

ModelNic::Ring ModelNic::ring_at(std::uint32_t bal, std::uint32_t bah, std::uint32_t len, const char* which) {
    const std::uint32_t bytes = reg_value(len);
    if (bytes == 0 || bytes % 128 != 0) {
        fault(fmt::format("{} ring length {} is not a positive multiple of 128", which, bytes));
    }
    const std::uint64_t base = static_cast<std::uint64_t>(reg_value(bah)) << 32 | reg_value(bal);
    auto memory = host_->resolve(base, bytes);
    if (!memory.region) {
        fault(fmt::format("{} ring [0x{:x}, +{}) is outside registered dma memory", which, base, bytes));
    }
    return {std::move(memory), bytes / desc::SIZE};
}

HostMemory::Resolved ModelNic::dma(std::uint64_t address, std::size_t length, const char* what) {
    auto memory = host_->resolve(address, length);
    if (!memory.region) {
        fault(fmt::format("{} dma [0x{:x}, +{}) is outside registered dma memory", what, address, length));
    }
    return memory;
}

bool ModelNic::accepts(std::span<const std::uint8_t> frame) const {
    const std::uint32_t fctrl = reg_value(FCTRL);
    if ((fctrl & FCTRL_UPE) != 0) {
        return true;
    }
    const auto dst = frame.first(6);
    if (std::all_of(dst.begin(), dst.end(), [](std::uint8_t b) { return b == 0xFF; })) {
        return (fctrl & FCTRL_BAM) != 0;
    }
    if ((dst[0] & 0x01) != 0) {
        return (fctrl & FCTRL_MPE) != 0;
    }
    const std::uint32_t ral = reg_value(RAL0);
    const std::uint32_t rah = reg_value(RAH0);
    if ((rah & RAH_AV) == 0) {
        return false;
    }
    const std::array<std::uint8_t, 6> station{
        static_cast<std::uint8_t>(ral), static_cast<std::uint8_t>(ral >> 8), static_cast<std::uint8_t>(ral >> 16),
        static_cast<std::uint8_t>(ral >> 24), static_cast<std::uint8_t>(rah), static_cast<std::uint8_t>(rah >> 8)};
    return std::equal(dst.begin(), dst.end(), station.begin());
}

bool ModelNic::tx_step(std::vector<CapturedFrame>& outgoing) {
    if (!tx_enabled()) {
        return false;
    }
    const std::uint32_t head = reg_value(TDH(0));
    const std::uint32_t tail = reg_value(TDT(0));
    if (head == tail) {
        return false;
    }
    const Ring ring = ring_at(TDBAL(0), TDBAH(0), TDLEN(0), "tx");
    if (head >= ring.size || tail >= ring.size) {
        fault(fmt::format("tx head {} / tail {} outside ring of {}", head, tail, ring.size));
    }
    DmaRegion& ring_mem = *ring.memory.region;
    const std::size_t slot = ring.memory.offset + static_cast<std::size_t>(head) * desc::SIZE;
    const std::uint64_t slot_address = ring_mem.translate(slot);

    const std::uint64_t address = ring_mem.load64(slot + desc::TX_BUF_ADDR);
    const std::uint32_t cmd = ring_mem.load32(slot + desc::TX_CMD_TYPE_LEN);
    log_access(AccessKind::dma_read, slot_address, desc::SIZE);
    const std::size_t length = cmd & desc::TXD_LEN_MASK;
    if (length < config_.min_frame || length > config_.max_frame) {
        fault(fmt::format("tx descriptor {} carries invalid length {}", head, length));
    }
    const auto buffer = dma(address, length, "tx buffer");
    const auto src = buffer.region->window(buffer.offset, length);
    CapturedFrame frame{std::vector<std::uint8_t>(src.begin(), src.end()), 0};
    log_access(AccessKind::dma_read, address, static_cast<std::uint32_t>(length));

    ring_mem.store32(slot + desc::TX_OLINFO_STATUS, desc::TXD_STAT_DD, std::memory_order_release);
    log_access(AccessKind::dma_write, slot_address + desc::TX_OLINFO_STATUS, 4);

    reg(TDH(0)) = (head + 1) % ring.size;
    ++stat_gptc_;
    stat_gotc_ += length;
    ++counters_.tx_sent;
    clock_->advance(config_.costs.descriptor);
    frame.timestamp = clock_->now();
    if (config_.store_captures) {
        captures_.push_back(frame);
    }
    outgoing.push_back(std::move(frame));
    return true;
}

ModelNic::RxResult ModelNic::rx_step() {
    if (link_.empty() || link_.front().arrival > clock_->now() || !rx_enabled()) {
        return RxResult::blocked;
    }
    const LinkFrame& frame = link_.front();
    if (!accepts(frame.bytes)) {
        ++counters_.rx_filtered;
        link_.pop_front();
        return RxResult::filtered;
    }
    const std::uint32_t head = reg_value(RDH(0));
    const std::uint32_t tail = reg_value(RDT(0));
    const Ring ring = ring_at(RDBAL(0), RDBAH(0), RDLEN(0), "rx");
    if (head >= ring.size || tail >= ring.size) {
        fault(fmt::format("rx head {} / tail {} outside ring of {}", head, tail, ring.size));
    }
    if (head == tail) {
        ring_full_seen_ = true;
        if ((reg_value(SRRCTL(0)) & SRRCTL_DROP_EN) == 0) {
            return RxResult::blocked;
        }
        ++stat_mpc_;
        ++counters_.rx_dropped;
        link_.pop_front();
        return RxResult::dropped;
    }
    DmaRegion& ring_mem = *ring.memory.region;
    const std::size_t slot = ring.memory.offset + static_cast<std::size_t>(head) * desc::SIZE;
    const std::uint64_t slot_address = ring_mem.translate(slot);
    const std::uint64_t address = ring_mem.load64(slot + desc::RX_PKT_ADDR);
    log_access(AccessKind::dma_read, slot_address, desc::SIZE);

    std::size_t buffer_size = (reg_value(SRRCTL(0)) & SRRCTL_BSIZEPKT_MASK) * 1024u;
    if (buffer_size == 0) {
        buffer_size = 2048;
    }
    const std::size_t length = frame.bytes.size();
    if (length > buffer_size) {
        fault(fmt::format("frame of {} bytes exceeds rx buffer size {}", length, buffer_size));
    }
    // Packet data first, status with DD last.
    const auto buffer = dma(address, length, "rx buffer");
    std::copy(frame.bytes.begin(), frame.bytes.end(), buffer.region->window(buffer.offset, length).begin());
    log_access(AccessKind::dma_write, address, static_cast<std::uint32_t>(length));

    ring_mem.store32(slot + 0, 0);
    ring_mem.store32(slot + 4, 0);
    ring_mem.store32(slot + desc::RX_LENGTH, static_cast<std::uint32_t>(length));
    ring_mem.store32(slot + desc::RX_STATUS, desc::RXD_STAT_DD | desc::RXD_STAT_EOP, std::memory_order_release);
    log_access(AccessKind::dma_write, slot_address, desc::SIZE);

    reg(RDH(0)) = (head + 1) % ring.size;
    ++stat_gprc_;
    stat_gorc_ += length;
    ++counters_.rx_delivered;
    clock_->advance(config_.costs.descriptor);
    link_.pop_front();
    return RxResult::delivered;
}

std::size_t ModelNic::step(std::size_t budget) {
    std::vector<CapturedFrame> outgoing;
    std::shared_ptr<ModelNic> peer;
    CaptureSink sink;
    std::size_t processed = 0;
    {
        std::lock_guard lock(mutex_);
        if (!bus_master_) {
            return 0;
        }
        while (processed < budget && tx_step(outgoing)) {
            ++processed;
        }
        ring_full_seen_ = false;
        while (processed < budget) {
            const RxResult r = rx_step();
            if (r == RxResult::delivered) {
                ++processed;
            } else if (r == RxResult::blocked) {
                break;
            }
        }
        // One event per step that found frames waiting on a full ring.
        if (ring_full_seen_) {
            ++counters_.rx_ring_full_events;
        }
        if (!outgoing.empty()) {
            peer = peer_.lock();
            sink = sink_;
        }
    }
    if (sink) {
        for (const auto& frame : outgoing) {
            sink(frame.bytes, frame.timestamp);
        }
    }
    if (peer) {
        peer->receive_from_peer(std::move(outgoing));
    }
    return processed;
}

void ModelNic::receive_from_peer(std::vector<CapturedFrame> frames) {
    std::lock_guard lock(mutex_);
    for (auto& frame : frames) {
        if (link_.size() >= config_.link_capacity) {
            ++counters_.link_drops;
            continue;
        }
        link_.push_back({std::move(frame.bytes), frame.timestamp});
    }
}

bool ModelNic::inject(std::span<const std::uint8_t> frame) {
    return inject(frame, clock_->now());
}

bool ModelNic::inject(std::span<const std::uint8_t> frame, std::uint64_t arrival) {
    if (frame.size() < config_.min_frame || frame.size() > config_.max_frame) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("frame of {} bytes outside [{}, {}]", frame.size(), config_.min_frame, config_.max_frame));
    }
    std::lock_guard lock(mutex_);
    if (link_.size() >= config_.link_capacity) {
        ++counters_.link_drops;
        return false;
    }
    if (!link_.empty() && arrival < link_.back().arrival) {
        arrival = link_.back().arrival;
    }
    link_.push_back({std::vector<std::uint8_t>(frame.begin(), frame.end()), arrival});
    return true;
}

std::vector<std::uint8_t> ModelNic::random_frame(std::size_t size) {
    std::lock_guard lock(mutex_);
    std::vector<std::uint8_t> frame(size);
    std::uniform_int_distribution<unsigned> byte(0, 255);
    for (auto& b : frame) {
        b = static_cast<std::uint8_t>(byte(rng_));
    }
    if (size >= 12) {
        const auto m = mac();
        std::copy(m.begin(), m.end(), frame.begin());
    }
    return frame;
}

std::vector<CapturedFrame> ModelNic::capture() const {
    std::lock_guard lock(mutex_);
    return captures_;
}

std::vector<CapturedFrame> ModelNic::take_capture() {
    std::lock_guard lock(mutex_);
    return std::exchange(captures_, {});
}

void ModelNic::set_capture_sink(CaptureSink sink) {
    std::lock_guard lock(mutex_);
    sink_ = std::move(sink);
}

std::vector<AccessRecord> ModelNic::access_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void ModelNic::clear_access_log() {
    std::lock_guard lock(mutex_);
    log_.clear();
}

void ModelNic::set_access_log_enabled(bool enabled) {
    std::lock_guard lock(mutex_);
    config_.access_log = enabled;
}

ModelCounters ModelNic::counters() const {
    std::lock_guard lock(mutex_);
    return counters_;
}

std::uint64_t ModelNic::reads_of(std::uint32_t offset) const {
    std::lock_guard lock(mutex_);
    const auto it = read_counts_.find(offset);
    return it == read_counts_.end() ? 0 : it->second;
}

std::uint64_t ModelNic::writes_of(std::uint32_t offset) const {
    std::lock_guard lock(mutex_);
    const auto it = write_counts_.find(offset);
    return it == write_counts_.end() ? 0 : it->second;
}

std::size_t ModelNic::link_pending() const {
    std::lock_guard lock(mutex_);
    return link_.size();
}

bool ModelNic::rx_ring_full() const {
    std::lock_guard lock(mutex_);
    return reg_value(RDH(0)) == reg_value(RDT(0));
}

std::size_t ModelNic::tx_pending() const {
    std::lock_guard lock(mutex_);
    const std::uint32_t bytes = reg_value(TDLEN(0));
    const std::uint32_t size = bytes / desc::SIZE;
    if (size == 0) {
        return 0;
    }
    return (reg_value(TDT(0)) + size - reg_value(TDH(0))) % size;
}

std::vector<std::string> ModelNic::faults() const {
    std::lock_guard lock(mutex_);
    return faults_;
}

void ModelNic::set_bus_master(bool enabled) {
    std::lock_guard lock(mutex_);
    bus_master_ = enabled;
}

bool ModelNic::bus_master() const {
    std::lock_guard lock(mutex_);
    return bus_master_;
}

void ModelNic::set_link_up(bool up) {
    std::lock_guard lock(mutex_);
    config_.link_up = up;
}

void link_connect(const std::shared_ptr<ModelNic>& a, const std::shared_ptr<ModelNic>& b) {
    if (!a || !b || a == b) {
        throw Error(ErrorKind::invalid_argument, "link_connect needs two distinct model nics");
    }
    {
        std::lock_guard lock(a->mutex_);
        a->peer_ = b;
    }
    std::lock_guard lock(b->mutex_);
    b->peer_ = a;
}

} // namespace ixy
