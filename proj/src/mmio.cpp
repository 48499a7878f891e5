#include "ixy/mmio.hpp"

#include <thread>
#include <utility>

#include <fmt/core.h>

#include "ixy/error.hpp"

namespace ixy {

MmioRegion::MmioRegion(std::shared_ptr<RegisterBacking> backing, std::size_t length)
    : backing_(std::move(backing)), length_(length) {
    if (!backing_) {
        throw Error(ErrorKind::invalid_argument, "mmio region without backing");
    }
}

void MmioRegion::check_access(std::uint32_t offset) const {
    if (offset % 4 != 0) {
        throw Error(ErrorKind::alignment_violation, fmt::format("register offset 0x{:x} not 4-byte aligned", offset));
    }
    if (static_cast<std::size_t>(offset) + 4 > length_) {
        throw Error(ErrorKind::bounds_violation,
                    fmt::format("register offset 0x{:x} outside region of 0x{:x} bytes", offset, length_));
    }
}

std::uint32_t MmioRegion::read32(std::uint32_t offset) const {
    check_access(offset);
    return backing_->read32(offset);
}

void MmioRegion::write32(std::uint32_t offset, std::uint32_t value) const {
    check_access(offset);
    backing_->write32(offset, value);
}

void MmioRegion::set_flags32(std::uint32_t offset, std::uint32_t mask) const {
    check_access(offset);
    backing_->write32(offset, backing_->read32(offset) | mask);
}

void MmioRegion::clear_flags32(std::uint32_t offset, std::uint32_t mask) const {
    check_access(offset);
    backing_->write32(offset, backing_->read32(offset) & ~mask);
}

void MmioRegion::wait_set32(std::uint32_t offset, std::uint32_t mask, std::chrono::nanoseconds timeout) const {
    wait_for(offset, mask, true, timeout);
}

void MmioRegion::wait_clear32(std::uint32_t offset, std::uint32_t mask, std::chrono::nanoseconds timeout) const {
    wait_for(offset, mask, false, timeout);
}

void MmioRegion::wait_for(std::uint32_t offset, std::uint32_t mask, bool want_set,
                          std::chrono::nanoseconds timeout) const {
    check_access(offset);
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + timeout;
    for (;;) {
        const std::uint32_t masked = backing_->read32(offset) & mask;
        if (want_set ? masked == mask : masked == 0) {
            return;
        }
        if (clock::now() >= deadline) {
            throw DeviceTimeout(offset, mask, want_set);
        }
        const auto spin_until = clock::now() + poll_interval_;
        while (clock::now() < spin_until) {
            std::this_thread::yield();
        }
    }
}

} // namespace ixy
