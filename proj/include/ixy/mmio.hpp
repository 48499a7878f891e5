#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>

namespace ixy {

// Something that answers 32-bit register transactions: a mapped PCIe BAR or a
// ModelNic. Implementations must perform exactly one device access per call.
class RegisterBacking {
public:
    virtual ~RegisterBacking() = default;

    virtual std::uint32_t read32(std::uint32_t offset) = 0;
    virtual void write32(std::uint32_t offset, std::uint32_t value) = 0;
};

/**
 * Bounds-checked window onto device register space.
 *
 * Each read32/write32 call results in exactly one access on the backing; the
 * offset is validated (alignment, then bounds) before the backing is touched.
 * Values are never cached, so polling loops always observe the device.
 */
class MmioRegion {
public:
    static constexpr std::chrono::nanoseconds default_poll_interval{std::chrono::microseconds(10)};

    MmioRegion(std::shared_ptr<RegisterBacking> backing, std::size_t length);

    [[nodiscard]] std::size_t length() const noexcept { return length_; }

    [[nodiscard]] std::uint32_t read32(std::uint32_t offset) const;
    void write32(std::uint32_t offset, std::uint32_t value) const;

    // Read-modify-write: one read and one write on the backing.
    void set_flags32(std::uint32_t offset, std::uint32_t mask) const;
    void clear_flags32(std::uint32_t offset, std::uint32_t mask) const;

    // Poll until (value & mask) == mask, or throw DeviceTimeout.
    void wait_set32(std::uint32_t offset, std::uint32_t mask, std::chrono::nanoseconds timeout) const;
    // Poll until (value & mask) == 0, or throw DeviceTimeout.
    void wait_clear32(std::uint32_t offset, std::uint32_t mask, std::chrono::nanoseconds timeout) const;

    void set_poll_interval(std::chrono::nanoseconds interval) noexcept { poll_interval_ = interval; }
    [[nodiscard]] std::chrono::nanoseconds poll_interval() const noexcept { return poll_interval_; }

private:
    void check_access(std::uint32_t offset) const;
    void wait_for(std::uint32_t offset, std::uint32_t mask, bool want_set, std::chrono::nanoseconds timeout) const;

    std::shared_ptr<RegisterBacking> backing_;
    std::size_t length_;
    std::chrono::nanoseconds poll_interval_{default_poll_interval};
};

} // namespace ixy
