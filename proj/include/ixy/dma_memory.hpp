#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace ixy {

class DeviceHandle;
class Mempool;
class PacketBuffer;

// Page-granular mapping from offsets inside a DMA region to device addresses.
class AddressTranslation {
public:
    AddressTranslation(std::size_t page_size, std::vector<std::uint64_t> page_addresses);

    [[nodiscard]] std::size_t page_size() const noexcept { return page_size_; }
    [[nodiscard]] std::size_t page_count() const noexcept { return pages_.size(); }
    [[nodiscard]] std::uint64_t translate(std::size_t offset) const;
    // True if consecutive pages are consecutive in device address space.
    [[nodiscard]] bool contiguous() const noexcept;

private:
    std::size_t page_size_;
    std::vector<std::uint64_t> pages_;
};

/**
 * Pinned, device-visible memory window.
 *
 * The constructor is the only place a raw pointer becomes a span; every later
 * access (byte copies, 32-bit descriptor words) goes through checked indexing.
 * `storage` keeps the underlying allocation alive for the life of the region.
 */
class DmaRegion {
public:
    DmaRegion(void* base, std::size_t length, AddressTranslation translation, std::shared_ptr<void> storage);

    DmaRegion(const DmaRegion&) = delete;
    DmaRegion& operator=(const DmaRegion&) = delete;

    [[nodiscard]] std::size_t length() const noexcept { return bytes_.size(); }
    [[nodiscard]] std::uint64_t device_address() const { return translation_.translate(0); }
    [[nodiscard]] const AddressTranslation& translation() const noexcept { return translation_; }

    // Device address of `offset`; offset must be < length().
    [[nodiscard]] std::uint64_t translate(std::size_t offset) const;

    [[nodiscard]] std::span<std::uint8_t> bytes() noexcept { return bytes_; }
    [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
    // Checked sub-window.
    [[nodiscard]] std::span<std::uint8_t> window(std::size_t offset, std::size_t count);

    // Descriptor words are accessed atomically so a device thread and a driver
    // thread can share ring memory.
    [[nodiscard]] std::uint32_t load32(std::size_t offset,
                                       std::memory_order order = std::memory_order_relaxed) const;
    void store32(std::size_t offset, std::uint32_t value, std::memory_order order = std::memory_order_relaxed);
    [[nodiscard]] std::uint64_t load64(std::size_t offset) const;
    void store64(std::size_t offset, std::uint64_t value);

private:
    [[nodiscard]] std::size_t word_index(std::size_t offset) const;

    std::shared_ptr<void> storage_;
    std::span<std::uint8_t> bytes_;
    std::span<std::uint32_t> words_;
    AddressTranslation translation_;
};

namespace testing {
// Builds a handle for `index` without going through alloc. Test harnesses use
// it to replay consumed handles and check that the pool notices. Without a
// generation the handle copies the current one, i.e. aliases a live buffer.
PacketBuffer forge_handle(const std::shared_ptr<Mempool>& pool, std::uint32_t index);
PacketBuffer forge_handle(const std::shared_ptr<Mempool>& pool, std::uint32_t index, std::uint32_t generation);
} // namespace testing

/**
 * Exclusive-custody handle to one mempool entry.
 *
 * Move-only. A moved-from or consumed handle is empty and every data access on
 * it throws. Dropping a non-empty handle returns the entry to its pool.
 */
class PacketBuffer {
public:
    PacketBuffer() noexcept = default;
    PacketBuffer(PacketBuffer&& other) noexcept;
    PacketBuffer& operator=(PacketBuffer&& other) noexcept;
    PacketBuffer(const PacketBuffer&) = delete;
    PacketBuffer& operator=(const PacketBuffer&) = delete;
    ~PacketBuffer();

    [[nodiscard]] bool empty() const noexcept { return pool_ == nullptr; }
    explicit operator bool() const noexcept { return !empty(); }

    [[nodiscard]] std::uint32_t pool_id() const;
    [[nodiscard]] std::uint32_t index() const;
    // Allocation count of this entry when the handle was issued.
    [[nodiscard]] std::uint32_t generation() const;
    [[nodiscard]] std::uint64_t device_address() const;
    [[nodiscard]] std::size_t capacity() const;
    [[nodiscard]] std::size_t size() const;
    void resize(std::size_t used_length);

    // Whole entry and the used prefix.
    [[nodiscard]] std::span<std::uint8_t> data();
    [[nodiscard]] std::span<const std::uint8_t> data() const;
    [[nodiscard]] std::span<const std::uint8_t> frame() const;

    [[nodiscard]] std::uint8_t& at(std::size_t offset);
    [[nodiscard]] std::uint8_t at(std::size_t offset) const;
    void write(std::size_t offset, std::span<const std::uint8_t> src);
    void read(std::size_t offset, std::span<std::uint8_t> dst) const;
    [[nodiscard]] std::vector<std::uint8_t> read(std::size_t offset, std::size_t count) const;

private:
    friend class Mempool;
    friend PacketBuffer testing::forge_handle(const std::shared_ptr<Mempool>&, std::uint32_t);
    friend PacketBuffer testing::forge_handle(const std::shared_ptr<Mempool>&, std::uint32_t, std::uint32_t);

    PacketBuffer(std::shared_ptr<Mempool> pool, std::uint32_t index, std::uint32_t generation,
                 std::uint64_t device_address, std::span<std::uint8_t> data) noexcept;

    void require_custody() const;
    void check_range(std::size_t offset, std::size_t count) const;

    std::shared_ptr<Mempool> pool_;
    std::uint32_t index_ = 0;
    std::uint32_t generation_ = 0;
    std::uint32_t used_length_ = 0;
    std::uint64_t device_address_ = 0;
    std::span<std::uint8_t> data_;
};

/**
 * Fixed-capacity pool of DMA-capable packet buffers.
 *
 * Free entries form a LIFO stack. A free bitmap backs the stack and every entry
 * carries an allocation generation, so a replayed handle is detected as a
 * double free whether or not the entry was handed out again in between.
 * Single-threaded per pool.
 */
class Mempool : public std::enable_shared_from_this<Mempool> {
    struct Token {};

public:
    static constexpr std::size_t default_entry_size = 2048;

    static std::shared_ptr<Mempool> create(std::shared_ptr<DmaRegion> region, std::size_t capacity,
                                           std::size_t entry_size = default_entry_size);

    Mempool(Token, std::shared_ptr<DmaRegion> region, std::size_t capacity, std::size_t entry_size);

    [[nodiscard]] std::uint32_t id() const noexcept { return id_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::size_t entry_size() const noexcept { return entry_size_; }
    [[nodiscard]] std::size_t free_count() const noexcept { return free_stack_.size(); }
    [[nodiscard]] std::size_t outstanding() const noexcept { return capacity_ - free_stack_.size(); }
    [[nodiscard]] bool is_free(std::uint32_t index) const;
    [[nodiscard]] std::uint64_t device_address_of(std::uint32_t index) const;
    [[nodiscard]] const DmaRegion& region() const noexcept { return *region_; }

    // Empty handle when exhausted.
    [[nodiscard]] PacketBuffer alloc();
    // Appends min(n, free_count()) buffers to `out`; returns how many.
    std::size_t alloc_batch(std::size_t n, std::vector<PacketBuffer>& out);
    [[nodiscard]] std::vector<PacketBuffer> alloc_batch(std::size_t n);

    // Consumes `buf`. Throws pool_mismatch / double_free / empty_handle; the
    // handle is emptied even when an error is thrown.
    void free(PacketBuffer&& buf);

    // Double frees detected while dropping handles (cannot throw from a destructor).
    [[nodiscard]] std::size_t dropped_violations() const noexcept { return dropped_violations_; }

private:
    friend class PacketBuffer;
    friend PacketBuffer testing::forge_handle(const std::shared_ptr<Mempool>&, std::uint32_t);
    friend PacketBuffer testing::forge_handle(const std::shared_ptr<Mempool>&, std::uint32_t, std::uint32_t);

    PacketBuffer make_handle(std::uint32_t index, std::uint32_t generation);
    void release(std::uint32_t index, std::uint32_t generation);
    void release_on_drop(std::uint32_t index, std::uint32_t generation) noexcept;

    std::shared_ptr<DmaRegion> region_;
    std::size_t capacity_;
    std::size_t entry_size_;
    std::uint32_t id_;
    std::vector<std::uint32_t> free_stack_;
    std::vector<bool> free_bitmap_;
    std::vector<std::uint32_t> generations_;
    std::size_t dropped_violations_ = 0;
};

// Allocates backing DMA memory on `device` and builds a pool on it.
std::shared_ptr<Mempool> create_mempool(DeviceHandle& device, std::size_t capacity,
                                        std::size_t entry_size = Mempool::default_entry_size);

// Frees every buffer in `bufs` back to its own pool and clears the vector.
void free_all(std::vector<PacketBuffer>& bufs);

} // namespace ixy
