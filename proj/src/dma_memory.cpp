#include "ixy/dma_memory.hpp"

#include <algorithm>
#include <utility>

#include <fmt/core.h>

#include "ixy/checked.hpp"
#include "ixy/error.hpp"
#include "ixy/log.hpp"
#include "ixy/platform.hpp"

namespace ixy {

namespace {

constexpr std::size_t descriptor_alignment = 64;
constexpr std::size_t page_alignment = 4096;

std::atomic<std::uint32_t> next_pool_id{1};

} // namespace

AddressTranslation::AddressTranslation(std::size_t page_size, std::vector<std::uint64_t> page_addresses)
    : page_size_(page_size), pages_(std::move(page_addresses)) {
    if (page_size_ == 0 || (page_size_ & (page_size_ - 1)) != 0) {
        throw Error(ErrorKind::invalid_argument, fmt::format("page size {} is not a power of two", page_size_));
    }
    if (pages_.empty()) {
        throw Error(ErrorKind::translation_unavailable, "translation without pages");
    }
}

std::uint64_t AddressTranslation::translate(std::size_t offset) const {
    const std::size_t page = offset / page_size_;
    if (page >= pages_.size()) {
        throw Error(ErrorKind::bounds_violation, fmt::format("offset {} beyond translated pages", offset));
    }
    return pages_[page] + offset % page_size_;
}

bool AddressTranslation::contiguous() const noexcept {
    for (std::size_t i = 1; i < pages_.size(); ++i) {
        if (pages_[i] != pages_[i - 1] + page_size_) {
            return false;
        }
    }
    return true;
}

DmaRegion::DmaRegion(void* base, std::size_t length, AddressTranslation translation, std::shared_ptr<void> storage)
    : storage_(std::move(storage)), translation_(std::move(translation)) {
    if (base == nullptr || length == 0) {
        throw Error(ErrorKind::invalid_argument, "dma region needs a base and a non-zero length");
    }
    if (reinterpret_cast<std::uintptr_t>(base) % page_alignment != 0) {
        throw Error(ErrorKind::alignment_violation, "dma region base is not page aligned");
    }
    if (translation_.page_count() * translation_.page_size() < length) {
        throw Error(ErrorKind::translation_unavailable, "translation does not cover the region");
    }
    // The only place where the raw allocation becomes addressable memory; the
    // caller vouches that [base, base + length) is mapped and pinned.
    bytes_ = std::span<std::uint8_t>(static_cast<std::uint8_t*>(base), length);
    words_ = std::span<std::uint32_t>(static_cast<std::uint32_t*>(base), length / 4);
}

std::uint64_t DmaRegion::translate(std::size_t offset) const {
    if (offset >= length()) {
        throw Error(ErrorKind::bounds_violation,
                    fmt::format("translate offset {} outside region of {} bytes", offset, length()));
    }
    return translation_.translate(offset);
}

std::span<std::uint8_t> DmaRegion::window(std::size_t offset, std::size_t count) {
    if (offset > length() || count > length() - offset) {
        throw Error(ErrorKind::bounds_violation,
                    fmt::format("window [{}, +{}) outside region of {} bytes", offset, count, length()));
    }
    return bytes_.subspan(offset, count);
}

std::size_t DmaRegion::word_index(std::size_t offset) const {
    if (offset % 4 != 0) {
        throw Error(ErrorKind::alignment_violation, fmt::format("word offset {} not aligned", offset));
    }
    if (offset / 4 >= words_.size()) {
        throw Error(ErrorKind::bounds_violation, fmt::format("word offset {} outside region", offset));
    }
    return offset / 4;
}

std::uint32_t DmaRegion::load32(std::size_t offset, std::memory_order order) const {
    return std::atomic_ref<std::uint32_t>(words_[word_index(offset)]).load(order);
}

void DmaRegion::store32(std::size_t offset, std::uint32_t value, std::memory_order order) {
    std::atomic_ref<std::uint32_t>(words_[word_index(offset)]).store(value, order);
}

std::uint64_t DmaRegion::load64(std::size_t offset) const {
    return static_cast<std::uint64_t>(load32(offset)) | static_cast<std::uint64_t>(load32(offset + 4)) << 32;
}

void DmaRegion::store64(std::size_t offset, std::uint64_t value) {
    store32(offset, static_cast<std::uint32_t>(value));
    store32(offset + 4, static_cast<std::uint32_t>(value >> 32));
}

// PacketBuffer

PacketBuffer::PacketBuffer(std::shared_ptr<Mempool> pool, std::uint32_t index, std::uint32_t generation,
                           std::uint64_t device_address, std::span<std::uint8_t> data) noexcept
    : pool_(std::move(pool)), index_(index), generation_(generation),
      used_length_(static_cast<std::uint32_t>(data.size())), device_address_(device_address), data_(data) {}

PacketBuffer::PacketBuffer(PacketBuffer&& other) noexcept
    : pool_(std::move(other.pool_)), index_(other.index_), generation_(other.generation_),
      used_length_(other.used_length_), device_address_(other.device_address_),
      data_(std::exchange(other.data_, {})) {}

PacketBuffer& PacketBuffer::operator=(PacketBuffer&& other) noexcept {
    if (this != &other) {
        if (pool_) {
            pool_->release_on_drop(index_, generation_);
        }
        pool_ = std::move(other.pool_);
        index_ = other.index_;
        generation_ = other.generation_;
        used_length_ = other.used_length_;
        device_address_ = other.device_address_;
        data_ = std::exchange(other.data_, {});
    }
    return *this;
}

PacketBuffer::~PacketBuffer() {
    if (pool_) {
        pool_->release_on_drop(index_, generation_);
    }
}

void PacketBuffer::require_custody() const {
    if (!pool_) {
        throw Error(ErrorKind::empty_handle, "access through an empty or consumed packet buffer handle");
    }
}

void PacketBuffer::check_range(std::size_t offset, std::size_t count) const {
    require_custody();
    if (offset > data_.size() || count > data_.size() - offset) {
        throw Error(ErrorKind::bounds_violation,
                    fmt::format("buffer access [{}, +{}) outside entry of {} bytes", offset, count, data_.size()));
    }
}

std::uint32_t PacketBuffer::pool_id() const {
    require_custody();
    return pool_->id();
}

std::uint32_t PacketBuffer::index() const {
    require_custody();
    return index_;
}

std::uint32_t PacketBuffer::generation() const {
    require_custody();
    return generation_;
}

std::uint64_t PacketBuffer::device_address() const {
    require_custody();
    return device_address_;
}

std::size_t PacketBuffer::capacity() const {
    require_custody();
    return data_.size();
}

std::size_t PacketBuffer::size() const {
    require_custody();
    return used_length_;
}

void PacketBuffer::resize(std::size_t used_length) {
    require_custody();
    if (used_length > data_.size()) {
        throw Error(ErrorKind::bounds_violation,
                    fmt::format("length {} exceeds entry size {}", used_length, data_.size()));
    }
    used_length_ = static_cast<std::uint32_t>(used_length);
}

std::span<std::uint8_t> PacketBuffer::data() {
    require_custody();
    return data_;
}

std::span<const std::uint8_t> PacketBuffer::data() const {
    require_custody();
    return data_;
}

std::span<const std::uint8_t> PacketBuffer::frame() const {
    require_custody();
    return data_.first(used_length_);
}

std::uint8_t& PacketBuffer::at(std::size_t offset) {
    check_range(offset, 1);
    return data_[offset];
}

std::uint8_t PacketBuffer::at(std::size_t offset) const {
    check_range(offset, 1);
    return data_[offset];
}

void PacketBuffer::write(std::size_t offset, std::span<const std::uint8_t> src) {
    check_range(offset, src.size());
    std::copy(src.begin(), src.end(), data_.subspan(offset, src.size()).begin());
}

void PacketBuffer::read(std::size_t offset, std::span<std::uint8_t> dst) const {
    check_range(offset, dst.size());
    const auto src = data_.subspan(offset, dst.size());
    std::copy(src.begin(), src.end(), dst.begin());
}

std::vector<std::uint8_t> PacketBuffer::read(std::size_t offset, std::size_t count) const {
    std::vector<std::uint8_t> out(count);
    read(offset, out);
    return out;
}

// Mempool

std::shared_ptr<Mempool> Mempool::create(std::shared_ptr<DmaRegion> region, std::size_t capacity,
                                         std::size_t entry_size) {
    return std::make_shared<Mempool>(Token{}, std::move(region), capacity, entry_size);
}

Mempool::Mempool(Token, std::shared_ptr<DmaRegion> region, std::size_t capacity, std::size_t entry_size)
    : region_(std::move(region)), capacity_(capacity), entry_size_(entry_size),
      id_(next_pool_id.fetch_add(1, std::memory_order_relaxed)) {
    if (!region_) {
        throw Error(ErrorKind::invalid_argument, "mempool without a dma region");
    }
    if (capacity_ == 0) {
        throw Error(ErrorKind::invalid_argument, "mempool capacity must be positive");
    }
    if (entry_size_ < descriptor_alignment || entry_size_ % descriptor_alignment != 0) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("entry size {} must be a positive multiple of {}", entry_size_, descriptor_alignment));
    }
    if (capacity_ > UINT32_MAX || checked_mul(capacity_, entry_size_) > region_->length()) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("{} x {} bytes does not fit a region of {} bytes", capacity_, entry_size_,
                                region_->length()));
    }
    if (!region_->translation().contiguous() && region_->translation().page_size() % entry_size_ != 0) {
        throw Error(ErrorKind::invalid_argument, "entries would straddle discontiguous pages");
    }
    free_stack_.reserve(capacity_);
    // Highest index at the bottom so the first allocations hand out 0, 1, 2, ...
    for (std::size_t i = capacity_; i > 0; --i) {
        free_stack_.push_back(static_cast<std::uint32_t>(i - 1));
    }
    free_bitmap_.assign(capacity_, true);
    generations_.assign(capacity_, 0);
}

bool Mempool::is_free(std::uint32_t index) const {
    if (index >= capacity_) {
        throw Error(ErrorKind::bounds_violation, fmt::format("buffer index {} outside pool of {}", index, capacity_));
    }
    return free_bitmap_[index];
}

std::uint64_t Mempool::device_address_of(std::uint32_t index) const {
    if (index >= capacity_) {
        throw Error(ErrorKind::bounds_violation, fmt::format("buffer index {} outside pool of {}", index, capacity_));
    }
    return region_->translate(static_cast<std::size_t>(index) * entry_size_);
}

PacketBuffer Mempool::make_handle(std::uint32_t index, std::uint32_t generation) {
    const std::size_t offset = static_cast<std::size_t>(index) * entry_size_;
    return PacketBuffer(shared_from_this(), index, generation, region_->translate(offset),
                        region_->window(offset, entry_size_));
}

PacketBuffer Mempool::alloc() {
    if (free_stack_.empty()) {
        return {};
    }
    const std::uint32_t index = free_stack_.back();
    free_stack_.pop_back();
    free_bitmap_[index] = false;
    // Generations wrap; a replay would have to skip exactly 2^32 allocations.
    generations_[index] = wrapping_add(generations_[index], 1u);
    return make_handle(index, generations_[index]);
}

std::size_t Mempool::alloc_batch(std::size_t n, std::vector<PacketBuffer>& out) {
    const std::size_t count = std::min(n, free_stack_.size());
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(alloc());
    }
    return count;
}

std::vector<PacketBuffer> Mempool::alloc_batch(std::size_t n) {
    std::vector<PacketBuffer> out;
    out.reserve(std::min(n, free_stack_.size()));
    alloc_batch(n, out);
    return out;
}

void Mempool::release(std::uint32_t index, std::uint32_t generation) {
    if (index >= capacity_) {
        throw Error(ErrorKind::bounds_violation, fmt::format("buffer index {} outside pool of {}", index, capacity_));
    }
    if (free_bitmap_[index]) {
        throw Error(ErrorKind::double_free, fmt::format("buffer {} of pool {} is already free", index, id_));
    }
    if (generations_[index] != generation) {
        throw Error(ErrorKind::double_free,
                    fmt::format("stale handle for buffer {} of pool {}: freed and reallocated since", index, id_));
    }
    free_bitmap_[index] = true;
    free_stack_.push_back(index);
}

void Mempool::release_on_drop(std::uint32_t index, std::uint32_t generation) noexcept {
    if (index >= capacity_ || free_bitmap_[index] || generations_[index] != generation) {
        ++dropped_violations_;
        log::warn("dropped handle for buffer {} of pool {} was not in custody", index, id_);
        return;
    }
    free_bitmap_[index] = true;
    free_stack_.push_back(index);
}

void Mempool::free(PacketBuffer&& buf) {
    if (!buf.pool_) {
        throw Error(ErrorKind::empty_handle, "freeing an empty packet buffer handle");
    }
    // Take the handle apart first so it is consumed whatever happens below.
    const std::shared_ptr<Mempool> owner = std::move(buf.pool_);
    const std::uint32_t index = buf.index_;
    const std::uint32_t generation = buf.generation_;
    buf.data_ = {};
    if (owner.get() != this) {
        // The buffer still belongs to its own pool; hand it back there.
        owner->release_on_drop(index, generation);
        throw Error(ErrorKind::pool_mismatch,
                    fmt::format("buffer of pool {} freed into pool {}", owner->id(), id_));
    }
    release(index, generation);
}

namespace testing {

PacketBuffer forge_handle(const std::shared_ptr<Mempool>& pool, std::uint32_t index) {
    if (index >= pool->capacity()) {
        throw Error(ErrorKind::bounds_violation, "forged index outside pool");
    }
    return pool->make_handle(index, pool->generations_[index]);
}

PacketBuffer forge_handle(const std::shared_ptr<Mempool>& pool, std::uint32_t index, std::uint32_t generation) {
    if (index >= pool->capacity()) {
        throw Error(ErrorKind::bounds_violation, "forged index outside pool");
    }
    return pool->make_handle(index, generation);
}

} // namespace testing

std::shared_ptr<Mempool> create_mempool(DeviceHandle& device, std::size_t capacity, std::size_t entry_size) {
    if (capacity == 0) {
        throw Error(ErrorKind::invalid_argument, "mempool capacity must be positive");
    }
    if (entry_size < descriptor_alignment || entry_size % descriptor_alignment != 0) {
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("entry size {} must be a positive multiple of {}", entry_size, descriptor_alignment));
    }
    auto region = allocate_dma(device, checked_mul(capacity, entry_size), false);
    return Mempool::create(std::move(region), capacity, entry_size);
}

void free_all(std::vector<PacketBuffer>& bufs) {
    // Dropping each handle returns it to its own pool.
    bufs.clear();
}

} // namespace ixy
