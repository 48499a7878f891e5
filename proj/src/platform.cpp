// All raw memory handling of the model backend lives here: page-aligned
// allocations and their registration in the host address space.
#include "ixy/platform.hpp"

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <utility>

#include <fmt/core.h>

#include "ixy/error.hpp"
#include "ixy/ixgbe_regs.hpp"

namespace ixy {

namespace {

constexpr std::size_t model_page_size = 4096;

bool all_hex(std::string_view s) {
    for (const char c : s) {
        if (!std::isxdigit(static_cast<unsigned char>(c))) {
            return false;
        }
    }
    return !s.empty();
}

[[noreturn]] void bad_spec(std::string_view text) {
    throw Error(ErrorKind::invalid_argument,
                fmt::format("bad device spec '{}', expected model:<n> or <domain>:<bus>:<dev>.<fn>", text));
}

} // namespace

DeviceSpec DeviceSpec::parse(std::string_view text) {
    DeviceSpec spec;
    if (text.substr(0, 6) == "model:") {
        const std::string_view digits = text.substr(6);
        if (digits.empty() || digits.size() > 9) {
            bad_spec(text);
        }
        std::uint32_t n = 0;
        for (const char c : digits) {
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                bad_spec(text);
            }
            n = n * 10 + static_cast<std::uint32_t>(c - '0');
        }
        spec.backend = Backend::model;
        spec.model_index = n;
        return spec;
    }
    // dddd:bb:dd.f
    if (text.size() != 12 || text[4] != ':' || text[7] != ':' || text[10] != '.' || !all_hex(text.substr(0, 4)) ||
        !all_hex(text.substr(5, 2)) || !all_hex(text.substr(8, 2)) || !all_hex(text.substr(11, 1)) ||
        text[11] > '7') {
        bad_spec(text);
    }
    spec.backend = Backend::uio;
    spec.pci_address = std::string(text);
    return spec;
}

std::string DeviceSpec::to_string() const {
    if (backend == Backend::model) {
        return fmt::format("model:{}", model_index);
    }
    return pci_address;
}

// Model backend

struct Platform::ModelAllocator {
    std::shared_ptr<HostMemory> host;
    std::size_t limit;
    std::mutex mutex;
    std::size_t allocated = 0;

    static std::shared_ptr<DmaRegion> allocate(const std::shared_ptr<ModelAllocator>& self, std::size_t bytes) {
        auto& [host, limit, mutex, allocated] = *self;
        if (bytes == 0) {
            throw Error(ErrorKind::invalid_argument, "dma allocation of zero bytes");
        }
        const std::size_t rounded = (bytes + model_page_size - 1) / model_page_size * model_page_size;
        {
            std::lock_guard lock(mutex);
            if (rounded > limit - allocated) {
                throw Error(ErrorKind::allocation_failure,
                            fmt::format("out of model dma memory ({} of {} bytes in use)", allocated, limit));
            }
            allocated += rounded;
        }
        void* raw = std::aligned_alloc(model_page_size, rounded);
        if (raw == nullptr) {
            throw Error(ErrorKind::allocation_failure, "aligned_alloc failed");
        }
        std::memset(raw, 0, rounded);
        std::shared_ptr<void> storage(raw, [self, rounded](void* p) {
            std::free(p);
            std::lock_guard lock(self->mutex);
            self->allocated -= rounded;
        });
        const std::uint64_t sequence = host->next_sequence();
        std::vector<std::uint64_t> pages(rounded / model_page_size);
        for (std::size_t i = 0; i < pages.size(); ++i) {
            pages[i] = HostMemory::base_of(sequence) + i * model_page_size;
        }
        auto region = std::make_shared<DmaRegion>(raw, bytes, AddressTranslation(model_page_size, std::move(pages)),
                                                  std::move(storage));
        host->register_region(sequence, region);
        return region;
    }
};

namespace {

class ModelBackend : public detail::DeviceBackend {
public:
    ModelBackend(std::shared_ptr<ModelNic> nic, std::function<std::shared_ptr<DmaRegion>(std::size_t)> allocate)
        : nic_(std::move(nic)), allocate_(std::move(allocate)) {}

    std::shared_ptr<RegisterBacking> registers() override { return nic_; }
    std::size_t register_length() const override { return regs::BAR0_LENGTH; }
    std::shared_ptr<DmaRegion> allocate_dma(std::size_t bytes, bool) override { return allocate_(bytes); }
    void set_bus_master(bool enabled) override { nic_->set_bus_master(enabled); }
    std::shared_ptr<ModelNic> model() override { return nic_; }

private:
    std::shared_ptr<ModelNic> nic_;
    std::function<std::shared_ptr<DmaRegion>(std::size_t)> allocate_;
};

} // namespace

// DeviceHandle

DeviceHandle::DeviceHandle(DeviceSpec spec, std::shared_ptr<detail::DeviceBackend> backend,
                           std::shared_ptr<detail::OpenSet> open_set)
    : spec_(std::move(spec)), backend_(std::move(backend)), open_set_(std::move(open_set)),
      registers_(backend_->registers(), backend_->register_length()) {}

DeviceHandle::~DeviceHandle() {
    if (open_set_) {
        std::lock_guard lock(open_set_->mutex);
        open_set_->identities.erase(spec_.to_string());
    }
}

void DeviceHandle::claim_for_driver() {
    if (claimed_) {
        throw Error(ErrorKind::already_open, fmt::format("{} is already driven", identity()));
    }
    claimed_ = true;
}

// Platform

Platform::Platform() : Platform(std::make_shared<VirtualClock>()) {}

Platform::Platform(std::shared_ptr<VirtualClock> clock, std::size_t model_dma_limit)
    : clock_(std::move(clock)), host_(std::make_shared<HostMemory>()),
      allocator_(std::make_shared<ModelAllocator>()), open_set_(std::make_shared<detail::OpenSet>()) {
    allocator_->host = host_;
    allocator_->limit = model_dma_limit;
}

std::shared_ptr<ModelNic> Platform::add_model(ModelConfig config) {
    config.instance = static_cast<std::uint32_t>(models_.size());
    models_.push_back(std::make_shared<ModelNic>(std::move(config), host_, clock_));
    return models_.back();
}

std::shared_ptr<ModelNic> Platform::model(std::uint32_t index) const {
    if (index >= models_.size()) {
        throw Error(ErrorKind::not_found, fmt::format("no model:{} registered", index));
    }
    return models_[index];
}

DeviceHandle Platform::open_device(std::string_view text) {
    const DeviceSpec spec = DeviceSpec::parse(text);
    const std::string identity = spec.to_string();
    std::shared_ptr<detail::DeviceBackend> backend;
    if (spec.backend == Backend::model) {
        auto nic = model(spec.model_index);
        backend = std::make_shared<ModelBackend>(
            std::move(nic), [allocator = allocator_](std::size_t bytes) { return ModelAllocator::allocate(allocator, bytes); });
    }
    {
        std::lock_guard lock(open_set_->mutex);
        if (!open_set_->identities.insert(identity).second) {
            throw Error(ErrorKind::already_open, fmt::format("{} is already open", identity));
        }
    }
    try {
        if (spec.backend == Backend::uio) {
            backend = detail::open_uio_backend(spec.pci_address);
        }
        // Quiesce until a driver initializes the device.
        backend->set_bus_master(false);
        return DeviceHandle(spec, std::move(backend), open_set_);
    } catch (...) {
        std::lock_guard lock(open_set_->mutex);
        open_set_->identities.erase(identity);
        throw;
    }
}

std::shared_ptr<DmaRegion> allocate_dma(DeviceHandle& device, std::size_t bytes, bool require_contiguous) {
    if (bytes == 0) {
        throw Error(ErrorKind::invalid_argument, "dma allocation of zero bytes");
    }
    auto region = device.backend_->allocate_dma(bytes, require_contiguous);
    if (require_contiguous && !region->translation().contiguous()) {
        throw Error(ErrorKind::translation_unavailable, "could not obtain device-contiguous memory");
    }
    return region;
}

std::uint64_t translate(const DmaRegion& region, std::size_t offset) {
    return region.translate(offset);
}

} // namespace ixy
