#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ixy/device_model.hpp"
#include "ixy/dma_memory.hpp"
#include "ixy/mmio.hpp"

namespace ixy {

// vfio is reserved; opening a vfio device is not supported.
enum class Backend { model, uio, vfio };

// Device spec grammar: `model:<n>` | `<domain>:<bus>:<dev>.<fn>` (e.g. 0000:02:00.0).
struct DeviceSpec {
    Backend backend = Backend::model;
    std::uint32_t model_index = 0;
    std::string pci_address;

    // Throws invalid_argument on anything that does not match the grammar.
    static DeviceSpec parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;
};

namespace detail {

// What a backend provides behind a DeviceHandle.
class DeviceBackend {
public:
    virtual ~DeviceBackend() = default;
    virtual std::shared_ptr<RegisterBacking> registers() = 0;
    virtual std::size_t register_length() const = 0;
    virtual std::shared_ptr<DmaRegion> allocate_dma(std::size_t bytes, bool require_contiguous) = 0;
    virtual void set_bus_master(bool enabled) = 0;
    virtual std::shared_ptr<ModelNic> model() { return nullptr; }
};

struct OpenSet {
    std::mutex mutex;
    std::set<std::string> identities;
};

std::shared_ptr<DeviceBackend> open_uio_backend(const std::string& pci_address);

} // namespace detail

/**
 * An opened device: register window plus the backend used for DMA allocation.
 * Each device can be open through at most one handle at a time.
 */
class DeviceHandle {
public:
    DeviceHandle(DeviceHandle&&) noexcept = default;
    DeviceHandle& operator=(DeviceHandle&&) noexcept = default;
    DeviceHandle(const DeviceHandle&) = delete;
    DeviceHandle& operator=(const DeviceHandle&) = delete;
    ~DeviceHandle();

    [[nodiscard]] Backend backend() const noexcept { return spec_.backend; }
    [[nodiscard]] const DeviceSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::string identity() const { return spec_.to_string(); }
    [[nodiscard]] const MmioRegion& registers() const noexcept { return registers_; }
    // The software NIC behind a model handle; null for hardware.
    [[nodiscard]] std::shared_ptr<ModelNic> model() const { return backend_->model(); }

    void enable_bus_master() { backend_->set_bus_master(true); }
    // Marks the handle as owned by a driver; a second call throws.
    void claim_for_driver();
    [[nodiscard]] bool claimed() const noexcept { return claimed_; }

private:
    friend class Platform;
    friend std::shared_ptr<DmaRegion> allocate_dma(DeviceHandle&, std::size_t, bool);

    DeviceHandle(DeviceSpec spec, std::shared_ptr<detail::DeviceBackend> backend,
                 std::shared_ptr<detail::OpenSet> open_set);

    DeviceSpec spec_;
    std::shared_ptr<detail::DeviceBackend> backend_;
    std::shared_ptr<detail::OpenSet> open_set_;
    MmioRegion registers_;
    bool claimed_ = false;
};

/**
 * Device discovery and DMA allocation. Holds the registered model NICs, the
 * host address space they DMA into and the virtual clock they share.
 */
class Platform {
public:
    static constexpr std::size_t default_model_dma_limit = std::size_t{1} << 30;

    Platform();
    explicit Platform(std::shared_ptr<VirtualClock> clock, std::size_t model_dma_limit = default_model_dma_limit);

    // Registers a model NIC as `model:<n>`, n = number of models added before it.
    std::shared_ptr<ModelNic> add_model(ModelConfig config = {});
    [[nodiscard]] std::shared_ptr<ModelNic> model(std::uint32_t index) const;
    [[nodiscard]] std::size_t model_count() const noexcept { return models_.size(); }

    DeviceHandle open_device(std::string_view spec);

    [[nodiscard]] const std::shared_ptr<HostMemory>& host() const noexcept { return host_; }
    [[nodiscard]] const std::shared_ptr<VirtualClock>& clock() const noexcept { return clock_; }

private:
    struct ModelAllocator;

    std::shared_ptr<VirtualClock> clock_;
    std::shared_ptr<HostMemory> host_;
    std::shared_ptr<ModelAllocator> allocator_;
    std::shared_ptr<detail::OpenSet> open_set_;
    std::vector<std::shared_ptr<ModelNic>> models_;
};

// Pinned, translated DMA memory for `device`; length is exactly `bytes`.
std::shared_ptr<DmaRegion> allocate_dma(DeviceHandle& device, std::size_t bytes, bool require_contiguous);

// Device address of `offset` within `region`.
std::uint64_t translate(const DmaRegion& region, std::size_t offset);

} // namespace ixy
