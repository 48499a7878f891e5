// Hardware backend: PCIe BAR0 mapped through sysfs, DMA memory from hugetlbfs
// translated through /proc/self/pagemap. Linux/x86 only, needs root.
//
// Paths used:
//   /sys/bus/pci/devices/<addr>/driver/unbind   detach the kernel driver
//   /sys/bus/pci/devices/<addr>/config          PCI command register (bus master bit)
//   /sys/bus/pci/devices/<addr>/resource0       BAR0 register space
//   $IXY_HUGEPAGE_DIR (default /mnt/huge)       hugetlbfs mount for DMA memory
//   /proc/self/pagemap                          virtual to physical translation
#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include <fmt/core.h>

#include "ixy/error.hpp"
#include "ixy/platform.hpp"

namespace ixy::detail {

namespace {

constexpr std::size_t huge_page_size = std::size_t{1} << 21;
constexpr std::uint16_t pci_command_offset = 4;
constexpr std::uint16_t pci_command_bus_master = 1u << 2;

std::atomic<std::uint32_t> huge_page_id{0};

std::string sysfs_path(const std::string& pci_address, const char* leaf) {
    return fmt::format("/sys/bus/pci/devices/{}/{}", pci_address, leaf);
}

[[noreturn]] void fail_errno(const std::string& what) {
    const int err = errno;
    const ErrorKind kind = (err == EACCES || err == EPERM) ? ErrorKind::permission_denied
                           : err == ENOENT                 ? ErrorKind::not_found
                                                           : ErrorKind::io_error;
    throw Error(kind, fmt::format("{}: {}", what, std::strerror(err)));
}

class FileDescriptor {
public:
    explicit FileDescriptor(int fd) : fd_(fd) {}
    FileDescriptor(const FileDescriptor&) = delete;
    FileDescriptor& operator=(const FileDescriptor&) = delete;
    ~FileDescriptor() {
        if (fd_ >= 0) {
            ::close(fd_);
        }
    }
    [[nodiscard]] int get() const noexcept { return fd_; }

private:
    int fd_;
};

void unbind_kernel_driver(const std::string& pci_address) {
    const std::string path = sysfs_path(pci_address, "driver/unbind");
    FileDescriptor fd(::open(path.c_str(), O_WRONLY));
    if (fd.get() < 0) {
        return; // no driver bound
    }
    if (::write(fd.get(), pci_address.c_str(), pci_address.size()) != static_cast<ssize_t>(pci_address.size())) {
        fail_errno("failed to unbind kernel driver of " + pci_address);
    }
}

std::uint64_t virt_to_phys(void* virt) {
    const long page_size = ::sysconf(_SC_PAGESIZE);
    FileDescriptor fd(::open("/proc/self/pagemap", O_RDONLY));
    if (fd.get() < 0) {
        fail_errno("failed to open /proc/self/pagemap");
    }
    const auto address = reinterpret_cast<std::uintptr_t>(virt);
    const off_t entry_offset = static_cast<off_t>(address / static_cast<std::uintptr_t>(page_size) * sizeof(std::uint64_t));
    std::uint64_t entry = 0;
    if (::pread(fd.get(), &entry, sizeof(entry), entry_offset) != static_cast<ssize_t>(sizeof(entry))) {
        fail_errno("failed to read /proc/self/pagemap");
    }
    const std::uint64_t frame = entry & ((std::uint64_t{1} << 55) - 1);
    if (frame == 0) {
        throw Error(ErrorKind::translation_unavailable, "pagemap returned no frame (are we root?)");
    }
    return frame * static_cast<std::uint64_t>(page_size) + address % static_cast<std::uintptr_t>(page_size);
}

class UioRegisters : public RegisterBacking {
public:
    UioRegisters(void* base, std::size_t length)
        : base_(base), length_(length),
          words_(static_cast<volatile std::uint32_t*>(base), length / sizeof(std::uint32_t)) {}
    UioRegisters(const UioRegisters&) = delete;
    UioRegisters& operator=(const UioRegisters&) = delete;
    ~UioRegisters() override { ::munmap(base_, length_); }

    // Offsets were validated by MmioRegion; indexing is still checked.
    std::uint32_t read32(std::uint32_t offset) override { return words_[offset / 4]; }
    void write32(std::uint32_t offset, std::uint32_t value) override { words_[offset / 4] = value; }

private:
    void* base_;
    std::size_t length_;
    std::span<volatile std::uint32_t> words_;
};

class UioBackend : public DeviceBackend {
public:
    explicit UioBackend(std::string pci_address) : pci_address_(std::move(pci_address)) {
        struct stat st {};
        if (::stat(sysfs_path(pci_address_, "").c_str(), &st) != 0) {
            fail_errno("no PCIe device at " + pci_address_);
        }
        unbind_kernel_driver(pci_address_);
        const std::string resource = sysfs_path(pci_address_, "resource0");
        FileDescriptor fd(::open(resource.c_str(), O_RDWR));
        if (fd.get() < 0) {
            fail_errno("failed to open " + resource);
        }
        if (::fstat(fd.get(), &st) != 0) {
            fail_errno("failed to stat " + resource);
        }
        const auto length = static_cast<std::size_t>(st.st_size);
        void* base = ::mmap(nullptr, length, PROT_READ | PROT_WRITE, MAP_SHARED, fd.get(), 0);
        if (base == MAP_FAILED) {
            fail_errno("failed to mmap " + resource);
        }
        registers_ = std::make_shared<UioRegisters>(base, length);
        length_ = length;
    }

    std::shared_ptr<RegisterBacking> registers() override { return registers_; }
    std::size_t register_length() const override { return length_; }

    void set_bus_master(bool enabled) override {
        const std::string path = sysfs_path(pci_address_, "config");
        FileDescriptor fd(::open(path.c_str(), O_RDWR));
        if (fd.get() < 0) {
            fail_errno("failed to open " + path);
        }
        std::uint16_t command = 0;
        if (::pread(fd.get(), &command, sizeof(command), pci_command_offset) != sizeof(command)) {
            fail_errno("failed to read PCI command register");
        }
        command = enabled ? (command | pci_command_bus_master) : (command & ~pci_command_bus_master);
        if (::pwrite(fd.get(), &command, sizeof(command), pci_command_offset) != sizeof(command)) {
            fail_errno("failed to write PCI command register");
        }
    }

    std::shared_ptr<DmaRegion> allocate_dma(std::size_t bytes, bool require_contiguous) override {
        const std::size_t rounded = (bytes + huge_page_size - 1) / huge_page_size * huge_page_size;
        if (require_contiguous && rounded > huge_page_size) {
            throw Error(ErrorKind::allocation_failure, "contiguous dma memory is limited to one 2 MiB huge page");
        }
        const char* dir = std::getenv("IXY_HUGEPAGE_DIR");
        const std::string path = fmt::format("{}/ixy-{}-{}", dir != nullptr ? dir : "/mnt/huge", ::getpid(),
                                             huge_page_id.fetch_add(1));
        FileDescriptor fd(::open(path.c_str(), O_CREAT | O_RDWR, S_IRWXU));
        if (fd.get() < 0) {
            fail_errno("failed to open hugetlbfs file " + path + "; mount hugetlbfs and set IXY_HUGEPAGE_DIR");
        }
        if (::ftruncate(fd.get(), static_cast<off_t>(rounded)) != 0) {
            ::unlink(path.c_str());
            fail_errno("failed to size huge page file; reserve huge pages via /sys/kernel/mm/hugepages");
        }
        void* base = ::mmap(nullptr, rounded, PROT_READ | PROT_WRITE, MAP_SHARED | MAP_HUGETLB, fd.get(), 0);
        ::unlink(path.c_str());
        if (base == MAP_FAILED) {
            fail_errno("failed to mmap huge page memory");
        }
        if (::mlock(base, rounded) != 0) {
            ::munmap(base, rounded);
            fail_errno("failed to mlock dma memory");
        }
        std::shared_ptr<void> storage(base, [rounded](void* p) { ::munmap(p, rounded); });
        std::vector<std::uint64_t> pages(rounded / huge_page_size);
        auto* bytes_base = static_cast<std::uint8_t*>(base);
        for (std::size_t i = 0; i < pages.size(); ++i) {
            pages[i] = virt_to_phys(bytes_base + i * huge_page_size);
        }
        return std::make_shared<DmaRegion>(base, bytes, AddressTranslation(huge_page_size, std::move(pages)),
                                           std::move(storage));
    }

private:
    std::string pci_address_;
    std::shared_ptr<UioRegisters> registers_;
    std::size_t length_ = 0;
};

} // namespace

std::shared_ptr<DeviceBackend> open_uio_backend(const std::string& pci_address) {
    return std::make_shared<UioBackend>(pci_address);
}

} // namespace ixy::detail
