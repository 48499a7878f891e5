#pragma once

#include <doctest.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ixy/device_model.hpp"
#include "ixy/error.hpp"
#include "ixy/ixgbe.hpp"
#include "ixy/platform.hpp"

// Checks that `expr` throws an ixy::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                                                  \
    do {                                                                                       \
        bool ixy_thrown_ = false;                                                              \
        try {                                                                                  \
            static_cast<void>(expr);                                                           \
        } catch (const ixy::Error& ixy_error_) {                                               \
            ixy_thrown_ = true;                                                                \
            CHECK_MESSAGE(ixy_error_.kind() == (expected_kind), ixy::to_string(ixy_error_.kind())); \
        }                                                                                      \
        CHECK_MESSAGE(ixy_thrown_, "expected " #expected_kind);                                \
    } while (false)

namespace test {

// Frame whose every byte is derived from (seed, position); byte 0..5 unicast.
inline std::vector<std::uint8_t> pattern_frame(std::size_t size, std::uint32_t seed) {
    std::vector<std::uint8_t> f(size);
    for (std::size_t i = 0; i < size; ++i) {
        f[i] = static_cast<std::uint8_t>((seed * 131u + i * 7u + (i >> 8)) & 0xFF);
    }
    f[0] &= 0xFE;
    return f;
}

// One model NIC, opened, optionally driven.
struct Rig {
    ixy::Platform platform;
    std::shared_ptr<ixy::ModelNic> nic;
    ixy::DeviceHandle handle;
    std::optional<ixy::IxgbeDevice> dev;

    explicit Rig(ixy::ModelConfig config = {}) : nic(platform.add_model(config)), handle(platform.open_device("model:0")) {}

    ixy::IxgbeDevice& init(ixy::DriverConfig config = {}) {
        config.timeout = std::chrono::milliseconds(200);
        dev.emplace(handle, 1, 1, config);
        return *dev;
    }
};

// Two model NICs with drivers, for forwarding.
struct Pair {
    ixy::Platform platform;
    std::shared_ptr<ixy::ModelNic> nic_a;
    std::shared_ptr<ixy::ModelNic> nic_b;
    ixy::DeviceHandle handle_a;
    ixy::DeviceHandle handle_b;
    std::optional<ixy::IxgbeDevice> a;
    std::optional<ixy::IxgbeDevice> b;

    explicit Pair(ixy::DriverConfig driver = {}, ixy::ModelConfig config = {})
        : nic_a(platform.add_model(config)), nic_b(platform.add_model(config)),
          handle_a(platform.open_device("model:0")), handle_b(platform.open_device("model:1")) {
        a.emplace(handle_a, 1, 1, driver);
        b.emplace(handle_b, 1, 1, driver);
    }
};

inline std::size_t count_kind(const std::vector<ixy::AccessRecord>& log, ixy::AccessKind kind, std::uint64_t address) {
    std::size_t n = 0;
    for (const auto& r : log) {
        n += r.kind == kind && r.address == address;
    }
    return n;
}

} // namespace test
