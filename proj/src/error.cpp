#include "ixy/error.hpp"

#include <fmt/core.h>

#include "ixy/checked.hpp"

namespace ixy {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::bounds_violation: return "bounds violation";
    case ErrorKind::alignment_violation: return "alignment violation";
    case ErrorKind::device_timeout: return "device timeout";
    case ErrorKind::pool_mismatch: return "pool mismatch";
    case ErrorKind::double_free: return "double free";
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::not_found: return "not found";
    case ErrorKind::already_open: return "already open";
    case ErrorKind::permission_denied: return "permission denied";
    case ErrorKind::allocation_failure: return "allocation failure";
    case ErrorKind::translation_unavailable: return "translation unavailable";
    case ErrorKind::model_fault: return "model fault";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::empty_handle: return "empty handle";
    case ErrorKind::io_error: return "i/o error";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(kind), message)), kind_(kind) {}

DeviceTimeout::DeviceTimeout(std::uint32_t offset, std::uint32_t mask, bool wait_for_set)
    : Error(ErrorKind::device_timeout,
            fmt::format("register 0x{:05x} mask 0x{:08x} never became {}", offset, mask,
                        wait_for_set ? "set" : "clear")),
      offset_(offset), mask_(mask) {}

std::uint8_t decrement_ttl(std::span<std::uint8_t> frame, std::size_t offset) {
    if (offset >= frame.size()) {
        throw Error(ErrorKind::bounds_violation, fmt::format("ttl offset {} outside frame of {}", offset, frame.size()));
    }
    frame[offset] = checked_sub<std::uint8_t>(frame[offset], 1);
    return frame[offset];
}

} // namespace ixy
