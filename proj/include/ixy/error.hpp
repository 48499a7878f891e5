#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ixy {

enum class ErrorKind {
    bounds_violation,
    alignment_violation,
    device_timeout,
    pool_mismatch,
    double_free,
    invalid_argument,
    not_found,
    already_open,
    permission_denied,
    allocation_failure,
    translation_unavailable,
    model_fault,
    overflow,
    empty_handle,
    io_error,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure the library reports is an ixy::Error carrying a kind, so tests
// and the CLI can branch on the category without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Raised by wait_set32/wait_clear32 when the device never reaches the expected state.
class DeviceTimeout : public Error {
public:
    DeviceTimeout(std::uint32_t offset, std::uint32_t mask, bool wait_for_set);

    [[nodiscard]] std::uint32_t offset() const noexcept { return offset_; }
    [[nodiscard]] std::uint32_t mask() const noexcept { return mask_; }

private:
    std::uint32_t offset_;
    std::uint32_t mask_;
};

} // namespace ixy
