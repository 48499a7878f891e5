#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>

#include "ixy/error.hpp"

namespace ixy {

__extension__ using uint128 = unsigned __int128;

template <std::integral T>
[[nodiscard]] T checked_add(T a, T b) {
    T result;
    if (__builtin_add_overflow(a, b, &result)) {
        throw Error(ErrorKind::overflow, "integer overflow in addition");
    }
    return result;
}

template <std::integral T>
[[nodiscard]] T checked_sub(T a, T b) {
    T result;
    if (__builtin_sub_overflow(a, b, &result)) {
        throw Error(ErrorKind::overflow, "integer overflow in subtraction");
    }
    return result;
}

template <std::integral T>
[[nodiscard]] T checked_mul(T a, T b) {
    T result;
    if (__builtin_mul_overflow(a, b, &result)) {
        throw Error(ErrorKind::overflow, "integer overflow in multiplication");
    }
    return result;
}

template <std::unsigned_integral T>
[[nodiscard]] constexpr T wrapping_add(T a, T b) noexcept {
    return static_cast<T>(a + b);
}

template <std::unsigned_integral T>
[[nodiscard]] constexpr T wrapping_sub(T a, T b) noexcept {
    return static_cast<T>(a - b);
}

// Arithmetic policies for the forwarding hot path. The forwarder is templated on
// one of these so the bench can compare both instantiations in one binary.
struct CheckedArith {
    static constexpr bool checks_enabled = true;
    template <std::integral T>
    static T add(T a, T b) { return checked_add(a, b); }
    template <std::integral T>
    static T sub(T a, T b) { return checked_sub(a, b); }
};

struct WrappingArith {
    static constexpr bool checks_enabled = false;
    template <std::unsigned_integral T>
    static constexpr T add(T a, T b) noexcept { return wrapping_add(a, b); }
    template <std::unsigned_integral T>
    static constexpr T sub(T a, T b) noexcept { return wrapping_sub(a, b); }
};

#ifndef IXY_OVERFLOW_CHECKS
#define IXY_OVERFLOW_CHECKS 1
#endif

#if IXY_OVERFLOW_CHECKS
using HotPathArith = CheckedArith;
#else
using HotPathArith = WrappingArith;
#endif

// Ring index arithmetic: ring sizes are powers of two, wrap is explicit.
[[nodiscard]] constexpr std::uint32_t ring_advance(std::uint32_t index, std::uint32_t ring_size) noexcept {
    return (index + 1) & (ring_size - 1);
}

[[nodiscard]] constexpr std::uint32_t ring_retreat(std::uint32_t index, std::uint32_t ring_size) noexcept {
    return (index - 1) & (ring_size - 1);
}

// Slots from `from` up to (excluding) `to`, going forward around the ring.
[[nodiscard]] constexpr std::uint32_t ring_distance(std::uint32_t from, std::uint32_t to,
                                                    std::uint32_t ring_size) noexcept {
    return (to - from) & (ring_size - 1);
}

// Decrements a time-to-live style byte in place; a zero field is an error, not 255.
std::uint8_t decrement_ttl(std::span<std::uint8_t> frame, std::size_t offset);

} // namespace ixy
