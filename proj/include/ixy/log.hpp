#pragma once

#include <fmt/core.h>

#include <atomic>
#include <cstdio>
#include <utility>

namespace ixy::log {

enum class Level { info, warn, off };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::info};
    return level;
}

inline void set_level(Level level) { threshold().store(level, std::memory_order_relaxed); }

template <typename... Args>
void warn(fmt::format_string<Args...> format, Args&&... args) {
    if (threshold().load(std::memory_order_relaxed) > Level::warn) {
        return;
    }
    fmt::print(stderr, "[WARN ] {}\n", fmt::format(format, std::forward<Args>(args)...));
}

template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
    if (threshold().load(std::memory_order_relaxed) > Level::info) {
        return;
    }
    fmt::print(stderr, "[INFO ] {}\n", fmt::format(format, std::forward<Args>(args)...));
}

} // namespace ixy::log
