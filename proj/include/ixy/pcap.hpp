#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ixy/device_model.hpp"

namespace ixy {

// Nanosecond-resolution pcap, Ethernet link type.
class PcapWriter {
public:
    static constexpr std::uint32_t magic = 0xA1B23C4D;

    explicit PcapWriter(const std::string& path);

    // `timestamp_ps` is model virtual time or wall-clock time in picoseconds.
    void write(std::span<const std::uint8_t> frame, std::uint64_t timestamp_ps);
    void flush();

    [[nodiscard]] std::uint64_t records() const noexcept { return records_; }

private:
    void put(const std::string& bytes);

    std::string path_;
    std::ofstream out_;
    std::uint64_t records_ = 0;
};

void write_pcap(const std::string& path, const std::vector<CapturedFrame>& frames);

// Reads back a file produced by PcapWriter; timestamps come back in picoseconds
// truncated to nanoseconds.
[[nodiscard]] std::vector<CapturedFrame> read_pcap(const std::string& path);

} // namespace ixy
