#include "ixy/frames.hpp"

#include <algorithm>
#include <random>

#include <fmt/core.h>

#include "ixy/error.hpp"

namespace ixy {

namespace {

constexpr std::uint8_t dst_mac[6] = {0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
constexpr std::uint8_t src_mac[6] = {0x02, 0x00, 0x00, 0x00, 0x00, 0xFE};

void put16(std::span<std::uint8_t> out, std::size_t at, std::uint16_t v) {
    out[at] = static_cast<std::uint8_t>(v >> 8);
    out[at + 1] = static_cast<std::uint8_t>(v);
}

std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < header.size(); i += 2) {
        sum += static_cast<std::uint32_t>(header[i]) << 8 | header[i + 1];
    }
    while (sum >> 16) {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    return static_cast<std::uint16_t>(~sum);
}

} // namespace

FrameGenerator::FrameGenerator(std::uint64_t seed, std::size_t frame_size) : template_(frame_size) {
    if (frame_size < min_frame_size || frame_size > 0xFFFF) {
        throw Error(ErrorKind::invalid_argument, fmt::format("frame size {} outside [{}, 65535]", frame_size, min_frame_size));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<unsigned> byte(0, 255);
    for (auto& b : template_) {
        b = static_cast<std::uint8_t>(byte(rng));
    }
    std::span<std::uint8_t> f(template_);
    std::copy(std::begin(dst_mac), std::end(dst_mac), f.begin());
    std::copy(std::begin(src_mac), std::end(src_mac), f.begin() + 6);
    put16(f, 12, 0x0800);
    // IPv4
    auto ip = f.subspan(14, 20);
    std::fill(ip.begin(), ip.end(), std::uint8_t{0});
    ip[0] = 0x45;
    put16(ip, 2, static_cast<std::uint16_t>(frame_size - 14));
    ip[8] = 64;
    ip[9] = 17;
    const std::uint8_t addrs[8] = {10, 0, 0, 1, 10, 1, 0, 1};
    std::copy(std::begin(addrs), std::end(addrs), ip.begin() + 12);
    put16(ip, 10, ipv4_checksum(ip));
    // UDP, no checksum
    auto udp = f.subspan(34, 8);
    put16(udp, 0, 1234);
    put16(udp, 2, 5678);
    put16(udp, 4, static_cast<std::uint16_t>(frame_size - 34));
    put16(udp, 6, 0);
    write_sequence(f, 0);
}

std::vector<std::uint8_t> FrameGenerator::frame(std::uint16_t sequence) const {
    std::vector<std::uint8_t> out = template_;
    write_sequence(out, sequence);
    return out;
}

void FrameGenerator::fill(std::span<std::uint8_t> out, std::uint16_t sequence) const {
    if (out.size() < template_.size()) {
        throw Error(ErrorKind::bounds_violation, "buffer smaller than frame");
    }
    std::copy(template_.begin(), template_.end(), out.begin());
    write_sequence(out, sequence);
}

std::uint16_t read_sequence(std::span<const std::uint8_t> frame) {
    if (frame.size() < frame_sequence_offset + 2) {
        throw Error(ErrorKind::bounds_violation, "frame too short for a sequence number");
    }
    return static_cast<std::uint16_t>(frame[frame_sequence_offset] << 8 | frame[frame_sequence_offset + 1]);
}

void write_sequence(std::span<std::uint8_t> frame, std::uint16_t sequence) {
    if (frame.size() < frame_sequence_offset + 2) {
        throw Error(ErrorKind::bounds_violation, "frame too short for a sequence number");
    }
    put16(frame, frame_sequence_offset, sequence);
}

std::uint64_t SequenceTracker::next(std::uint16_t sequence) noexcept {
    if (!started_) {
        started_ = true;
        last_ = sequence;
        return last_;
    }
    // Smallest index after last_ whose low 16 bits match.
    const std::uint64_t step = static_cast<std::uint16_t>(sequence - static_cast<std::uint16_t>(last_ + 1));
    last_ = last_ + 1 + step;
    return last_;
}

} // namespace ixy
