#include "ixy/pcap.hpp"

#include <algorithm>
#include <iterator>

#include <fmt/core.h>

#include "ixy/error.hpp"

namespace ixy {

namespace {

void le16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xFF));
    s.push_back(static_cast<char>(v >> 8));
}

void le32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

std::uint32_t get_le32(const std::vector<std::uint8_t>& in, std::size_t at) {
    if (at + 4 > in.size()) {
        throw Error(ErrorKind::io_error, "truncated pcap file");
    }
    return static_cast<std::uint32_t>(in[at]) | static_cast<std::uint32_t>(in[at + 1]) << 8 |
           static_cast<std::uint32_t>(in[at + 2]) << 16 | static_cast<std::uint32_t>(in[at + 3]) << 24;
}

constexpr std::uint32_t snaplen = 65535;

} // namespace

PcapWriter::PcapWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) {
        throw Error(ErrorKind::io_error, fmt::format("cannot open {} for writing", path));
    }
    std::string header;
    le32(header, magic);
    le16(header, 2);
    le16(header, 4);
    le32(header, 0); // thiszone
    le32(header, 0); // sigfigs
    le32(header, snaplen);
    le32(header, 1); // LINKTYPE_ETHERNET
    put(header);
}

void PcapWriter::write(std::span<const std::uint8_t> frame, std::uint64_t timestamp_ps) {
    const std::uint64_t ns = timestamp_ps / 1000;
    const auto length = static_cast<std::uint32_t>(frame.size());
    const std::uint32_t captured = std::min(length, snaplen);
    std::string record;
    record.reserve(16 + captured);
    le32(record, static_cast<std::uint32_t>(ns / 1'000'000'000));
    le32(record, static_cast<std::uint32_t>(ns % 1'000'000'000));
    le32(record, captured);
    le32(record, length);
    for (std::uint32_t i = 0; i < captured; ++i) {
        record.push_back(static_cast<char>(frame[i]));
    }
    put(record);
    ++records_;
}

void PcapWriter::flush() {
    out_.flush();
    if (!out_) {
        throw Error(ErrorKind::io_error, fmt::format("write to {} failed", path_));
    }
}

void PcapWriter::put(const std::string& bytes) {
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out_) {
        throw Error(ErrorKind::io_error, fmt::format("write to {} failed", path_));
    }
}

void write_pcap(const std::string& path, const std::vector<CapturedFrame>& frames) {
    PcapWriter writer(path);
    for (const auto& f : frames) {
        writer.write(f.bytes, f.timestamp);
    }
    writer.flush();
}

std::vector<CapturedFrame> read_pcap(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io_error, fmt::format("cannot open {}", path));
    }
    std::vector<std::uint8_t> data;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
        data.push_back(static_cast<std::uint8_t>(*it));
    }
    if (get_le32(data, 0) != PcapWriter::magic) {
        throw Error(ErrorKind::io_error, fmt::format("{} is not a nanosecond pcap file", path));
    }
    std::vector<CapturedFrame> frames;
    std::size_t at = 24;
    while (at < data.size()) {
        const std::uint64_t sec = get_le32(data, at);
        const std::uint64_t nsec = get_le32(data, at + 4);
        const std::uint32_t captured = get_le32(data, at + 8);
        at += 16;
        if (at + captured > data.size()) {
            throw Error(ErrorKind::io_error, "truncated pcap record");
        }
        const auto first = data.begin() + static_cast<std::ptrdiff_t>(at);
        frames.push_back({std::vector<std::uint8_t>(first, first + captured), (sec * 1'000'000'000 + nsec) * 1000});
        at += captured;
    }
    return frames;
}

} // namespace ixy
