#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ixy {

// Ethernet + IPv4 + UDP headers end here; the sequence number follows.
constexpr std::size_t frame_sequence_offset = 42;
constexpr std::size_t min_frame_size = 60;

/**
 * Deterministic UDP test traffic. The payload is derived once from the seed;
 * each frame differs only in its 16-bit big-endian sequence number.
 */
class FrameGenerator {
public:
    FrameGenerator(std::uint64_t seed, std::size_t frame_size);

    [[nodiscard]] std::size_t frame_size() const noexcept { return template_.size(); }
    [[nodiscard]] std::vector<std::uint8_t> frame(std::uint16_t sequence) const;
    // Writes frame `sequence` into the first frame_size() bytes of `out`.
    void fill(std::span<std::uint8_t> out, std::uint16_t sequence) const;

private:
    std::vector<std::uint8_t> template_;
};

[[nodiscard]] std::uint16_t read_sequence(std::span<const std::uint8_t> frame);
void write_sequence(std::span<std::uint8_t> frame, std::uint16_t sequence);

// Reconstructs full packet indices from 16-bit sequence numbers of an in-order
// stream that may skip (drop) packets, as long as fewer than 65536 are skipped
// between two observed ones.
class SequenceTracker {
public:
    std::uint64_t next(std::uint16_t sequence) noexcept;

private:
    std::uint64_t last_ = 0;
    bool started_ = false;
};

} // namespace ixy
