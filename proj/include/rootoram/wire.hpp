#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rootoram/storage.hpp"

namespace rootoram {

// Frame header, little-endian, 19 bytes on the wire:
//   magic "RORM" (4) | version u16 | msg_type u8 | leaf u64 | body_len u32
// READ_PATH and ACK carry no body; PATH_DATA and WRITE_PATH carry the
// (k+1)*Z envelopes of one path, root first.
enum class MsgType : std::uint8_t {
  read_path = 1,
  path_data = 2,
  write_path = 3,
  ack = 4,
  error = 5,
};

enum class WireErrorCode : std::uint8_t {
  frame = 1,  // malformed or truncated frame
  shape = 2,  // body length does not match the path size
  range = 3,  // leaf outside [0, N)
  store = 4,  // backend failure
};

inline constexpr std::size_t kFrameHeaderSize = 19;
inline constexpr std::uint16_t kWireVersion = 1;

struct FrameHeader {
  MsgType type = MsgType::error;
  std::uint64_t leaf = 0;
  std::uint32_t body_len = 0;
};

void encode_frame_header(std::span<std::uint8_t, kFrameHeaderSize> out,
                         const FrameHeader& header);

// Empty when the magic, version, or message type is invalid.
std::optional<FrameHeader> decode_frame_header(
    std::span<const std::uint8_t, kFrameHeaderSize> in);

std::vector<std::uint8_t> serialize_path(const PathData& path);

PathData parse_path(std::span<const std::uint8_t> body, unsigned path_len,
                    std::size_t bucket_size);

}  // namespace rootoram
