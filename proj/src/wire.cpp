#include "rootoram/wire.hpp"

#include <cstring>

namespace rootoram {

namespace {

constexpr char kMagic[4] = {'R', 'O', 'R', 'M'};

}  // namespace

void encode_frame_header(std::span<std::uint8_t, kFrameHeaderSize> out,
                         const FrameHeader& header) {
  std::memcpy(out.data(), kMagic, 4);
  out[4] = static_cast<std::uint8_t>(kWireVersion);
  out[5] = static_cast<std::uint8_t>(kWireVersion >> 8);
  out[6] = static_cast<std::uint8_t>(header.type);
  for (int i = 0; i < 8; ++i)
    out[7 + i] = static_cast<std::uint8_t>(header.leaf >> (8 * i));
  for (int i = 0; i < 4; ++i)
    out[15 + i] = static_cast<std::uint8_t>(header.body_len >> (8 * i));
}

std::optional<FrameHeader> decode_frame_header(
    std::span<const std::uint8_t, kFrameHeaderSize> in) {
  if (std::memcmp(in.data(), kMagic, 4) != 0) return std::nullopt;
  const std::uint16_t version =
      static_cast<std::uint16_t>(in[4] | (in[5] << 8));
  if (version != kWireVersion) return std::nullopt;
  if (in[6] < 1 || in[6] > 5) return std::nullopt;
  FrameHeader header;
  header.type = static_cast<MsgType>(in[6]);
  for (int i = 0; i < 8; ++i)
    header.leaf |= std::uint64_t{in[7 + i]} << (8 * i);
  for (int i = 0; i < 4; ++i)
    header.body_len |= std::uint32_t{in[15 + i]} << (8 * i);
  return header;
}

std::vector<std::uint8_t> serialize_path(const PathData& path) {
  std::size_t total = 0;
  for (const BucketBytes& b : path) total += b.size();
  std::vector<std::uint8_t> out;
  out.reserve(total);
  for (const BucketBytes& b : path) out.insert(out.end(), b.begin(), b.end());
  return out;
}

PathData parse_path(std::span<const std::uint8_t> body, unsigned path_len,
                    std::size_t bucket_size) {
  if (body.size() != std::size_t{path_len} * bucket_size)
    throw ProtocolError("path body has wrong length");
  PathData path(path_len);
  for (unsigned i = 0; i < path_len; ++i)
    path[i].assign(body.begin() + i * bucket_size,
                   body.begin() + (i + 1) * bucket_size);
  return path;
}

}  // namespace rootoram
