#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "rootoram/core.hpp"

namespace rootoram {

// Storage or transport failure outside the caller's control.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An envelope failed authentication or decodes to garbage.
struct AuthError : IoError {
  using IoError::IoError;
};

// Peer violated the storage protocol (wrong shape, bad frame, ...).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BlockKind : std::uint8_t { dummy = 0, real = 1 };

// One plaintext block. Payload is exactly B bytes; dummies carry zeros.
struct Block {
  BlockKind kind = BlockKind::dummy;
  std::uint32_t id = 0;
  std::vector<std::uint8_t> payload;

  static Block make_dummy(unsigned payload_bytes) {
    Block b;
    b.payload.assign(payload_bytes, 0);
    return b;
  }

  static Block make_real(std::uint32_t id, std::vector<std::uint8_t> payload) {
    Block b;
    b.kind = BlockKind::real;
    b.id = id;
    b.payload = std::move(payload);
    return b;
  }
};

// Serialized plaintext record: kind u8 | id u64 LE | payload. The kind and
// id travel inside the ciphertext so the server cannot tell real from dummy.
inline constexpr std::size_t kRecordHeader = 9;

// Seals blocks into fixed-size envelopes and opens them again. The key is
// fixed per instance; the nonce must be unique per seal.
class Cipher {
 public:
  static constexpr std::size_t kNonceLen = 12;

  virtual ~Cipher() = default;

  // Envelope size minus the payload size; identical for real and dummy.
  virtual std::size_t overhead() const = 0;

  virtual std::vector<std::uint8_t> seal(
      const Block& block, std::span<const std::uint8_t> nonce) const = 0;

  // Throws AuthError on tampering or malformed plaintext.
  virtual Block open(std::span<const std::uint8_t> envelope,
                     unsigned payload_bytes) const = 0;

  std::size_t envelope_size(unsigned payload_bytes) const {
    return payload_bytes + overhead();
  }
};

// Identity transform for simulations and deterministic tests.
std::unique_ptr<Cipher> make_null_cipher();

// AES-256-GCM with the nonce and auth tag riding in the clear.
std::unique_ptr<Cipher> make_aead_cipher(
    std::span<const std::uint8_t, 32> key);

// A bucket as stored: Z envelopes, concatenated.
using BucketBytes = std::vector<std::uint8_t>;

// The k+1 buckets of one path, root first.
using PathData = std::vector<BucketBytes>;

// Server-side bucket store. One instance serves one client session.
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;

  virtual PathData read_path(std::uint32_t leaf) = 0;

  virtual void write_path(std::uint32_t leaf, const PathData& buckets) = 0;
};

class MemoryBackend final : public StorageBackend {
 public:
  MemoryBackend(const TreeShape& shape, unsigned Z, std::size_t envelope_size);

  PathData read_path(std::uint32_t leaf) override;
  void write_path(std::uint32_t leaf, const PathData& buckets) override;

  const TreeShape& shape() const { return shape_; }
  unsigned blocks_per_bucket() const { return Z_; }
  std::size_t envelope_size() const { return envelope_size_; }
  std::size_t bucket_size() const { return bucket_size_; }
  std::uint32_t bucket_count() const { return shape_.total_buckets; }

  const BucketBytes& bucket(std::uint32_t index) const;
  void set_bucket(std::uint32_t index, BucketBytes bytes);

  bool operator==(const MemoryBackend& other) const {
    return buckets_ == other.buckets_;
  }

 private:
  TreeShape shape_;
  unsigned Z_;
  std::size_t envelope_size_;
  std::size_t bucket_size_;
  std::vector<BucketBytes> buckets_;
};

// Snapshot file: little-endian header {magic "RORM", version u16, L u8,
// k u8, Z u16, B u32} followed by the buckets in index order.
struct SnapshotInfo {
  unsigned L = 0;
  unsigned k = 0;
  unsigned Z = 0;
  unsigned B = 0;
  std::size_t envelope_size = 0;
};

void save_snapshot(std::ostream& out, unsigned L, unsigned k, unsigned Z,
                   unsigned B, const MemoryBackend& store);

std::pair<SnapshotInfo, MemoryBackend> load_snapshot(std::istream& in);

}  // namespace rootoram
