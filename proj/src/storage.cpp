#include "rootoram/storage.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <istream>
#include <ostream>

namespace rootoram {

namespace {

void put_u64_le(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64_le(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  return v;
}

std::vector<std::uint8_t> encode_record(const Block& block) {
  std::vector<std::uint8_t> rec(kRecordHeader + block.payload.size());
  rec[0] = static_cast<std::uint8_t>(block.kind);
  put_u64_le(rec.data() + 1, block.id);
  std::memcpy(rec.data() + kRecordHeader, block.payload.data(),
              block.payload.size());
  return rec;
}

Block decode_record(std::span<const std::uint8_t> rec, unsigned payload_bytes) {
  if (rec.size() != kRecordHeader + payload_bytes)
    throw AuthError("record has wrong length");
  if (rec[0] > 1) throw AuthError("record kind byte is invalid");
  Block block;
  block.kind = static_cast<BlockKind>(rec[0]);
  block.id = static_cast<std::uint32_t>(get_u64_le(rec.data() + 1));
  block.payload.assign(rec.begin() + kRecordHeader, rec.end());
  return block;
}

class NullCipher final : public Cipher {
 public:
  std::size_t overhead() const override { return kRecordHeader; }

  std::vector<std::uint8_t> seal(
      const Block& block, std::span<const std::uint8_t>) const override {
    return encode_record(block);
  }

  Block open(std::span<const std::uint8_t> envelope,
             unsigned payload_bytes) const override {
    return decode_record(envelope, payload_bytes);
  }
};

class AeadCipher final : public Cipher {
 public:
  static constexpr std::size_t kTagLen = 16;

  explicit AeadCipher(std::span<const std::uint8_t, 32> key) {
    std::memcpy(key_.data(), key.data(), key.size());
  }

  std::size_t overhead() const override {
    return kNonceLen + kTagLen + kRecordHeader;
  }

  // Envelope layout: nonce | ciphertext(record) | tag.
  std::vector<std::uint8_t> seal(
      const Block& block, std::span<const std::uint8_t> nonce) const override {
    if (nonce.size() != kNonceLen) throw DomainError("nonce must be 12 bytes");
    const std::vector<std::uint8_t> rec = encode_record(block);
    std::vector<std::uint8_t> out(kNonceLen + rec.size() + kTagLen);
    std::memcpy(out.data(), nonce.data(), kNonceLen);

    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) throw IoError("EVP_CIPHER_CTX_new failed");
    int len = 0;
    bool ok = EVP_EncryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key_.data(),
                                 out.data()) == 1 &&
              EVP_EncryptUpdate(ctx, out.data() + kNonceLen, &len, rec.data(),
                                static_cast<int>(rec.size())) == 1 &&
              EVP_EncryptFinal_ex(ctx, out.data() + kNonceLen + len, &len) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, kTagLen,
                                  out.data() + kNonceLen + rec.size()) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) throw IoError("AEAD seal failed");
    return out;
  }

  Block open(std::span<const std::uint8_t> envelope,
             unsigned payload_bytes) const override {
    const std::size_t rec_len = kRecordHeader + payload_bytes;
    if (envelope.size() != kNonceLen + rec_len + kTagLen)
      throw AuthError("envelope has wrong length");
    const std::uint8_t* nonce = envelope.data();
    const std::uint8_t* ct = envelope.data() + kNonceLen;
    const std::uint8_t* tag = ct + rec_len;

    std::vector<std::uint8_t> rec(rec_len);
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) throw IoError("EVP_CIPHER_CTX_new failed");
    int len = 0;
    bool ok = EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key_.data(),
                                 nonce) == 1 &&
              EVP_DecryptUpdate(ctx, rec.data(), &len, ct,
                                static_cast<int>(rec_len)) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, kTagLen,
                                  const_cast<std::uint8_t*>(tag)) == 1 &&
              EVP_DecryptFinal_ex(ctx, rec.data() + len, &len) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) throw AuthError("envelope failed authentication");
    return decode_record(rec, payload_bytes);
  }

 private:
  std::array<std::uint8_t, 32> key_;
};

}  // namespace

std::unique_ptr<Cipher> make_null_cipher() {
  return std::make_unique<NullCipher>();
}

std::unique_ptr<Cipher> make_aead_cipher(
    std::span<const std::uint8_t, 32> key) {
  return std::make_unique<AeadCipher>(key);
}

MemoryBackend::MemoryBackend(const TreeShape& shape, unsigned Z,
                             std::size_t envelope_size)
    : shape_(shape),
      Z_(Z),
      envelope_size_(envelope_size),
      bucket_size_(std::size_t{Z} * envelope_size),
      buckets_(shape.total_buckets, BucketBytes(bucket_size_, 0)) {
  if (Z < 1) throw DomainError("Z must be at least 1");
  if (envelope_size < kRecordHeader)
    throw DomainError("envelope size too small");
}

PathData MemoryBackend::read_path(std::uint32_t leaf) {
  const auto ids = path_buckets(shape_, leaf);
  PathData out;
  out.reserve(ids.size());
  for (const BucketId& b : ids) out.push_back(buckets_[b.index]);
  return out;
}

void MemoryBackend::write_path(std::uint32_t leaf, const PathData& buckets) {
  const auto ids = path_buckets(shape_, leaf);
  if (buckets.size() != ids.size())
    throw ProtocolError("write_path: wrong bucket count");
  for (const BucketBytes& b : buckets)
    if (b.size() != bucket_size_)
      throw ProtocolError("write_path: wrong bucket size");
  for (std::size_t i = 0; i < ids.size(); ++i)
    buckets_[ids[i].index] = buckets[i];
}

const BucketBytes& MemoryBackend::bucket(std::uint32_t index) const {
  if (index >= buckets_.size()) throw DomainError("bucket index out of range");
  return buckets_[index];
}

void MemoryBackend::set_bucket(std::uint32_t index, BucketBytes bytes) {
  if (index >= buckets_.size()) throw DomainError("bucket index out of range");
  if (bytes.size() != bucket_size_)
    throw ProtocolError("set_bucket: wrong bucket size");
  buckets_[index] = std::move(bytes);
}

namespace {

constexpr char kSnapshotMagic[4] = {'R', 'O', 'R', 'M'};
constexpr std::uint16_t kSnapshotVersion = 1;
constexpr std::size_t kSnapshotHeader = 4 + 2 + 1 + 1 + 2 + 4;

void put_u16_le(std::uint8_t* out, std::uint16_t v) {
  out[0] = static_cast<std::uint8_t>(v);
  out[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32_le(std::uint8_t* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

void save_snapshot(std::ostream& out, unsigned L, unsigned k, unsigned Z,
                   unsigned B, const MemoryBackend& store) {
  std::uint8_t header[kSnapshotHeader];
  std::memcpy(header, kSnapshotMagic, 4);
  put_u16_le(header + 4, kSnapshotVersion);
  header[6] = static_cast<std::uint8_t>(L);
  header[7] = static_cast<std::uint8_t>(k);
  put_u16_le(header + 8, static_cast<std::uint16_t>(Z));
  put_u32_le(header + 10, B);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (std::uint32_t i = 0; i < store.bucket_count(); ++i) {
    const BucketBytes& b = store.bucket(i);
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size()));
  }
  if (!out) throw IoError("snapshot write failed");
}

std::pair<SnapshotInfo, MemoryBackend> load_snapshot(std::istream& in) {
  std::uint8_t header[kSnapshotHeader];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(header, kSnapshotMagic, 4) != 0)
    throw IoError("snapshot: bad magic");
  const std::uint16_t version =
      static_cast<std::uint16_t>(header[4] | (header[5] << 8));
  if (version != kSnapshotVersion) throw IoError("snapshot: bad version");

  SnapshotInfo info;
  info.L = header[6];
  info.k = header[7];
  info.Z = static_cast<unsigned>(header[8] | (header[9] << 8));
  std::uint32_t b = 0;
  for (int i = 0; i < 4; ++i) b |= std::uint32_t{header[10 + i]} << (8 * i);
  info.B = b;

  const TreeShape shape = TreeShape::create(info.L, info.k);

  std::vector<std::uint8_t> body((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const std::size_t slots = std::size_t{shape.total_buckets} * info.Z;
  if (slots == 0 || body.size() % slots != 0)
    throw IoError("snapshot: truncated body");
  info.envelope_size = body.size() / slots;
  if (info.envelope_size < info.B + kRecordHeader)
    throw IoError("snapshot: envelope size too small");

  MemoryBackend store(shape, info.Z, info.envelope_size);
  const std::size_t bucket_size = store.bucket_size();
  for (std::uint32_t i = 0; i < shape.total_buckets; ++i) {
    BucketBytes bytes(body.begin() + i * bucket_size,
                      body.begin() + (i + 1) * bucket_size);
    store.set_bucket(i, std::move(bytes));
  }
  return {info, std::move(store)};
}

}  // namespace rootoram
