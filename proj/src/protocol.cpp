#include "rootoram/protocol.hpp"

#include <algorithm>
#include <array>

namespace rootoram {

EvictionPlan push_down(const TreeShape& shape, unsigned Z,
                       std::uint32_t path_leaf,
                       std::vector<PlacementInput> blocks) {
  struct Candidate {
    std::uint32_t id;
    unsigned target;  // deepest level this block may occupy on the path
  };
  std::vector<Candidate> candidates;
  candidates.reserve(blocks.size());
  for (const PlacementInput& b : blocks)
    candidates.push_back({b.id, lowest_common_level(shape, path_leaf, b.leaf)});
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.target != b.target) return a.target > b.target;
              return a.id < b.id;
            });

  EvictionPlan plan;
  plan.level_ids.resize(shape.path_len);
  std::vector<unsigned> occupancy(shape.path_len, 0);
  for (const Candidate& c : candidates) {
    bool placed = false;
    for (unsigned level = c.target + 1; level-- > 0;) {
      if (occupancy[level] < Z) {
        plan.level_ids[level].push_back(c.id);
        ++occupancy[level];
        placed = true;
        break;
      }
    }
    if (!placed) plan.leftover.push_back(c.id);
  }
  for (auto& ids : plan.level_ids) std::sort(ids.begin(), ids.end());
  std::sort(plan.leftover.begin(), plan.leftover.end());
  return plan;
}

Client::Client(const Params& params, std::unique_ptr<Cipher> cipher,
               std::uint64_t seed)
    : params_(params),
      shape_(derive_tree_shape(params)),
      cipher_(std::move(cipher)),
      rng_(seed),
      position_(params.n_blocks) {
  // Positions start independent and uniform; every block starts in the
  // stash with a zero payload and is drained into the tree by initialize().
  for (std::uint32_t a = 0; a < params_.n_blocks; ++a)
    position_[a] = static_cast<std::uint32_t>(rng_.uniform(params_.n_blocks));
  for (std::uint32_t a = 0; a < params_.n_blocks; ++a)
    stash_.emplace(a, std::vector<std::uint8_t>(params_.B, 0));
}

BucketBytes Client::seal_bucket(
    const std::vector<std::uint32_t>& ids,
    const std::map<std::uint32_t, std::vector<std::uint8_t>>& payloads) {
  BucketBytes out;
  out.reserve(std::size_t{params_.Z} * envelope_size());
  std::array<std::uint8_t, Cipher::kNonceLen> nonce;
  for (unsigned slot = 0; slot < params_.Z; ++slot) {
    rng_.fill(nonce);
    Block block = slot < ids.size()
                      ? Block::make_real(ids[slot], payloads.at(ids[slot]))
                      : Block::make_dummy(params_.B);
    const auto env = cipher_->seal(block, nonce);
    out.insert(out.end(), env.begin(), env.end());
  }
  return out;
}

void Client::initialize(StorageBackend& store) {
  warming_up_ = true;
  warmup_stats_.max_stash = std::max(warmup_stats_.max_stash, stash_.size());
  const std::size_t env_size = envelope_size();
  std::array<std::uint8_t, Cipher::kNonceLen> nonce;
  for (std::uint32_t leaf = 0; leaf < shape_.leaf_buckets; ++leaf) {
    PathData path(shape_.path_len);
    for (BucketBytes& bucket : path) {
      bucket.reserve(std::size_t{params_.Z} * env_size);
      for (unsigned slot = 0; slot < params_.Z; ++slot) {
        rng_.fill(nonce);
        const auto env = cipher_->seal(Block::make_dummy(params_.B), nonce);
        bucket.insert(bucket.end(), env.begin(), env.end());
      }
    }
    store.write_path(leaf, path);
    warmup_stats_.blocks_transferred +=
        std::uint64_t{shape_.path_len} * params_.Z;
  }
  for (std::uint32_t a = 0; a < params_.n_blocks; ++a) fake_access(store);
  warming_up_ = false;
  stats_ = Stats{};
}

Client::ReadOutcome Client::read_blocks(StorageBackend& store,
                                        std::uint32_t addr) {
  if (addr >= params_.n_blocks) throw DomainError("block id out of range");
  ReadOutcome out;
  out.old_leaf = position_[addr];
  const PathData path = store.read_path(out.old_leaf);
  if (path.size() != shape_.path_len)
    throw ProtocolError("read_path returned wrong bucket count");
  const std::size_t env_size = envelope_size();
  for (const BucketBytes& bucket : path) {
    if (bucket.size() != std::size_t{params_.Z} * env_size)
      throw ProtocolError("read_path returned wrong bucket size");
    for (unsigned slot = 0; slot < params_.Z; ++slot) {
      Block block = cipher_->open(
          std::span(bucket.data() + slot * env_size, env_size), params_.B);
      if (block.kind == BlockKind::dummy) continue;
      if (block.id >= params_.n_blocks)
        throw InvariantViolation("tree holds an unknown block id");
      if (!out.working.emplace(block.id, std::move(block.payload)).second)
        throw InvariantViolation("block appears twice in the tree");
    }
  }
  for (const auto& [id, payload] : stash_) {
    if (!out.working.emplace(id, payload).second)
      throw InvariantViolation("block is in both the stash and the tree");
  }
  if (!out.working.contains(addr))
    throw InvariantViolation("main invariant broken: block " +
                             std::to_string(addr) + " not on path " +
                             std::to_string(out.old_leaf) + " or in stash");
  return out;
}

std::uint32_t Client::update_mapping(std::uint32_t addr) {
  if (addr >= params_.n_blocks) throw DomainError("block id out of range");
  const std::uint32_t x = position_[addr];
  std::uint32_t z = x;
  if (rng_.bernoulli(params_.p)) {
    const std::uint64_t other = rng_.uniform(params_.n_blocks - 1);
    z = static_cast<std::uint32_t>(other < x ? other : other + 1);
  }
  position_[addr] = z;
  return z;
}

std::vector<std::uint8_t> Client::do_access(
    StorageBackend& store, std::uint32_t addr, Op op,
    std::span<const std::uint8_t> data, bool fake) {
  if (op == Op::write && data.size() != params_.B)
    throw DomainError("write payload must be exactly B bytes");

  ReadOutcome read = read_blocks(store, addr);
  const std::uint32_t x = read.old_leaf;
  active_stats().blocks_transferred +=
      std::uint64_t{shape_.path_len} * params_.Z;

  auto it = read.working.find(addr);
  std::vector<std::uint8_t> result = it->second;
  if (op == Op::write) it->second.assign(data.begin(), data.end());
  std::vector<std::uint8_t> addr_payload = std::move(it->second);
  read.working.erase(it);

  std::vector<PlacementInput> blocks;
  blocks.reserve(read.working.size());
  for (const auto& [id, payload] : read.working)
    blocks.push_back({id, position_[id]});
  EvictionPlan plan = push_down(shape_, params_.Z, x, std::move(blocks));

  const std::uint32_t z = update_mapping(addr);

  // The accessed block goes to the deepest free bucket shared by its old
  // and new paths, scanning upward; on total overflow it stays in the stash.
  std::vector<unsigned> occupancy(shape_.path_len, 0);
  for (unsigned level = 0; level < shape_.path_len; ++level)
    occupancy[level] = static_cast<unsigned>(plan.level_ids[level].size());
  std::optional<unsigned> placed_level;
  for (unsigned level = lowest_common_level(shape_, x, z) + 1; level-- > 0;) {
    if (occupancy[level] < params_.Z) {
      placed_level = level;
      break;
    }
  }

  read.working.emplace(addr, std::move(addr_payload));
  PathData out(shape_.path_len);
  for (unsigned level = 0; level < shape_.path_len; ++level) {
    std::vector<std::uint32_t> ids = plan.level_ids[level];
    if (placed_level && *placed_level == level) {
      ids.push_back(addr);
      std::sort(ids.begin(), ids.end());
    }
    out[level] = seal_bucket(ids, read.working);
  }

  try {
    store.write_path(x, out);
  } catch (...) {
    position_[addr] = x;  // store unchanged, so the old mapping still holds
    throw;
  }
  active_stats().blocks_transferred +=
      std::uint64_t{shape_.path_len} * params_.Z;

  Stash next_stash;
  for (std::uint32_t id : plan.leftover) {
    auto node = read.working.extract(id);
    next_stash.insert(std::move(node));
  }
  if (!placed_level) {
    auto node = read.working.extract(addr);
    next_stash.insert(std::move(node));
  }
  stash_ = std::move(next_stash);

  trace_.push_back({x, fake});
  Stats& st = active_stats();
  if (fake)
    ++st.fake_accesses;
  else
    ++st.real_accesses;
  st.max_stash = std::max(st.max_stash, stash_.size());
  return result;
}

std::vector<std::uint8_t> Client::normal_access(
    StorageBackend& store, std::uint32_t addr, Op op,
    std::span<const std::uint8_t> data) {
  if (addr >= params_.n_blocks) throw DomainError("block id out of range");
  return do_access(store, addr, op, data, false);
}

void Client::fake_access(StorageBackend& store) {
  std::uint32_t addr;
  if (!stash_.empty()) {
    auto it = stash_.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng_.uniform(stash_.size())));
    addr = it->first;
  } else {
    // Fake traffic must flow even with nothing to drain; any real block
    // keeps the access indistinguishable.
    addr = static_cast<std::uint32_t>(rng_.uniform(params_.n_blocks));
  }
  do_access(store, addr, Op::read, {}, true);
}

void Client::run(StorageBackend& store, RequestSource& requests,
                 const AccessObserver& observer,
                 std::vector<std::vector<std::uint8_t>>* results) {
  const auto serve = [&](const AccessRequest& r) {
    auto payload = normal_access(store, r.addr, r.op, r.data);
    if (results) results->push_back(std::move(payload));
    if (observer) observer(false);
  };
  const AccessRequest* pending = requests.next();
  if (params_.lambda.is_infinite()) {
    while (pending) {
      serve(*pending);
      pending = requests.next();
    }
    return;
  }
  const double lambda = params_.lambda.value();
  while (pending) {
    const std::uint64_t batch = rng_.poisson(lambda);
    std::uint64_t served = 0;
    while (served < batch && pending) {
      serve(*pending);
      pending = requests.next();
      ++served;
    }
    if (served < batch) break;  // stream ran dry mid-batch
    fake_access(store);
    if (observer) observer(true);
  }
}

namespace {

class VectorSource final : public RequestSource {
 public:
  explicit VectorSource(const std::vector<AccessRequest>& requests)
      : requests_(requests) {}
  const AccessRequest* next() override {
    if (index_ >= requests_.size()) return nullptr;
    return &requests_[index_++];
  }

 private:
  const std::vector<AccessRequest>& requests_;
  std::size_t index_ = 0;
};

}  // namespace

std::vector<std::vector<std::uint8_t>> Client::access(
    StorageBackend& store, const std::vector<AccessRequest>& requests) {
  std::vector<std::vector<std::uint8_t>> results;
  results.reserve(requests.size());
  VectorSource source(requests);
  run(store, source, {}, &results);
  return results;
}

void audit_full_state(const Client& client, StorageBackend& store) {
  const TreeShape& shape = client.shape();
  const Params& params = client.params();
  const std::size_t env_size = client.envelope_size();

  // Bucket contents by index. A memory backend is scanned directly; any
  // other backend is covered by reading every leaf path.
  std::vector<const BucketBytes*> buckets(shape.total_buckets, nullptr);
  std::vector<BucketBytes> fetched;
  if (auto* mem = dynamic_cast<MemoryBackend*>(&store)) {
    for (std::uint32_t i = 0; i < shape.total_buckets; ++i)
      buckets[i] = &mem->bucket(i);
  } else {
    fetched.resize(shape.total_buckets);
    std::vector<bool> have(shape.total_buckets, false);
    for (std::uint32_t leaf = 0; leaf < shape.leaf_buckets; ++leaf) {
      const auto ids = path_buckets(shape, leaf);
      PathData path = store.read_path(leaf);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (have[ids[i].index]) continue;
        fetched[ids[i].index] = std::move(path[i]);
        have[ids[i].index] = true;
      }
    }
    for (std::uint32_t i = 0; i < shape.total_buckets; ++i)
      buckets[i] = &fetched[i];
  }

  std::vector<char> seen(params.n_blocks, 0);
  for (std::uint32_t index = 0; index < shape.total_buckets; ++index) {
    unsigned real = 0;
    for (unsigned slot = 0; slot < params.Z; ++slot) {
      const Block block = client.cipher().open(
          std::span(buckets[index]->data() + slot * env_size, env_size),
          params.B);
      if (block.kind == BlockKind::dummy) continue;
      ++real;
      if (block.id >= params.n_blocks)
        throw InvariantViolation("audit: unknown block id " +
                                 std::to_string(block.id));
      if (seen[block.id]++)
        throw InvariantViolation("audit: block " + std::to_string(block.id) +
                                 " stored twice");
      const std::uint32_t mapped = client.position_map()[block.id];
      if (!bucket_on_path(shape, index, mapped))
        throw InvariantViolation(
            "audit: block " + std::to_string(block.id) + " in bucket " +
            std::to_string(index) + " is off the path of leaf " +
            std::to_string(mapped));
    }
    if (real > params.Z)
      throw InvariantViolation("audit: bucket over capacity");
  }
  for (const auto& [id, payload] : client.stash()) {
    if (id >= params.n_blocks)
      throw InvariantViolation("audit: stash holds unknown block id");
    if (seen[id]++)
      throw InvariantViolation("audit: block " + std::to_string(id) +
                               " in both tree and stash");
    if (payload.size() != params.B)
      throw InvariantViolation("audit: stash payload has wrong size");
  }
  for (std::uint32_t a = 0; a < params.n_blocks; ++a)
    if (!seen[a])
      throw InvariantViolation("audit: block " + std::to_string(a) +
                               " is missing");
}

}  // namespace rootoram
