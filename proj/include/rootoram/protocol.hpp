#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rootoram/core.hpp"
#include "rootoram/prng.hpp"
#include "rootoram/storage.hpp"

namespace rootoram {

enum class Op { read, write };

struct AccessRequest {
  Op op = Op::read;
  std::uint32_t addr = 0;
  std::vector<std::uint8_t> data;  // B bytes, writes only
};

// One server-visible event: the leaf whose path was fetched and rewritten.
// The fake flag exists only client-side; the server sees just the leaf.
struct TraceEntry {
  std::uint32_t leaf = 0;
  bool fake = false;

  bool operator==(const TraceEntry&) const = default;
};

struct Stats {
  std::uint64_t real_accesses = 0;
  std::uint64_t fake_accesses = 0;
  std::uint64_t blocks_transferred = 0;   // bucket slots moved, both directions
  std::size_t max_stash = 0;              // quiescent maximum, path excluded
};

using Stash = std::map<std::uint32_t, std::vector<std::uint8_t>>;

// Input to eviction planning: a block and the leaf it is mapped to.
struct PlacementInput {
  std::uint32_t id = 0;
  std::uint32_t leaf = 0;
};

// Result of eviction planning along one path: block ids per level plus the
// blocks that fit nowhere and stay in the stash.
struct EvictionPlan {
  std::vector<std::vector<std::uint32_t>> level_ids;
  std::vector<std::uint32_t> leftover;
};

// Greedy eviction along the path of `path_leaf`: every block goes to the
// deepest bucket its own mapping allows, deepest-eligible blocks placed
// first, ties broken by ascending block id. Capacity Z per bucket.
EvictionPlan push_down(const TreeShape& shape, unsigned Z,
                       std::uint32_t path_leaf,
                       std::vector<PlacementInput> blocks);

class RequestSource {
 public:
  virtual ~RequestSource() = default;
  // nullptr once the stream is exhausted; the pointee must stay valid until
  // the next call.
  virtual const AccessRequest* next() = 0;
};

using AccessObserver = std::function<void(bool is_fake)>;

// The trusted side of the protocol: position map, stash, and the access
// state machine. One instance is a single logical actor; drive it from one
// thread at a time. The storage backend is passed per call, so the same
// client can move between an in-memory store and a remote one.
class Client {
 public:
  Client(const Params& params, std::unique_ptr<Cipher> cipher,
         std::uint64_t seed);

  // Seals dummy envelopes over the whole tree, then drains the initial
  // stash (all N blocks, zero-filled) with one fake access per block.
  // Traffic is booked to the warm-up counters; the run counters start at
  // zero afterwards.
  void initialize(StorageBackend& store);

  // One real access. Returns the block's pre-access payload; for writes the
  // new payload replaces it before write-back.
  std::vector<std::uint8_t> normal_access(
      StorageBackend& store, std::uint32_t addr, Op op,
      std::span<const std::uint8_t> data = {});

  // One access on a uniformly random stash block (or, with an empty stash,
  // a uniformly random real block), indistinguishable from a real access.
  void fake_access(StorageBackend& store);

  // Serves the stream in Poisson-sized batches, one fake access after each
  // complete batch. With lambda infinite no fakes are ever issued. When
  // `results` is given, every request's pre-access payload is appended.
  void run(StorageBackend& store, RequestSource& requests,
           const AccessObserver& observer = {},
           std::vector<std::vector<std::uint8_t>>* results = nullptr);

  // Convenience wrapper over run(): returns the pre-access payloads.
  std::vector<std::vector<std::uint8_t>> access(
      StorageBackend& store, const std::vector<AccessRequest>& requests);

  // Transient fetch of addr's whole path merged with the stash. Does not
  // modify any state; throws InvariantViolation if addr cannot be found.
  struct ReadOutcome {
    std::uint32_t old_leaf = 0;
    std::map<std::uint32_t, std::vector<std::uint8_t>> working;
  };
  ReadOutcome read_blocks(StorageBackend& store, std::uint32_t addr);

  // Draws the new leaf for addr: same leaf with probability 1-p, otherwise
  // uniform over the other N-1 leaves. Updates the position map.
  std::uint32_t update_mapping(std::uint32_t addr);

  const Params& params() const { return params_; }
  const TreeShape& shape() const { return shape_; }
  const Cipher& cipher() const { return *cipher_; }
  std::size_t envelope_size() const { return cipher_->envelope_size(params_.B); }

  const std::vector<std::uint32_t>& position_map() const { return position_; }
  const Stash& stash() const { return stash_; }
  const Stats& stats() const { return stats_; }
  const Stats& warmup_stats() const { return warmup_stats_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }

  void reset_stats() { stats_ = Stats{}; }
  void clear_trace() { trace_.clear(); }

 private:
  std::vector<std::uint8_t> do_access(StorageBackend& store,
                                      std::uint32_t addr, Op op,
                                      std::span<const std::uint8_t> data,
                                      bool fake);
  BucketBytes seal_bucket(const std::vector<std::uint32_t>& ids,
                          const std::map<std::uint32_t,
                                         std::vector<std::uint8_t>>& payloads);
  Stats& active_stats() { return warming_up_ ? warmup_stats_ : stats_; }

  Params params_;
  TreeShape shape_;
  std::unique_ptr<Cipher> cipher_;
  Prng rng_;
  std::vector<std::uint32_t> position_;
  Stash stash_;
  Stats stats_;
  Stats warmup_stats_;
  std::vector<TraceEntry> trace_;
  bool warming_up_ = false;
};

// Full-state audit: main invariant (every block on its mapped path or in
// the stash), conservation (tree plus stash hold exactly the ids 0..N-1,
// once each), and bucket capacity. Reads the store without touching the
// client counters; throws InvariantViolation with a diagnostic.
void audit_full_state(const Client& client, StorageBackend& store);

}  // namespace rootoram
