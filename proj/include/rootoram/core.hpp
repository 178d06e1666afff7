#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rootoram {

// Caller passed a value outside an operation's documented domain.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// State that the protocol invariants rule out; indicates a bug, not bad input.
struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Fake-access rate. The distinguished "infinite" value disables fake
// accesses entirely; it is a separate state, not a float sentinel.
class Lambda {
 public:
  static Lambda infinite() { return Lambda(0.0, true); }

  static Lambda rate(double r) {
    if (!(r > 0.0)) throw DomainError("lambda must be positive");
    return Lambda(r, false);
  }

  bool is_infinite() const { return infinite_; }

  double value() const {
    if (infinite_) throw DomainError("lambda is infinite");
    return rate_;
  }

  // 1/lambda, taken as 0 when infinite.
  double inverse() const { return infinite_ ? 0.0 : 1.0 / rate_; }

  bool operator==(const Lambda& other) const = default;

 private:
  Lambda(double r, bool inf) : rate_(r), infinite_(inf) {}
  double rate_;
  bool infinite_;
};

// Protocol parameters. N = 2^L real blocks live in a partial binary tree of
// depth k whose buckets hold Z blocks of B payload bytes each; p controls
// how often an accessed block is remapped away from its current leaf.
struct Params {
  unsigned L = 1;
  std::uint32_t n_blocks = 2;  // N = 2^L
  unsigned k = 1;              // 1 <= k <= L
  double p = 0.5;              // 0 < p <= 1 - 1/N
  unsigned Z = 1;
  unsigned B = 1;              // payload bytes per block
  Lambda lambda = Lambda::infinite();

  double p1() const { return 1.0 - p; }                    // keep the same leaf
  double p2() const { return p / (n_blocks - 1); }         // each other leaf

  // p that makes the remap distribution uniform over all N leaves.
  static double uniform_p(std::uint32_t n_blocks) {
    return 1.0 - 1.0 / static_cast<double>(n_blocks);
  }

  static Params create(unsigned L, unsigned k, double p, unsigned Z,
                       unsigned B, Lambda lambda);
};

// Bucket counts and fan-out of the partial tree: a binary tree of depth k
// whose 2^(k-1) deepest internal nodes each own 2^(L-k+1) leaf buckets.
struct TreeShape {
  unsigned L = 1;
  unsigned k = 1;
  std::uint32_t internal_buckets = 1;  // 2^k - 1
  std::uint32_t leaf_buckets = 2;      // N
  std::uint32_t total_buckets = 3;
  unsigned path_len = 2;               // k + 1 buckets per path
  std::uint64_t leaf_fanout = 2;       // 2^(L-k+1)

  static TreeShape create(unsigned L, unsigned k);
};

TreeShape derive_tree_shape(const Params& params);

// Buckets are addressed by a flat index: the internal binary tree occupies
// [0, 2^k - 1) in heap order, and the leaf bucket of leaf x sits at
// (2^k - 1) + x. Levels run 0 (root) through k (leaf buckets).
struct BucketId {
  std::uint32_t index = 0;
  unsigned level = 0;

  bool operator==(const BucketId&) const = default;
};

unsigned bucket_level(const TreeShape& shape, std::uint32_t index);

// The k+1 buckets from the root down to leaf's bucket, root first.
std::vector<BucketId> path_buckets(const TreeShape& shape, std::uint32_t leaf);

// Level of the deepest bucket shared by the paths of x and z.
unsigned lowest_common_level(const TreeShape& shape, std::uint32_t x,
                             std::uint32_t z);

BucketId lowest_common_bucket(const TreeShape& shape, std::uint32_t x,
                              std::uint32_t z);

// True when `bucket` lies on the path of `leaf`.
bool bucket_on_path(const TreeShape& shape, std::uint32_t bucket_index,
                    std::uint32_t leaf);

}  // namespace rootoram
