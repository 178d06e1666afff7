#include "rootoram/core.hpp"

#include <bit>

namespace rootoram {

namespace {

constexpr unsigned kMaxL = 26;  // position map and tree stay in memory

}  // namespace

Params Params::create(unsigned L, unsigned k, double p, unsigned Z, unsigned B,
                      Lambda lambda) {
  if (L < 1 || L > kMaxL)
    throw DomainError("L must be in [1, " + std::to_string(kMaxL) + "]");
  if (k < 1 || k > L) throw DomainError("k must be in [1, L]");
  if (Z < 1) throw DomainError("Z must be at least 1");
  if (B < 1) throw DomainError("B must be at least 1");
  const std::uint32_t n = std::uint32_t{1} << L;
  const double p_max = 1.0 - 1.0 / static_cast<double>(n);
  if (!(p > 0.0) || p > p_max)
    throw DomainError("p must be in (0, 1 - 1/N]");
  Params params;
  params.L = L;
  params.n_blocks = n;
  params.k = k;
  params.p = p;
  params.Z = Z;
  params.B = B;
  params.lambda = lambda;
  return params;
}

TreeShape TreeShape::create(unsigned L, unsigned k) {
  if (L < 1 || L > kMaxL) throw DomainError("L out of range");
  if (k < 1 || k > L) throw DomainError("k must be in [1, L]");
  TreeShape shape;
  shape.L = L;
  shape.k = k;
  shape.internal_buckets = (std::uint32_t{1} << k) - 1;
  shape.leaf_buckets = std::uint32_t{1} << L;
  shape.total_buckets = shape.internal_buckets + shape.leaf_buckets;
  shape.path_len = k + 1;
  shape.leaf_fanout = std::uint64_t{1} << (L - k + 1);
  return shape;
}

TreeShape derive_tree_shape(const Params& params) {
  return TreeShape::create(params.L, params.k);
}

unsigned bucket_level(const TreeShape& shape, std::uint32_t index) {
  if (index >= shape.total_buckets) throw DomainError("bucket index out of range");
  if (index >= shape.internal_buckets) return shape.k;
  return std::bit_width(index + 1) - 1;
}

namespace {

void check_leaf(const TreeShape& shape, std::uint32_t leaf) {
  if (leaf >= shape.leaf_buckets) throw DomainError("leaf out of range");
}

// Heap index of the internal node at level k-1 that owns this leaf.
std::uint32_t internal_parent(const TreeShape& shape, std::uint32_t leaf) {
  const std::uint32_t offset =
      static_cast<std::uint32_t>(leaf >> (shape.L - shape.k + 1));
  return ((std::uint32_t{1} << (shape.k - 1)) - 1) + offset;
}

}  // namespace

std::vector<BucketId> path_buckets(const TreeShape& shape, std::uint32_t leaf) {
  check_leaf(shape, leaf);
  std::vector<BucketId> path(shape.path_len);
  path[shape.k] = BucketId{shape.internal_buckets + leaf, shape.k};
  std::uint32_t idx = internal_parent(shape, leaf);
  for (unsigned level = shape.k - 1;; --level) {
    path[level] = BucketId{idx, level};
    if (level == 0) break;
    idx = (idx - 1) / 2;
  }
  return path;
}

unsigned lowest_common_level(const TreeShape& shape, std::uint32_t x,
                             std::uint32_t z) {
  check_leaf(shape, x);
  check_leaf(shape, z);
  if (x == z) return shape.k;
  const std::uint32_t ox = x >> (shape.L - shape.k + 1);
  const std::uint32_t oz = z >> (shape.L - shape.k + 1);
  const unsigned h = std::bit_width(ox ^ oz);
  return (shape.k - 1) - h;
}

BucketId lowest_common_bucket(const TreeShape& shape, std::uint32_t x,
                              std::uint32_t z) {
  const unsigned level = lowest_common_level(shape, x, z);
  if (level == shape.k) return BucketId{shape.internal_buckets + x, shape.k};
  const std::uint32_t ox = x >> (shape.L - shape.k + 1);
  const std::uint32_t offset = ox >> ((shape.k - 1) - level);
  return BucketId{((std::uint32_t{1} << level) - 1) + offset, level};
}

bool bucket_on_path(const TreeShape& shape, std::uint32_t bucket_index,
                    std::uint32_t leaf) {
  check_leaf(shape, leaf);
  if (bucket_index >= shape.total_buckets)
    throw DomainError("bucket index out of range");
  if (bucket_index >= shape.internal_buckets)
    return bucket_index == shape.internal_buckets + leaf;
  const unsigned level = bucket_level(shape, bucket_index);
  const std::uint32_t ox =
      static_cast<std::uint32_t>(leaf >> (shape.L - shape.k + 1));
  const std::uint32_t offset = ox >> ((shape.k - 1) - level);
  return bucket_index == ((std::uint32_t{1} << level) - 1) + offset;
}

}  // namespace rootoram
