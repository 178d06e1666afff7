#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rootoram/protocol.hpp"

using namespace rootoram;

namespace {

struct Setup {
  Params params;
  MemoryBackend store;
  Client client;

  Setup(unsigned L, unsigned k, double p, unsigned Z, unsigned B,
        Lambda lambda, std::uint64_t seed, bool warm = true)
      : params(Params::create(L, k, p, Z, B, lambda)),
        store(derive_tree_shape(params), Z, kRecordHeader + B),
        client(params, make_null_cipher(), seed) {
    if (warm) client.initialize(store);
  }
};

std::vector<std::uint8_t> bytes_of(unsigned B, std::uint8_t fill) {
  return std::vector<std::uint8_t>(B, fill);
}

}  // namespace

TEST_CASE("write then read returns the written value") {
  Setup s(4, 2, 0.5, 4, 8, Lambda::infinite(), 1);
  const auto value = bytes_of(8, 0xC3);
  s.client.normal_access(s.store, 7, Op::write, value);
  CHECK(s.client.normal_access(s.store, 7, Op::read) == value);

  // fresh blocks read as zeros
  CHECK(s.client.normal_access(s.store, 3, Op::read) == bytes_of(8, 0));

  // a read returns the pre-access payload, a write returns the overwritten one
  const auto value2 = bytes_of(8, 0x11);
  CHECK(s.client.normal_access(s.store, 7, Op::write, value2) == value);
  CHECK(s.client.normal_access(s.store, 7, Op::read) == value2);
}

TEST_CASE("every access moves exactly one path in each direction") {
  Setup s(2, 1, 0.5, 4, 4, Lambda::infinite(), 2);
  const auto before = s.client.stats();
  s.client.normal_access(s.store, 0, Op::read);
  const auto after = s.client.stats();
  // one path of 2 buckets and 4 slots each, read and written
  CHECK(after.blocks_transferred - before.blocks_transferred == 2 * 2 * 4);
  CHECK(after.real_accesses - before.real_accesses == 1);

  for (int i = 0; i < 50; ++i) {
    const auto b0 = s.client.stats().blocks_transferred;
    s.client.fake_access(s.store);
    CHECK(s.client.stats().blocks_transferred - b0 == 2 * 2 * 4);
  }
}

TEST_CASE("trace records the pre-remap leaf of each access") {
  Setup s(4, 3, 0.5, 4, 4, Lambda::infinite(), 3);
  s.client.clear_trace();
  const std::uint32_t expected = s.client.position_map()[9];
  s.client.normal_access(s.store, 9, Op::read);
  REQUIRE(s.client.trace().size() == 1);
  CHECK(s.client.trace()[0].leaf == expected);
  CHECK_FALSE(s.client.trace()[0].fake);
}

TEST_CASE("read_blocks merges the fetched path with the stash") {
  // a cramped tree keeps plenty of blocks in the stash
  Setup s(3, 1, 0.5, 1, 4, Lambda::infinite(), 30);
  REQUIRE_FALSE(s.client.stash().empty());
  const std::uint32_t stashed = s.client.stash().begin()->first;

  const auto before = s.client.stats().blocks_transferred;
  auto outcome = s.client.read_blocks(s.store, stashed);
  CHECK(outcome.old_leaf == s.client.position_map()[stashed]);
  CHECK(outcome.working.contains(stashed));
  // the stash hit does not skip the path fetch
  CHECK(s.client.stats().blocks_transferred == before);  // read_blocks is transient
  const auto payload = s.client.normal_access(s.store, stashed, Op::read);
  CHECK(payload == outcome.working.at(stashed));
}

TEST_CASE("an unmoved block lands in its own leaf bucket") {
  // p ~ 0 pins every remap to the same leaf; with an empty-ish tree the
  // deepest bucket of the (identical) old and new paths is the leaf bucket
  const Params params = Params::create(3, 3, 1e-12, 4, 4, Lambda::infinite());
  const TreeShape shape = derive_tree_shape(params);
  MemoryBackend store(shape, params.Z, kRecordHeader + params.B);
  Client client(params, make_null_cipher(), 31);
  client.initialize(store);

  const std::uint32_t addr = 5;
  client.normal_access(store, addr, Op::read);
  const std::uint32_t leaf = client.position_map()[addr];
  const BucketBytes& bucket = store.bucket(shape.internal_buckets + leaf);
  bool found = false;
  const std::size_t env = kRecordHeader + params.B;
  for (unsigned slot = 0; slot < params.Z; ++slot) {
    const Block b = client.cipher().open(
        std::span(bucket.data() + slot * env, env), params.B);
    found |= (b.kind == BlockKind::real && b.id == addr);
  }
  CHECK(found);
}

TEST_CASE("request validation") {
  Setup s(3, 2, 0.5, 2, 4, Lambda::infinite(), 4);
  CHECK_THROWS_AS(s.client.normal_access(s.store, 8, Op::read), DomainError);
  CHECK_THROWS_AS(s.client.normal_access(s.store, 0, Op::write, bytes_of(3, 0)),
                  DomainError);
}

TEST_CASE("main invariant and conservation audit over random accesses") {
  Setup s(6, 3, 0.75, 4, 4, Lambda::rate(1.0), 5);
  Prng addr(99);
  for (int i = 0; i < 500; ++i) {
    s.client.normal_access(
        s.store, static_cast<std::uint32_t>(addr.uniform(s.params.n_blocks)),
        Op::read);
    if (i % 50 == 0) audit_full_state(s.client, s.store);
  }
  audit_full_state(s.client, s.store);
}

TEST_CASE("update_mapping marginals") {
  const std::uint64_t trials = 100000;

  SUBCASE("degenerate keep probability") {
    Setup s(4, 2, 1e-9, 2, 4, Lambda::infinite(), 6, false);
    std::uint64_t kept = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      const std::uint32_t before = s.client.position_map()[0];
      kept += (s.client.update_mapping(0) == before);
    }
    CHECK(kept == trials);
  }

  SUBCASE("keep frequency tracks 1 - p") {
    const double p = 0.6;
    Setup s(2, 1, p, 2, 4, Lambda::infinite(), 7, false);
    std::uint64_t kept = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      const std::uint32_t before = s.client.position_map()[0];
      kept += (s.client.update_mapping(0) == before);
    }
    const double freq = static_cast<double>(kept) / trials;
    const double sigma = std::sqrt(p * (1 - p) / trials);
    CHECK(std::abs(freq - (1 - p)) < 3 * sigma);
  }

  SUBCASE("uniform point passes chi-square at the 5% level") {
    const unsigned L = 3;  // N = 8
    const std::uint32_t n = 8;
    Setup s(L, 2, Params::uniform_p(n), 2, 4, Lambda::infinite(), 8, false);
    std::vector<std::uint64_t> counts(n, 0);
    for (std::uint64_t t = 0; t < trials; ++t)
      ++counts[s.client.update_mapping(0)];
    const double expected = static_cast<double>(trials) / n;
    double chi2 = 0;
    for (std::uint32_t leaf = 0; leaf < n; ++leaf) {
      const double d = static_cast<double>(counts[leaf]) - expected;
      chi2 += d * d / expected;
    }
    CHECK(chi2 < 14.067);  // upper 5% of chi-square with 7 dof
  }

  SUBCASE("each specific other leaf is reached with probability p/(N-1)") {
    const double p = 0.5;
    const std::uint32_t n = 4;
    Setup s(2, 1, p, 2, 4, Lambda::infinite(), 9, false);
    // transitions binned by the previous leaf give the conditional law
    std::vector<std::vector<std::uint64_t>> counts(
        n, std::vector<std::uint64_t>(n, 0));
    for (std::uint64_t t = 0; t < trials; ++t) {
      const std::uint32_t before = s.client.position_map()[0];
      ++counts[before][s.client.update_mapping(0)];
    }
    const double p2 = p / (n - 1);
    for (std::uint32_t x = 0; x < n; ++x) {
      const double row = static_cast<double>(std::accumulate(
          counts[x].begin(), counts[x].end(), std::uint64_t{0}));
      REQUIRE(row > 1000);
      for (std::uint32_t z = 0; z < n; ++z) {
        const double expected = (z == x) ? 1 - p : p2;
        const double freq = static_cast<double>(counts[x][z]) / row;
        const double sigma = std::sqrt(expected * (1 - expected) / row);
        CHECK(std::abs(freq - expected) < 4 * sigma);
      }
    }
  }
}

TEST_CASE("push_down places blocks as deep as their mapping allows") {
  const TreeShape shape = TreeShape::create(3, 2);

  SUBCASE("block mapped to the accessed leaf reaches the leaf bucket") {
    const auto plan = push_down(shape, 2, 5, {{1, 5}});
    REQUIRE(plan.level_ids.size() == 3);
    CHECK(plan.level_ids[2] == std::vector<std::uint32_t>{1});
    CHECK(plan.leftover.empty());
  }

  SUBCASE("a deepest-placed working set is a fixed point") {
    // three blocks mapped to the accessed leaf, capacity 1 per bucket: they
    // fill the path leaf-first and stay put on a second pass
    const auto first = push_down(shape, 1, 5, {{0, 5}, {1, 5}, {2, 5}});
    CHECK(first.level_ids[2] == std::vector<std::uint32_t>{0});
    CHECK(first.level_ids[1] == std::vector<std::uint32_t>{1});
    CHECK(first.level_ids[0] == std::vector<std::uint32_t>{2});
    CHECK(first.leftover.empty());
    const auto second = push_down(shape, 1, 5, {{0, 5}, {1, 5}, {2, 5}});
    CHECK(second.level_ids == first.level_ids);
  }

  SUBCASE("deepest-eligible first, ties by id") {
    // Z=1: block 7 mapped to the leaf wins the leaf bucket; 3 and 4 compete
    // for the shallower buckets by id
    const auto plan = push_down(shape, 1, 5, {{4, 4}, {7, 5}, {3, 4}});
    CHECK(plan.level_ids[2] == std::vector<std::uint32_t>{7});
    // leaves 4 and 5 share buckets up to level 1
    CHECK(plan.level_ids[1] == std::vector<std::uint32_t>{3});
    CHECK(plan.level_ids[0] == std::vector<std::uint32_t>{4});
    CHECK(plan.leftover.empty());
  }

  SUBCASE("overflow stays in the stash") {
    const auto plan =
        push_down(shape, 1, 0, {{0, 7}, {1, 7}, {2, 7}, {3, 7}});
    // leaf 0 and leaf 7 share only the root; one block fits there
    CHECK(plan.level_ids[0] == std::vector<std::uint32_t>{0});
    CHECK(plan.level_ids[1].empty());
    CHECK(plan.level_ids[2].empty());
    CHECK(plan.leftover == std::vector<std::uint32_t>{1, 2, 3});
  }
}

TEST_CASE("push_down conserves blocks on random states") {
  Prng rng(123);
  for (int trial = 0; trial < 10000; ++trial) {
    const unsigned L = 1 + static_cast<unsigned>(rng.uniform(5));
    const unsigned k = 1 + static_cast<unsigned>(rng.uniform(L));
    const unsigned Z = 1 + static_cast<unsigned>(rng.uniform(4));
    const TreeShape shape = TreeShape::create(L, k);
    const std::uint32_t n = shape.leaf_buckets;
    const std::uint32_t path_leaf = static_cast<std::uint32_t>(rng.uniform(n));

    const std::size_t count = rng.uniform(2 * Z * shape.path_len + 4);
    std::vector<PlacementInput> blocks;
    for (std::size_t i = 0; i < count; ++i)
      blocks.push_back({static_cast<std::uint32_t>(i),
                        static_cast<std::uint32_t>(rng.uniform(n))});

    const auto plan = push_down(shape, Z, path_leaf, blocks);
    std::vector<std::uint32_t> out = plan.leftover;
    for (unsigned level = 0; level < shape.path_len; ++level) {
      CHECK(plan.level_ids[level].size() <= Z);
      out.insert(out.end(), plan.level_ids[level].begin(),
                 plan.level_ids[level].end());
    }
    std::sort(out.begin(), out.end());
    std::vector<std::uint32_t> expected(count);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(out == expected);
  }
}

TEST_CASE("write placement uses the old/new path intersection") {
  // k=1 and a full root: remapping away from the old leaf leaves only the
  // root as a target, so the block must fall back to the stash
  const Params params = Params::create(3, 1, 0.875, 1, 4, Lambda::infinite());
  MemoryBackend store(derive_tree_shape(params), 1, kRecordHeader + 4);
  Client client(params, make_null_cipher(), 11);
  client.initialize(store);

  std::size_t stash_hits = 0;
  std::size_t trace_len = client.trace().size();
  for (int i = 0; i < 200; ++i) {
    client.normal_access(store, static_cast<std::uint32_t>(i % 8), Op::read);
    stash_hits += client.stash().size();
    // the path write always happens, overflow or not
    CHECK(client.trace().size() == trace_len + 1);
    trace_len = client.trace().size();
  }
  CHECK(stash_hits > 0);  // with Z=1 and frequent remaps, some must overflow
  audit_full_state(client, store);
}

TEST_CASE("lambda infinite serves only real requests") {
  Setup s(3, 2, 0.5, 2, 4, Lambda::infinite(), 12);
  s.client.clear_trace();
  std::vector<AccessRequest> requests(3);
  for (auto& r : requests) r = {Op::read, 1, {}};
  const auto payloads = s.client.access(s.store, requests);
  CHECK(payloads.size() == 3);
  CHECK(s.client.trace().size() == 3);
  for (const auto& entry : s.client.trace()) CHECK_FALSE(entry.fake);
  CHECK(s.client.stats().fake_accesses == 0);
}

TEST_CASE("fake/real ratio approaches 1/lambda") {
  Setup s(6, 3, 0.9, 4, 4, Lambda::rate(1.0), 13);
  std::vector<AccessRequest> requests(10000);
  Prng addr(7);
  for (auto& r : requests)
    r = {Op::read, static_cast<std::uint32_t>(addr.uniform(64)), {}};
  s.client.access(s.store, requests);
  const auto& st = s.client.stats();
  CHECK(st.real_accesses == 10000);
  const double ratio =
      static_cast<double>(st.fake_accesses) / static_cast<double>(st.real_accesses);
  // fakes per real converge to 1/lambda = 1; 3 standard errors of slack
  CHECK(std::abs(ratio - 1.0) < 3.0 * std::sqrt(1.0 / 10000.0) * 2.0);
}

TEST_CASE("fake access on an empty stash still moves a full path") {
  Setup s(3, 3, Params::uniform_p(8), 4, 4, Lambda::infinite(), 14);
  // k = L with Z = 4 drains the stash completely on this tiny tree
  for (int i = 0; i < 100 && !s.client.stash().empty(); ++i)
    s.client.fake_access(s.store);
  REQUIRE(s.client.stash().empty());
  const auto before = s.client.stats().blocks_transferred;
  s.client.fake_access(s.store);
  CHECK(s.client.stats().blocks_transferred - before == 2 * 4 * 4);
}

TEST_CASE("initialization drains the stash through fake accesses") {
  Setup s(6, 6, Params::uniform_p(64), 4, 4, Lambda::infinite(), 15);
  CHECK(s.client.warmup_stats().fake_accesses == 64);
  CHECK(s.client.warmup_stats().max_stash == 64);  // everything starts there
  CHECK(s.client.stats().real_accesses == 0);
  CHECK(s.client.stats().blocks_transferred == 0);
  CHECK(s.client.stash().size() < 64);
  audit_full_state(s.client, s.store);
}

TEST_CASE("identical seeds give identical runs") {
  const auto run = [](std::uint64_t seed) {
    Setup s(5, 3, 0.75, 4, 8, Lambda::rate(2.0), seed);
    std::vector<AccessRequest> requests(200);
    Prng addr(seed + 1);
    for (auto& r : requests)
      r = {Op::read, static_cast<std::uint32_t>(addr.uniform(32)), {}};
    s.client.access(s.store, requests);
    return std::tuple(s.client.position_map(), s.client.stash(),
                      s.client.trace());
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("path-shaped reduction at k = L with uniform remap") {
  const std::uint32_t n = 16;
  const Params params =
      Params::create(4, 4, Params::uniform_p(n), 4, 4, Lambda::infinite());
  const TreeShape shape = derive_tree_shape(params);
  // complete binary tree: every level doubles, leaf fanout is trivial
  CHECK(shape.leaf_fanout == 2);
  CHECK(shape.total_buckets == 2 * n - 1);
  CHECK(shape.path_len == 5);

  MemoryBackend store(shape, 4, kRecordHeader + 4);
  Client client(params, make_null_cipher(), 16);
  client.initialize(store);
  // uniform remap: across many accesses of one block, new leaves cover the
  // whole range
  std::vector<bool> seen(n, false);
  for (int i = 0; i < 600; ++i) {
    client.normal_access(store, 0, Op::read);
    seen[client.position_map()[0]] = true;
  }
  CHECK(std::count(seen.begin(), seen.end(), true) == n);
}

TEST_CASE("failed write leaves the client consistent") {
  struct FailingBackend final : StorageBackend {
    MemoryBackend inner;
    bool fail_writes = false;
    explicit FailingBackend(const TreeShape& shape, unsigned Z, std::size_t env)
        : inner(shape, Z, env) {}
    PathData read_path(std::uint32_t leaf) override {
      return inner.read_path(leaf);
    }
    void write_path(std::uint32_t leaf, const PathData& buckets) override {
      if (fail_writes) throw IoError("injected failure");
      inner.write_path(leaf, buckets);
    }
  };

  const Params params = Params::create(4, 2, 0.5, 4, 4, Lambda::infinite());
  FailingBackend store(derive_tree_shape(params), 4, kRecordHeader + 4);
  Client client(params, make_null_cipher(), 17);
  client.initialize(store);
  for (int i = 0; i < 20; ++i)
    client.normal_access(store, static_cast<std::uint32_t>(i % 16), Op::read);

  const auto position_before = client.position_map();
  const auto stash_before = client.stash();
  store.fail_writes = true;
  CHECK_THROWS_AS(client.normal_access(store, 5, Op::read), IoError);
  store.fail_writes = false;

  // the failed access left no trace in the durable state
  CHECK(client.position_map() == position_before);
  CHECK(client.stash() == stash_before);
  audit_full_state(client, store);
}
