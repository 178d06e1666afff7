#include "rootoram/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "rootoram/privacy.hpp"
#include "rootoram/protocol.hpp"

namespace rootoram {

namespace {

// Uniformly random read requests, generated on the fly.
class RandomReads final : public RequestSource {
 public:
  RandomReads(std::uint32_t n_blocks, std::uint64_t count, std::uint64_t seed)
      : n_blocks_(n_blocks), remaining_(count), rng_(seed) {}

  const AccessRequest* next() override {
    if (remaining_ == 0) return nullptr;
    --remaining_;
    current_.op = Op::read;
    current_.addr = static_cast<std::uint32_t>(rng_.uniform(n_blocks_));
    return &current_;
  }

 private:
  std::uint32_t n_blocks_;
  std::uint64_t remaining_;
  Prng rng_;
  AccessRequest current_;
};

constexpr std::uint64_t kRequestSeedSalt = 0xd1b54a32d192ed03ULL;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_lambda(Lambda lambda) {
  return lambda.is_infinite() ? "inf" : format_double(lambda.value());
}

}  // namespace

StashStats run_protocol(const SimConfig& config, StorageBackend& store) {
  const auto start = std::chrono::steady_clock::now();
  const Params& params = config.params;

  Client client(params, make_null_cipher(), config.seed);
  client.initialize(store);

  RandomReads requests(params.n_blocks, config.accesses,
                       config.seed ^ kRequestSeedSalt);
  StashStats stats;
  std::uint64_t count = 0;
  client.run(store, requests, [&](bool) {
    ++count;
    if (config.sample_interval && count % config.sample_interval == 0)
      stats.series.emplace_back(count, client.stash().size());
    if (config.audit_interval && count % config.audit_interval == 0)
      audit_full_state(client, store);
  });

  stats.max_stash = client.stats().max_stash;
  stats.blocks_transferred = client.stats().blocks_transferred;
  stats.real_accesses = client.stats().real_accesses;
  stats.fake_accesses = client.stats().fake_accesses;
  stats.warmup_max_stash = client.warmup_stats().max_stash;
  stats.warmup_blocks = client.warmup_stats().blocks_transferred;
  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return stats;
}

StashStats run_sim(const SimConfig& config) {
  auto cipher = make_null_cipher();
  MemoryBackend store(derive_tree_shape(config.params), config.params.Z,
                      cipher->envelope_size(config.params.B));
  return run_protocol(config, store);
}

double outsourcing_ratio(const Params& params, const StashStats& stats) {
  const double n = static_cast<double>(params.n_blocks);
  if (stats.max_stash == 0) return n;
  return n / static_cast<double>(stats.max_stash);
}

std::uint64_t position_map_bytes(const Params& params) {
  // N entries of L bits each, rounded up to whole bytes
  return (std::uint64_t{params.n_blocks} * params.L + 7) / 8;
}

SweepGrid SweepGrid::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("grid: ") + e.what());
  }
  const auto get_list = [&](const char* key) {
    if (!doc.contains(key))
      throw DomainError(std::string("grid: missing key ") + key);
    return doc.at(key);
  };
  SweepGrid grid;
  try {
    for (const auto& v : get_list("L")) grid.L.push_back(v.get<unsigned>());
    for (const auto& v : get_list("k")) grid.k.push_back(v.get<unsigned>());
    for (const auto& v : get_list("Z")) grid.Z.push_back(v.get<unsigned>());
    for (const auto& v : get_list("p_i"))
      grid.p_i.push_back(v.get<unsigned>());
    for (const auto& v : get_list("lambda")) {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s != "inf" && s != "infinite")
          throw DomainError("grid: bad lambda " + s);
        grid.lambda.push_back(Lambda::infinite());
      } else {
        grid.lambda.push_back(Lambda::rate(v.get<double>()));
      }
    }
    for (const auto& v : get_list("M")) grid.M.push_back(v.get<std::uint64_t>());
    for (const auto& v : get_list("seeds"))
      grid.seeds.push_back(v.get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("grid: ") + e.what());
  }
  if (grid.L.empty() || grid.k.empty() || grid.Z.empty() || grid.p_i.empty() ||
      grid.lambda.empty() || grid.M.empty() || grid.seeds.empty())
    throw DomainError("grid: every list needs at least one entry");
  return grid;
}

void sweep(const SweepGrid& grid, std::ostream& out, unsigned jobs,
           unsigned audit_interval) {
  struct Cell {
    Params params;
    std::uint64_t accesses;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (unsigned L : grid.L)
    for (unsigned k : grid.k)
      for (unsigned Z : grid.Z)
        for (unsigned i : grid.p_i)
          for (Lambda lambda : grid.lambda)
            for (std::uint64_t m : grid.M)
              for (std::uint64_t seed : grid.seeds) {
                if (k > L || i > L) continue;  // outside the family
                const double p = 1.0 - std::ldexp(1.0, -static_cast<int>(i));
                cells.push_back(
                    {Params::create(L, k, p, Z, 64, lambda), m, seed});
              }

  std::vector<std::string> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= cells.size()) return;
      const Cell& cell = cells[index];
      SimConfig config;
      config.params = cell.params;
      config.accesses = cell.accesses;
      config.seed = cell.seed;
      config.audit_interval = audit_interval;
      StashStats stats;
      try {
        stats = run_sim(config);
      } catch (const std::exception& e) {
        errors[index] = e.what();
        continue;
      }

      const Params& p = cell.params;
      const double eps = epsilon_of(p.n_blocks, p.p);
      const double del = delta_of(p.p, stats.max_stash, p.Z, p.k);
      const double bw = bandwidth_of(p.Z, p.k, p.lambda);
      std::string row;
      row += std::to_string(p.L) + ',' + std::to_string(p.k) + ',' +
             std::to_string(p.Z) + ',' + format_double(p.p) + ',' +
             format_lambda(p.lambda) + ',' + std::to_string(cell.accesses) +
             ',' + std::to_string(cell.seed) + ',' +
             std::to_string(stats.max_stash) + ',' +
             format_double(outsourcing_ratio(p, stats)) + ',' +
             format_double(eps) + ',' + format_double(del) + ',' +
             format_double(bw) + ',' + std::to_string(position_map_bytes(p)) +
             ',' + std::to_string(stats.warmup_max_stash);
      rows[index] = std::move(row);
    }
  };

  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(jobs, std::thread::hardware_concurrency()));
  if (n_threads <= 1 || cells.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (errors[i].empty()) continue;
    const Cell& cell = cells[i];
    throw InvariantViolation(
        "sweep cell (L=" + std::to_string(cell.params.L) +
        ",k=" + std::to_string(cell.params.k) + ",Z=" +
        std::to_string(cell.params.Z) + ",seed=" + std::to_string(cell.seed) +
        ") aborted: " + errors[i]);
  }

  out << "L,k,Z,p,lambda,M,seed,max_stash,R,epsilon,delta,bandwidth,"
         "posmap_bytes,warmup_max_stash\n";
  for (const std::string& row : rows) out << row << '\n';
}

std::vector<std::size_t> m_growth_maxima(const Params& params,
                                         std::span<const std::uint64_t> m_values,
                                         std::uint64_t seed) {
  if (m_values.empty()) throw DomainError("need at least one M value");
  for (std::size_t i = 1; i < m_values.size(); ++i)
    if (m_values[i] <= m_values[i - 1])
      throw DomainError("M values must be strictly increasing");

  auto cipher = make_null_cipher();
  MemoryBackend store(derive_tree_shape(params), params.Z,
                      cipher->envelope_size(params.B));
  Client client(params, std::move(cipher), seed);
  client.initialize(store);

  RandomReads requests(params.n_blocks, m_values.back(),
                       seed ^ kRequestSeedSalt);
  std::vector<std::size_t> maxima;
  maxima.reserve(m_values.size());
  std::size_t milestone = 0;
  client.run(store, requests, [&](bool fake) {
    if (fake) return;
    // milestones count real accesses
    while (milestone < m_values.size() &&
           client.stats().real_accesses == m_values[milestone]) {
      maxima.push_back(client.stats().max_stash);
      ++milestone;
    }
  });
  while (milestone < m_values.size()) {  // stream ended on a fake batch edge
    maxima.push_back(client.stats().max_stash);
    ++milestone;
  }
  return maxima;
}

void m_growth(const Params& params, std::span<const std::uint64_t> m_values,
              std::uint64_t seed, std::ostream& out) {
  const std::vector<std::size_t> maxima =
      m_growth_maxima(params, m_values, seed);
  out << "L,k,Z,p,lambda,M,seed,max_stash\n";
  for (std::size_t i = 0; i < m_values.size(); ++i) {
    out << params.L << ',' << params.k << ',' << params.Z << ','
        << format_double(params.p) << ',' << format_lambda(params.lambda)
        << ',' << m_values[i] << ',' << seed << ',' << maxima[i] << '\n';
  }
}

}  // namespace rootoram
