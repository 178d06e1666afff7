#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rootoram/core.hpp"

namespace rootoram {

struct SimConfig {
  Params params;
  std::uint64_t accesses = 0;        // real accesses to issue
  std::uint64_t seed = 0;
  unsigned sample_interval = 64;     // stash time series granularity
  unsigned audit_interval = 0;       // 0 disables the full-state audit
};

struct StashStats {
  std::size_t max_stash = 0;  // quiescent maximum, warm-up excluded
  std::vector<std::pair<std::uint64_t, std::size_t>> series;
  std::uint64_t blocks_transferred = 0;
  std::uint64_t real_accesses = 0;
  std::uint64_t fake_accesses = 0;
  std::size_t warmup_max_stash = 0;
  std::uint64_t warmup_blocks = 0;
  double wall_seconds = 0.0;  // informational; not part of any CSV
};

// Drives the protocol against an in-memory store with uniformly random read
// addresses, fakes interleaved per lambda, using the null cipher. Identical
// seeds give identical stats.
StashStats run_sim(const SimConfig& config);

// Same loop over a caller-supplied store (e.g. a remote backend).
class StorageBackend;
StashStats run_protocol(const SimConfig& config, StorageBackend& store);

// Total data outsourced over the local storage the stash needed. N when the
// stash stayed empty.
double outsourcing_ratio(const Params& params, const StashStats& stats);

// Position map footprint, reported next to R rather than folded into it.
std::uint64_t position_map_bytes(const Params& params);

struct SweepGrid {
  std::vector<unsigned> L;
  std::vector<unsigned> k;
  std::vector<unsigned> Z;
  std::vector<unsigned> p_i;     // p = 1 - 2^-i
  std::vector<Lambda> lambda;
  std::vector<std::uint64_t> M;  // real accesses per cell
  std::vector<std::uint64_t> seeds;

  // {"L":[...],"k":[...],"Z":[...],"p_i":[...],"lambda":[...],"M":[...],
  //  "seeds":[...]}; lambda entries are numbers or "inf".
  static SweepGrid from_json(const std::string& text);
};

// One CSV row per grid cell:
//   L,k,Z,p,lambda,M,seed,max_stash,R,epsilon,delta,bandwidth,
//   posmap_bytes,warmup_max_stash
// Cells where k or the p exponent exceeds L are skipped (the cross product
// over mixed L values would otherwise be unusable). delta is evaluated at
// C = the measured max stash. Cells may run in parallel; row order and
// content depend only on the grid.
void sweep(const SweepGrid& grid, std::ostream& out, unsigned jobs = 1,
           unsigned audit_interval = 1000);

// Max stash as a function of the access count: one run to the largest M,
// with the running maximum snapshotted at each requested milestone (so the
// curve is a prefix property of a single seed). CSV columns:
//   L,k,Z,p,lambda,M,seed,max_stash
void m_growth(const Params& params, std::span<const std::uint64_t> m_values,
              std::uint64_t seed, std::ostream& out);

// The milestone maxima alone, for callers that aggregate.
std::vector<std::size_t> m_growth_maxima(const Params& params,
                                         std::span<const std::uint64_t> m_values,
                                         std::uint64_t seed);

}  // namespace rootoram
