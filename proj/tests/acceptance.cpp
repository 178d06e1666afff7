// Acceptance suite: end-to-end checks of the protocol, the accountant, the
// exact probability model, the metrics, and the networked backend. Each
// criterion prints one PASS/FAIL line; the exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rootoram/metrics.hpp"
#include "rootoram/netserve.hpp"
#include "rootoram/oracle.hpp"
#include "rootoram/privacy.hpp"
#include "rootoram/protocol.hpp"
#include "rootoram/simharness.hpp"

using namespace rootoram;

namespace {

int failures = 0;

void criterion(int number, const std::string& name,
               const std::function<bool(std::string&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  std::printf("[%s] %2d. %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number,
              name.c_str(), secs, detail.empty() ? "" : " -- ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

bool check_ratio_cell(std::uint32_t n, const Rational& p, std::string& detail) {
  const auto model = ModelParams::create(n, p, 2);
  const auto result = max_ratio_bruteforce(model, 3, 4);
  const bool equal = result.max_ratio == model.bound();
  const bool pattern = result.pattern_witness;
  std::ostringstream msg;
  msg << "N=" << n << " p=" << p << ": max=" << result.max_ratio
      << " bound=" << model.bound() << (equal ? "" : " (max < bound)")
      << (pattern ? "" : ", no tight-pattern witness");
  if (!detail.empty()) detail += "; ";
  detail += msg.str();
  return equal && pattern;
}

}  // namespace

int main() {
  criterion(1, "worst-case ratio equals (p1/p2)^2 at M=3, exact", [](std::string& detail) {
    bool ok = true;
    for (std::uint32_t n : {2u, 4u}) {
      const Rational valid_top = 1 - Rational(1, n);
      for (const auto& f :
           {Rational(1, 4), Rational(1, 2), Rational(3, 4)}) {
        ok &= check_ratio_cell(n, f * valid_top, detail);
      }
    }
    return ok;
  });

  criterion(2, "overflow witness: exact zero against a positive neighbour", [](std::string& detail) {
    bool ok = true;
    for (std::uint32_t n : {2u, 4u}) {
      for (std::uint64_t capacity : {2ull, 3ull, 4ull}) {
        const auto model = ModelParams::create(n, Rational(1, 2), capacity);
        const auto wit = delta_witness(model);
        ok &= (wit.prob1 == 0);
        Rational expected = model.p1;
        for (std::uint64_t i = 0; i + 1 < capacity + 1; ++i)
          expected *= Rational(1, n);
        ok &= (wit.prob2 == expected && wit.prob2 > 0);
      }
    }
    if (!ok) detail = "witness probabilities off";
    return ok;
  });

  criterion(3, "measured bandwidth within 3% of 2Z(k+1)(1+1/lambda)", [](std::string& detail) {
    struct Cell {
      unsigned Z, k;
      Lambda lambda;
    };
    const unsigned L = 10;
    const std::vector<Cell> cells{{2, 1, Lambda::rate(4.0)},
                                  {2, L, Lambda::rate(1.0)},
                                  {4, 3, Lambda::infinite()}};
    bool ok = true;
    std::ostringstream msg;
    for (const Cell& cell : cells) {
      SimConfig config;
      const double p = 1.0 - std::ldexp(1.0, -static_cast<int>(cell.k));
      config.params = Params::create(L, cell.k, p, cell.Z, 16, cell.lambda);
      config.accesses = 10000;
      config.seed = 1;
      const StashStats stats = run_sim(config);
      const double measured = static_cast<double>(stats.blocks_transferred) /
                              static_cast<double>(stats.real_accesses);
      const double predicted = bandwidth_of(cell.Z, cell.k, cell.lambda);
      const double rel = std::abs(measured - predicted) / predicted;
      ok &= (rel < 0.03);
      if (cell.Z == 2 && cell.k == 1) ok &= std::abs(measured - 10.0) < 0.3;
      msg << " (Z=" << cell.Z << ",k=" << cell.k
          << "): " << measured << " vs " << predicted;
    }
    detail = msg.str();
    return ok;
  });

  criterion(4, "remap marginals at N=16: 3-sigma and chi-square", [](std::string& detail) {
    const std::uint64_t trials = 100000;
    bool ok = true;
    std::ostringstream msg;
    for (const double p : {0.5, 1.0 - 1.0 / 16.0}) {
      const Params params = Params::create(4, 2, p, 2, 8, Lambda::infinite());
      Client client(params, make_null_cipher(), 2);
      std::uint64_t kept = 0;
      std::vector<std::uint64_t> counts(16, 0);
      for (std::uint64_t t = 0; t < trials; ++t) {
        const std::uint32_t before = client.position_map()[0];
        const std::uint32_t after = client.update_mapping(0);
        kept += (after == before);
        ++counts[after];
      }
      const double freq = static_cast<double>(kept) / trials;
      const double sigma = std::sqrt(p * (1 - p) / trials);
      ok &= std::abs(freq - (1 - p)) < 3 * sigma;
      msg << " p=" << p << ": keep=" << freq;
      if (p > 0.9) {  // uniform case
        const double expected = static_cast<double>(trials) / 16.0;
        double chi2 = 0;
        for (const auto c : counts) {
          const double d = static_cast<double>(c) - expected;
          chi2 += d * d / expected;
        }
        ok &= chi2 < 24.996;  // 5% upper tail, 15 dof
        msg << " chi2=" << chi2;
      }
    }
    detail = msg.str();
    return ok;
  });

  criterion(5, "invariant audit every 1000 accesses over 1e5 accesses", [](std::string& detail) {
    SimConfig config;
    config.params =
        Params::create(10, 5, 1.0 - std::ldexp(1.0, -5), 4, 16, Lambda::rate(1.0));
    config.accesses = 100000;
    config.seed = 3;
    config.audit_interval = 1000;
    const StashStats stats = run_sim(config);  // audits throw on violation
    std::ostringstream msg;
    msg << stats.real_accesses << " real + " << stats.fake_accesses
        << " fake accesses, zero violations";
    detail = msg.str();
    return stats.real_accesses == 100000;
  });

  criterion(6, "stash stays small and grows slowly with M", [](std::string& detail) {
    const unsigned L = 10;
    const std::uint64_t n = 1 << L;
    bool ok = true;
    std::ostringstream msg;

    // complete tree, uniform remap, no fakes: max stash under 150 blocks
    std::size_t worst = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SimConfig config;
      config.params = Params::create(L, L, Params::uniform_p(1 << L), 4, 16,
                                     Lambda::infinite());
      config.accesses = 16 * n;
      config.seed = seed;
      const StashStats stats = run_sim(config);
      worst = std::max(worst, stats.max_stash);
    }
    ok &= (worst <= 150);
    msg << "max stash over 5 seeds: " << worst << " (<= 150)";

    // p tied to k, fakes at rate 1: the maximum over k grows by at most 4x
    // from N to 100N accesses
    const std::vector<std::uint64_t> milestones{n, 100 * n};
    double worst_ratio = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      std::size_t max_at_n = 0, max_at_100n = 0;
      for (unsigned k = 1; k <= L; ++k) {
        const Params params = Params::create(
            L, k, 1.0 - std::ldexp(1.0, -static_cast<int>(k)), 4, 16,
            Lambda::rate(1.0));
        const auto maxima = m_growth_maxima(params, milestones, seed);
        max_at_n = std::max(max_at_n, maxima[0]);
        max_at_100n = std::max(max_at_100n, maxima[1]);
      }
      const double ratio = max_at_n == 0
                               ? 0.0
                               : static_cast<double>(max_at_100n) /
                                     static_cast<double>(max_at_n);
      worst_ratio = std::max(worst_ratio, ratio);
    }
    ok &= (worst_ratio <= 4.0);
    msg << "; growth ratio over 3 seeds: " << worst_ratio << " (<= 4)";
    detail = msg.str();
    return ok;
  });

  criterion(7, "accountant identities", [](std::string& detail) {
    bool ok = true;
    for (std::uint64_t n = 2; n <= (std::uint64_t{1} << 20); n *= 2)
      for (double eps = 0.0; eps <= 40.0; eps += 0.5)
        ok &= std::abs(epsilon_of(n, solve_p_for_epsilon(n, eps)) - eps) < 1e-9;

    const PrivacySpec unit{0.25, 1e-8};
    const PrivacySpec m5 = compose(5, unit);
    ok &= std::abs(m5.epsilon - 1.25) < 1e-12 && std::abs(m5.delta - 5e-8) < 1e-20;
    const RecursionPlan plan = recursion_plan(3, unit, 10.0, 12.0);
    ok &= std::abs(plan.bandwidth - 30.0) < 1e-12;
    ok &= std::abs(plan.outsourcing_ratio - 12.0 * 12.0 * 12.0) < 1e-9;
    ok &= std::abs(plan.spec.epsilon - 0.75) < 1e-12;
    ok &= (delta_of(0.5, 0, 1, 1) == 0.125);
    if (!ok) detail = "identity check failed";
    return ok;
  });

  criterion(8, "metrics identities and exact k-anonymity", [](std::string& detail) {
    bool ok = true;
    Prng rng(4);
    const auto random_distribution = [&rng](std::size_t size) {
      std::vector<double> mass(size);
      double total = 0;
      for (auto& m : mass) {
        m = rng.uniform_double() + 1e-9;
        total += m;
      }
      for (auto& m : mass) m /= total;
      return mass;
    };
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = random_distribution(2 + rng.uniform(40));
      const std::vector<double> uniform(p.size(), 1.0 / p.size());
      ok &= std::abs(kl_divergence(p, uniform) -
                     (std::log(static_cast<double>(p.size())) -
                      shannon_entropy(p))) < 1e-12;
    }
    for (int trial = 0; trial < 1000; ++trial) {
      const auto p = random_distribution(2 + rng.uniform(30));
      ok &= min_entropy(p) <= shannon_entropy(p) + 1e-12;
    }

    // exact channel at N=2, capacity 1, two elements, length 2, vs a direct
    // preimage count
    const auto model = ModelParams::create(2, Rational(1, 4), 1);
    std::vector<std::vector<std::uint32_t>> seqs;
    for (std::uint32_t a = 0; a < 2; ++a)
      for (std::uint32_t b = 0; b < 2; ++b) seqs.push_back({a, b});
    std::vector<std::vector<double>> rows(4, std::vector<double>(4, 0.0));
    unsigned expected = 4;
    for (unsigned o = 0; o < 4; ++o) {
      unsigned preimage = 0;
      for (unsigned i = 0; i < 4; ++i) {
        const Rational prob = seq_probability(model, seqs[i], seqs[o]);
        rows[i][o] = prob.convert_to<double>();
        if (prob > 0) ++preimage;
      }
      if (preimage > 0) expected = std::min(expected, preimage);
    }
    ok &= (k_anonymity(rows) == expected);
    std::ostringstream msg;
    msg << "k=" << k_anonymity(rows) << " (expected " << expected << ")";
    detail = msg.str();
    return ok;
  });

  criterion(9, "loopback backend is bit-identical to in-memory", [](std::string& detail) {
    const Params params =
        Params::create(8, 4, 1.0 - std::ldexp(1.0, -4), 4, 16, Lambda::rate(1.0));
    const TreeShape shape = derive_tree_shape(params);
    const std::size_t env_size = kRecordHeader + params.B;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto drive = [&](Client& client, StorageBackend& store) {
        client.initialize(store);
        Prng addr(seed * 131 + 7);
        for (int i = 0; i < 1000; ++i)
          client.normal_access(
              store,
              static_cast<std::uint32_t>(addr.uniform(params.n_blocks)),
              Op::read);
      };
      MemoryBackend local(shape, params.Z, env_size);
      Client local_client(params, make_null_cipher(), seed);
      drive(local_client, local);

      MemoryBackend remote_store(shape, params.Z, env_size);
      NetServer server(remote_store, shape, params.Z, env_size);
      const std::uint16_t port = server.start("127.0.0.1", 0);
      Client remote_client(params, make_null_cipher(), seed);
      RemoteBackend remote("127.0.0.1", port, shape, params.Z, env_size);
      drive(remote_client, remote);

      ok &= (local_client.position_map() == remote_client.position_map());
      ok &= (local_client.stash() == remote_client.stash());
      ok &= (local_client.trace() == remote_client.trace());
      ok &= (local == remote_store);
    }
    if (!ok) detail = "states diverged";
    return ok;
  });

  criterion(10, "throttled latency is monotone in k with >3x spread", [](std::string& detail) {
    const std::vector<BenchCell> cells{{1, 2, 1024, 1'000'000},
                                       {4, 2, 1024, 1'000'000},
                                       {7, 2, 1024, 1'000'000},
                                       {10, 2, 1024, 1'000'000}};
    const auto rows = bench_latency(10, cells, 16, 5);
    bool ok = true;
    std::ostringstream msg;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0) ok &= (rows[i].mean_ms >= rows[i - 1].mean_ms);
      msg << " k=" << rows[i].cell.k << ": " << rows[i].mean_ms << "ms";
    }
    const double spread = rows.back().mean_ms / rows.front().mean_ms;
    ok &= (spread > 3.0);
    msg << "; spread " << spread << "x";
    detail = msg.str();
    return ok;
  });

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
