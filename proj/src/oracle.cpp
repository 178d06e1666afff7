#include "rootoram/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rootoram/protocol.hpp"

namespace rootoram {

ModelParams ModelParams::create(std::uint32_t n_leaves, const Rational& p,
                                std::uint64_t capacity) {
  if (n_leaves < 2) throw DomainError("model needs at least 2 leaves");
  if (capacity < 1) throw DomainError("capacity must be at least 1");
  const Rational p_max = 1 - Rational(1, n_leaves);
  if (!(p > 0) || p > p_max) throw DomainError("p must be in (0, 1 - 1/N]");
  ModelParams model;
  model.n_leaves = n_leaves;
  model.p1 = 1 - p;
  model.p2 = p / Rational(n_leaves - 1);
  model.capacity = capacity;
  return model;
}

Rational modified_kronecker(const ModelParams& model, std::uint32_t z,
                            PrevLeaf x) {
  if (!x.has_value()) {
    if (model.uniform())
      throw DomainError(
          "sentinel branch undefined at the uniform point; the factor is 1/N");
    return (Rational(1, model.n_leaves) - model.p2) / (model.p1 - model.p2);
  }
  return z == *x ? Rational(1) : Rational(0);
}

Rational transition_prob(const ModelParams& model, std::uint32_t z,
                         PrevLeaf x) {
  if (z >= model.n_leaves) throw DomainError("leaf out of range");
  if (!x.has_value() || model.uniform()) return Rational(1, model.n_leaves);
  return model.p2 + (model.p1 - model.p2) * modified_kronecker(model, z, x);
}

Rational seq_probability(const ModelParams& model,
                         std::span<const std::uint32_t> real,
                         std::span<const std::uint32_t> observed) {
  if (real.size() != observed.size())
    throw DomainError("sequences must have equal length");

  std::map<std::uint32_t, std::uint32_t> last_leaf;  // element -> leaf
  std::map<std::uint32_t, std::uint64_t> leaf_load;  // leaf -> mapped count
  Rational prob = 1;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const std::uint32_t element = real[i];
    const std::uint32_t leaf = observed[i];
    if (leaf >= model.n_leaves) throw DomainError("observed leaf out of range");

    const auto prev = last_leaf.find(element);
    if (prev == last_leaf.end()) {
      prob *= Rational(1, model.n_leaves);
      last_leaf.emplace(element, leaf);
    } else {
      prob *= (prev->second == leaf) ? model.p1 : model.p2;
      --leaf_load[prev->second];
      prev->second = leaf;
    }
    if (++leaf_load[leaf] > model.capacity) return Rational(0);
  }
  return prob;
}

namespace {

bool next_tuple(std::vector<std::uint32_t>& tuple, std::uint32_t base) {
  for (std::size_t i = tuple.size(); i-- > 0;) {
    if (++tuple[i] < base) return true;
    tuple[i] = 0;
  }
  return false;
}

// The tight configuration: the changed element sits between two of its own
// accesses, all three on one leaf, while the alternative element's
// neighbouring accesses share a different leaf.
bool matches_pattern(const std::vector<std::uint32_t>& real1,
                     const std::vector<std::uint32_t>& real2,
                     const std::vector<std::uint32_t>& observed,
                     std::size_t diff_pos) {
  const std::uint32_t a = real1[diff_pos];
  const std::uint32_t b = real2[diff_pos];
  const std::uint32_t leaf = observed[diff_pos];

  const auto neighbour = [&](const std::vector<std::uint32_t>& seq,
                             std::uint32_t element,
                             bool before) -> PrevLeaf {
    if (before) {
      for (std::size_t j = diff_pos; j-- > 0;)
        if (seq[j] == element) return observed[j];
    } else {
      for (std::size_t j = diff_pos + 1; j < seq.size(); ++j)
        if (seq[j] == element) return observed[j];
    }
    return std::nullopt;
  };

  const PrevLeaf pa = neighbour(real1, a, true);
  const PrevLeaf na = neighbour(real1, a, false);
  const PrevLeaf pb = neighbour(real2, b, true);
  const PrevLeaf nb = neighbour(real2, b, false);
  return pa && na && pb && nb && *pa == leaf && *na == leaf && *pb == *nb &&
         *pb != leaf;
}

}  // namespace

MaxRatioResult max_ratio_bruteforce(const ModelParams& model, unsigned seq_len,
                                    unsigned element_count) {
  if (seq_len < 1) throw DomainError("sequence length must be at least 1");
  if (element_count < 2) throw DomainError("need at least 2 elements");

  const double cost = std::pow(element_count, seq_len) * seq_len *
                      (element_count - 1) *
                      std::pow(model.n_leaves, seq_len);
  if (cost > 5e7) throw DomainError("instance too large to enumerate");

  MaxRatioResult result;
  result.max_ratio = 0;

  std::vector<std::uint32_t> real1(seq_len, 0);
  do {
    std::vector<std::uint32_t> real2 = real1;
    for (std::size_t pos = 0; pos < seq_len; ++pos) {
      const std::uint32_t original = real1[pos];
      for (std::uint32_t alt = 0; alt < element_count; ++alt) {
        if (alt == original) continue;
        real2[pos] = alt;
        std::vector<std::uint32_t> observed(seq_len, 0);
        do {
          const Rational p1 = seq_probability(model, real1, observed);
          if (p1 == 0) continue;
          const Rational p2 = seq_probability(model, real2, observed);
          if (p2 == 0) continue;
          const Rational ratio = p1 / p2;
          if (ratio > result.max_ratio) {
            result.max_ratio = ratio;
            result.witness = {real1, real2, observed, pos, p1, p2};
            result.pattern_witness =
                matches_pattern(real1, real2, observed, pos);
          } else if (ratio == result.max_ratio && !result.pattern_witness) {
            result.pattern_witness =
                matches_pattern(real1, real2, observed, pos);
          }
        } while (next_tuple(observed, model.n_leaves));
      }
      real2[pos] = original;
    }
  } while (next_tuple(real1, element_count));
  return result;
}

DeltaWitness delta_witness(const ModelParams& model, std::uint32_t leaf) {
  if (leaf >= model.n_leaves) throw DomainError("leaf out of range");
  const std::uint64_t m_k = model.capacity + 1;

  DeltaWitness wit;
  wit.real1.resize(m_k);
  for (std::uint64_t i = 0; i < m_k; ++i)
    wit.real1[i] = static_cast<std::uint32_t>(i);
  wit.real2 = wit.real1;
  wit.real2.back() = wit.real2.front();
  wit.observed.assign(m_k, leaf);

  wit.prob1 = seq_probability(model, wit.real1, wit.observed);
  wit.prob2 = seq_probability(model, wit.real2, wit.observed);

  if (wit.prob1 != 0)
    throw InvariantViolation("overflow sequence has nonzero probability");
  Rational expected = model.p1;
  for (std::uint64_t i = 0; i + 1 < m_k; ++i)
    expected *= Rational(1, model.n_leaves);
  if (wit.prob2 != expected)
    throw InvariantViolation("witness probability mismatch");
  return wit;
}

DivergenceReport empirical_vs_model(const Params& params, std::uint64_t seed,
                                    std::uint64_t trials) {
  if (!params.lambda.is_infinite())
    throw DomainError("model comparison assumes fakes are disabled");
  if (params.n_blocks > 64) throw DomainError("keep N small for this check");

  const std::uint32_t n = params.n_blocks;
  DivergenceReport report;
  report.repeat_trials = trials;
  report.same_leaf_expected = params.p1();

  // Repeat accesses of one element: consecutive observed leaves follow the
  // remap distribution directly.
  {
    MemoryBackend store(derive_tree_shape(params), params.Z,
                        kRecordHeader + params.B);
    Client client(params, make_null_cipher(), seed);
    client.initialize(store);

    // transitions[x][z]: accesses whose previous observed leaf was x and
    // whose current observed leaf is z
    std::vector<std::vector<std::uint64_t>> transitions(
        n, std::vector<std::uint64_t>(n, 0));
    std::uint64_t same = 0;
    std::uint32_t prev = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      client.normal_access(store, 0, Op::read);
      const std::uint32_t leaf = client.trace().back().leaf;
      if (t > 0) {
        ++transitions[prev][leaf];
        if (leaf == prev) ++same;
      }
      prev = leaf;
    }
    report.same_leaf_frequency =
        static_cast<double>(same) / static_cast<double>(trials - 1);
    const double p2 = params.p2();
    for (std::uint32_t x = 0; x < n; ++x) {
      std::uint64_t row_total = 0;
      for (std::uint32_t z = 0; z < n; ++z) row_total += transitions[x][z];
      if (row_total == 0) continue;
      for (std::uint32_t z = 0; z < n; ++z) {
        const double freq = static_cast<double>(transitions[x][z]) /
                            static_cast<double>(row_total);
        const double expected = (z == x) ? params.p1() : p2;
        if (z != x)
          report.max_other_leaf_deviation = std::max(
              report.max_other_leaf_deviation, std::abs(freq - expected));
      }
    }
    report.max_abs_deviation =
        std::abs(report.same_leaf_frequency - report.same_leaf_expected);
    report.max_abs_deviation =
        std::max(report.max_abs_deviation, report.max_other_leaf_deviation);
  }

  // First touches: the initial position of a block is uniform across
  // instances.
  {
    const std::uint64_t instances = std::min<std::uint64_t>(trials, 20000);
    std::vector<std::uint64_t> counts(n, 0);
    for (std::uint64_t s = 0; s < instances; ++s) {
      Client client(params, make_null_cipher(), seed * 0x9e3779b97f4a7c15ULL +
                                                    s + 1);
      ++counts[client.position_map()[0]];
    }
    const double expected = 1.0 / static_cast<double>(n);
    for (std::uint32_t leaf = 0; leaf < n; ++leaf) {
      const double freq =
          static_cast<double>(counts[leaf]) / static_cast<double>(instances);
      report.first_touch_max_deviation =
          std::max(report.first_touch_max_deviation, std::abs(freq - expected));
    }
    report.max_abs_deviation =
        std::max(report.max_abs_deviation, report.first_touch_max_deviation);
  }
  return report;
}

namespace {

// cpp_int's string constructor reads a leading zero as octal; parse decimal
// digit strings explicitly instead.
boost::multiprecision::cpp_int parse_decimal_digits(const std::string& text) {
  if (text.empty()) throw DomainError("empty number");
  std::size_t start = 0;
  bool negative = false;
  if (text[0] == '+' || text[0] == '-') {
    negative = (text[0] == '-');
    start = 1;
  }
  if (start == text.size()) throw DomainError("empty number");
  boost::multiprecision::cpp_int value = 0;
  for (std::size_t i = start; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') throw DomainError("not a digit");
    value = value * 10 + (text[i] - '0');
  }
  return negative ? -value : value;
}

}  // namespace

Rational parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      const Rational num(parse_decimal_digits(text.substr(0, slash)));
      const Rational den(parse_decimal_digits(text.substr(slash + 1)));
      if (den == 0) throw DomainError("zero denominator");
      return num / den;
    }
    const auto dot = text.find('.');
    if (dot != std::string::npos) {
      // decimal: digits after the dot scale a power of ten
      const std::string digits = text.substr(0, dot) + text.substr(dot + 1);
      Rational scale = 1;
      for (std::size_t i = dot + 1; i < text.size(); ++i) scale *= 10;
      return Rational(parse_decimal_digits(digits)) / scale;
    }
    return Rational(parse_decimal_digits(text));
  } catch (const std::exception&) {
    throw DomainError("cannot parse rational: " + text);
  }
}

}  // namespace rootoram
