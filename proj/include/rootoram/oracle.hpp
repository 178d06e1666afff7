#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rootoram/core.hpp"

namespace rootoram {

// Exact rational probability; keeps bound checks free of float tolerances.
using Rational = boost::multiprecision::cpp_rational;

// The conservative adversary model: fakes are assumed distinguishable, so
// every access is treated as known. Sequence probabilities follow three
// rules — a first access lands anywhere (1/N); a repeat access shows the
// same leaf as last time with probability p1 and any particular other leaf
// with probability p2; and the probability collapses to zero the moment
// more than `capacity` blocks are mapped to one leaf.
struct ModelParams {
  std::uint32_t n_leaves = 2;
  Rational p1;
  Rational p2;
  std::uint64_t capacity = 1;  // Z(k+1) + C

  static ModelParams create(std::uint32_t n_leaves, const Rational& p,
                            std::uint64_t capacity);

  bool uniform() const { return p1 == p2; }
  Rational bound() const {  // (p1/p2)^2, the two-sided worst case
    return (p1 * p1) / (p2 * p2);
  }
};

// Previous observed leaf of an element; empty means "never accessed".
using PrevLeaf = std::optional<std::uint32_t>;

// Kronecker delta extended so that a never-accessed element's transition
// p2 + (p1-p2)*delta comes out to exactly 1/N. Undefined (throws) at the
// uniform point p1 = p2, where every transition is 1/N anyway.
Rational modified_kronecker(const ModelParams& model, std::uint32_t z,
                            PrevLeaf x);

// One access's factor: probability of observing leaf z for an element whose
// previous observed leaf was x (or unset).
Rational transition_prob(const ModelParams& model, std::uint32_t z, PrevLeaf x);

// Probability that the given real sequence produces the given observed
// sequence. Exactly zero once any leaf exceeds the capacity.
Rational seq_probability(const ModelParams& model,
                         std::span<const std::uint32_t> real,
                         std::span<const std::uint32_t> observed);

struct RatioWitness {
  std::vector<std::uint32_t> real1;
  std::vector<std::uint32_t> real2;
  std::vector<std::uint32_t> observed;
  std::size_t diff_pos = 0;
  Rational prob1;
  Rational prob2;
};

struct MaxRatioResult {
  Rational max_ratio;
  RatioWitness witness;           // lexicographically first maximizer
  bool pattern_witness = false;   // some maximizer shows the tight pattern:
                                  // both neighbours of the changed element on
                                  // the same leaf as it, the alternative
                                  // element twice on a different leaf
};

// Exhausts every pair of real sequences differing in exactly one access and
// every observed sequence, over `element_count` elements and sequences of
// length `seq_len`; returns the largest probability ratio among pairs where
// both probabilities are positive. Cost grows as E^(M+1)·M·N^M — keep the
// instance tiny.
MaxRatioResult max_ratio_bruteforce(const ModelParams& model, unsigned seq_len,
                                    unsigned element_count);

// The overflow pair: M_k distinct elements observed at one leaf can never
// happen, while the same trace with the last access repeating element one
// has positive probability. This probability jump is what delta absorbs.
struct DeltaWitness {
  std::vector<std::uint32_t> real1;    // (1, 2, ..., M_k), zero-based
  std::vector<std::uint32_t> real2;    // (1, 2, ..., M_k - 1, 1)
  std::vector<std::uint32_t> observed; // one leaf repeated
  Rational prob1;                      // exactly 0
  Rational prob2;                      // (1/N)^(M_k - 1) * p1
};

DeltaWitness delta_witness(const ModelParams& model, std::uint32_t leaf = 0);

// Runs the real protocol at small N with fakes disabled and compares the
// observed per-access conditional leaf frequencies with the model factors.
struct DivergenceReport {
  std::uint64_t repeat_trials = 0;
  double same_leaf_frequency = 0.0;   // vs p1
  double same_leaf_expected = 0.0;
  double max_other_leaf_deviation = 0.0;  // vs p2, worst leaf
  double first_touch_max_deviation = 0.0; // vs 1/N over fresh instances
  double max_abs_deviation = 0.0;
};

DivergenceReport empirical_vs_model(const Params& params, std::uint64_t seed,
                                    std::uint64_t trials);

// "a/b" or a plain integer/decimal, as an exact rational.
Rational parse_rational(const std::string& text);

}  // namespace rootoram
