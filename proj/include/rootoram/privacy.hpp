#pragma once

#include <cstdint>

#include "rootoram/core.hpp"

namespace rootoram {

// A privacy guarantee on natural-log scale: for inputs differing in one
// access, output-event probabilities differ by at most a factor e^epsilon
// plus additive delta.
struct PrivacySpec {
  double epsilon = 0.0;
  double delta = 0.0;

  bool operator==(const PrivacySpec&) const = default;
};

// Capacity bookkeeping for a leaf: a path holds Z(k+1) slots and the stash
// up to C blocks, so at most Z(k+1)+C blocks can be mapped to one leaf;
// one more and the scheme has failed.
struct CapacityModel {
  std::uint64_t stash_bound = 0;  // C
  unsigned Z = 1;
  unsigned k = 1;

  std::uint64_t capacity() const {
    return std::uint64_t{Z} * (k + 1) + stash_bound;
  }
  std::uint64_t overflow_threshold() const { return capacity() + 1; }  // M_k
};

// epsilon = 2 ln((N-1)(1-p)/p); zero exactly at the uniform point
// p = 1 - 1/N.
double epsilon_of(std::uint64_t n_blocks, double p);

// delta = (1-p)^(C + Z(k+1) + 1).
double delta_of(double p, std::uint64_t stash_bound, unsigned Z, unsigned k);

// Blocks moved per real access: 2 Z (k+1) (1 + 1/lambda); the fake-access
// surcharge vanishes when lambda is infinite.
double bandwidth_of(unsigned Z, unsigned k, Lambda lambda);

// Linear composition over m accesses' worth of difference. delta saturates
// at 1, as a probability must.
PrivacySpec compose(std::uint64_t m, PrivacySpec spec);

struct RecursionPlan {
  std::uint64_t rounds = 1;
  PrivacySpec spec;
  double bandwidth = 0.0;
  double outsourcing_ratio = 1.0;
};

// t rounds of recursion: privacy and bandwidth scale linearly, the
// outsourcing ratio exponentially (R^t).
RecursionPlan recursion_plan(std::uint64_t t, PrivacySpec base,
                             double bandwidth, double outsourcing_ratio);

// Inverse of epsilon_of in p: p = (N-1) / (e^(eps/2) + N - 1).
double solve_p_for_epsilon(std::uint64_t n_blocks, double epsilon);

// Largest k whose bandwidth fits the budget: floor(Bw / (2Z(1+1/lambda))) - 1.
// Throws DomainError when even k = 1 does not fit.
unsigned solve_k_for_bandwidth(double bandwidth_budget, unsigned Z,
                               Lambda lambda);

// Running (epsilon, delta) gate: admits queries until the next one would
// push cumulative epsilon past the budget.
class BudgetTracker {
 public:
  explicit BudgetTracker(double epsilon_budget);

  struct Outcome {
    bool admitted = false;
    double remaining = 0.0;  // epsilon budget left after the decision
  };

  Outcome admit(double epsilon, double delta = 0.0);

  double spent_epsilon() const { return spent_epsilon_; }
  double spent_delta() const { return spent_delta_; }
  double remaining() const { return budget_ - spent_epsilon_; }

 private:
  double budget_;
  double spent_epsilon_ = 0.0;
  double spent_delta_ = 0.0;
};

}  // namespace rootoram
