#include "rootoram/privacy.hpp"

#include <algorithm>
#include <cmath>

namespace rootoram {

namespace {

void check_p(std::uint64_t n_blocks, double p) {
  if (n_blocks < 2) throw DomainError("N must be at least 2");
  const double p_max = 1.0 - 1.0 / static_cast<double>(n_blocks);
  if (!(p > 0.0) || p > p_max) throw DomainError("p must be in (0, 1 - 1/N]");
}

}  // namespace

double epsilon_of(std::uint64_t n_blocks, double p) {
  check_p(n_blocks, p);
  const double ratio =
      static_cast<double>(n_blocks - 1) * (1.0 - p) / p;  // p1/p2
  return std::max(0.0, 2.0 * std::log(ratio));
}

double delta_of(double p, std::uint64_t stash_bound, unsigned Z, unsigned k) {
  if (!(p > 0.0) || !(p < 1.0)) throw DomainError("p must be in (0, 1)");
  const CapacityModel cap{stash_bound, Z, k};
  return std::pow(1.0 - p, static_cast<double>(cap.overflow_threshold()));
}

double bandwidth_of(unsigned Z, unsigned k, Lambda lambda) {
  if (Z < 1 || k < 1) throw DomainError("Z and k must be at least 1");
  return 2.0 * static_cast<double>(Z) * (k + 1) * (1.0 + lambda.inverse());
}

PrivacySpec compose(std::uint64_t m, PrivacySpec spec) {
  if (m < 1) throw DomainError("m must be at least 1");
  return PrivacySpec{static_cast<double>(m) * spec.epsilon,
                     std::min(1.0, static_cast<double>(m) * spec.delta)};
}

RecursionPlan recursion_plan(std::uint64_t t, PrivacySpec base,
                             double bandwidth, double outsourcing_ratio) {
  if (t < 1) throw DomainError("recursion rounds must be at least 1");
  if (!(outsourcing_ratio > 0.0)) throw DomainError("R must be positive");
  RecursionPlan plan;
  plan.rounds = t;
  plan.spec = compose(t, base);
  plan.bandwidth = static_cast<double>(t) * bandwidth;
  plan.outsourcing_ratio =
      std::pow(outsourcing_ratio, static_cast<double>(t));
  return plan;
}

double solve_p_for_epsilon(std::uint64_t n_blocks, double epsilon) {
  if (n_blocks < 2) throw DomainError("N must be at least 2");
  if (epsilon < 0.0) throw DomainError("epsilon must be non-negative");
  const double n1 = static_cast<double>(n_blocks - 1);
  return n1 / (std::exp(epsilon / 2.0) + n1);
}

unsigned solve_k_for_bandwidth(double bandwidth_budget, unsigned Z,
                               Lambda lambda) {
  if (Z < 1) throw DomainError("Z must be at least 1");
  const double per_level = 2.0 * Z * (1.0 + lambda.inverse());
  const double k = std::floor(bandwidth_budget / per_level) - 1.0;
  if (k < 1.0)
    throw DomainError("bandwidth budget too small for any k at this Z");
  return static_cast<unsigned>(k);
}

BudgetTracker::BudgetTracker(double epsilon_budget) : budget_(epsilon_budget) {
  if (epsilon_budget < 0.0) throw DomainError("budget must be non-negative");
}

BudgetTracker::Outcome BudgetTracker::admit(double epsilon, double delta) {
  if (epsilon < 0.0 || delta < 0.0)
    throw DomainError("query cost must be non-negative");
  if (budget_ == 0.0) return Outcome{false, 0.0};
  // Tolerate accumulated rounding: a query that fits the budget up to one
  // part in 1e9 is admitted.
  const double slack = 1e-9 * std::max(1.0, budget_);
  if (spent_epsilon_ + epsilon > budget_ + slack)
    return Outcome{false, remaining()};
  spent_epsilon_ += epsilon;
  spent_delta_ += delta;
  return Outcome{true, remaining()};
}

}  // namespace rootoram
