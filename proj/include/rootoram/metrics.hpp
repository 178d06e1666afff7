#pragma once

#include <span>
#include <vector>

#include "rootoram/core.hpp"

namespace rootoram {

// A probability distribution over a finite outcome space. Natural-log units
// (nats) throughout; divide by ln 2 for bits.
struct Distribution {
  std::vector<double> mass;

  // Validates non-negativity and normalization to within 1e-12.
  static Distribution create(std::vector<double> mass);
};

// H(P) = -sum p ln p, with 0 ln 0 = 0.
double shannon_entropy(std::span<const double> mass);

// H_inf(P) = -ln max_i p_i; never exceeds the Shannon entropy.
double min_entropy(std::span<const double> mass);

// D_KL(P || Q) = sum P(i) ln(P(i)/Q(i)). Returns +infinity when P puts mass
// where Q has none.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Smallest preimage over outputs: for each output with any mass, count the
// inputs that can produce it; the minimum is the anonymity set size. Rows
// are per-input output distributions over a shared outcome space; only
// positivity matters, so sub-normalized rows are fine.
unsigned k_anonymity(const std::vector<std::vector<double>>& channel_rows);

}  // namespace rootoram
