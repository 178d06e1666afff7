#include "rootoram/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rootoram {

Distribution Distribution::create(std::vector<double> mass) {
  if (mass.empty()) throw DomainError("distribution needs a support");
  double total = 0.0;
  for (double m : mass) {
    if (m < 0.0 || !std::isfinite(m))
      throw DomainError("mass must be non-negative and finite");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("mass must sum to 1 within 1e-12");
  return Distribution{std::move(mass)};
}

double shannon_entropy(std::span<const double> mass) {
  double h = 0.0;
  for (double m : mass)
    if (m > 0.0) h -= m * std::log(m);
  return h;
}

double min_entropy(std::span<const double> mass) {
  double peak = 0.0;
  for (double m : mass) peak = std::max(peak, m);
  if (peak <= 0.0) throw DomainError("distribution has no mass");
  return -std::log(peak);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw DomainError("distributions must share a support");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

unsigned k_anonymity(const std::vector<std::vector<double>>& channel_rows) {
  if (channel_rows.empty()) throw DomainError("channel has no inputs");
  const std::size_t outputs = channel_rows.front().size();
  if (outputs == 0) throw DomainError("channel has no outputs");
  for (const auto& row : channel_rows)
    if (row.size() != outputs)
      throw DomainError("channel rows must share the output space");

  unsigned smallest = 0;
  bool any_output = false;
  for (std::size_t y = 0; y < outputs; ++y) {
    unsigned preimage = 0;
    for (const auto& row : channel_rows)
      if (row[y] > 0.0) ++preimage;
    if (preimage == 0) continue;  // unreachable output
    if (!any_output || preimage < smallest) smallest = preimage;
    any_output = true;
  }
  if (!any_output) throw DomainError("channel reaches no output");
  return smallest;
}

}  // namespace rootoram
