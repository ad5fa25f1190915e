#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "shapeqmc/lattice.hpp"

namespace shapeqmc::oracle {

inline long double b2(long double t) { return t * t - t + 1.0L / 6.0L; }

// Direct sum over all nonempty subsets u and all n nodes.
inline long double subset_wce2(const std::vector<std::int64_t>& z, std::int64_t n, const PodWeights& w) {
  const int s = static_cast<int>(z.size());
  long double total = 0.0L;
  for (unsigned mask = 1; mask < (1u << s); ++mask) {
    std::vector<int> u;
    for (int j = 0; j < s; ++j)
      if (mask & (1u << j)) u.push_back(j + 1);
    long double node_sum = 0.0L;
    for (std::int64_t l = 0; l < n; ++l) {
      long double prod = 1.0L;
      for (int j : u) prod *= b2(static_cast<long double>((l * z[static_cast<std::size_t>(j - 1)]) % n) / n);
      node_sum += prod;
    }
    total += static_cast<long double>(w.gamma(u)) * node_sum / n;
  }
  return total;
}

// Per-coordinate exhaustive search with the declared tie rule.
inline std::vector<std::int64_t> exhaustive_cbc(std::int64_t n, int s, const PodWeights& w) {
  std::vector<std::int64_t> z;
  for (int d = 0; d < s; ++d) {
    std::vector<long double> err(static_cast<std::size_t>(n), 0.0L);
    long double best = INFINITY;
    for (std::int64_t c = 1; c < n; ++c) {
      auto trial = z;
      trial.push_back(c);
      err[static_cast<std::size_t>(c)] = subset_wce2(trial, n, w);
      best = std::min(best, err[static_cast<std::size_t>(c)]);
    }
    for (std::int64_t c = 1; c < n; ++c)
      if (err[static_cast<std::size_t>(c)] - best <= kCbcTieTolerance * std::abs(best)) {
        z.push_back(c);
        break;
      }
  }
  return z;
}

inline std::vector<PodWeights> weight_presets(int s) {
  std::vector<PodWeights> presets;
  std::vector<double> coord;
  for (int j = 1; j <= s; ++j) coord.push_back(std::pow(static_cast<double>(j), -2.0));
  presets.push_back(PodWeights::product(coord));
  std::vector<double> log_order;
  for (int l = 0; l <= s; ++l) log_order.push_back(std::lgamma(l + 1.0));
  presets.emplace_back(log_order, std::vector<double>(static_cast<std::size_t>(s), 0.5), 0.6, 0.05, 2.0);
  presets.push_back(pod_weights(GevreyProfile{}, 1.0 / 1.9, s, false, {}));
  return presets;
}

}  // namespace shapeqmc::oracle
