#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgplan/stochastic.hpp"

namespace dgplan {

struct StorageSpec {
  int bus = 0;
  double p_reest_kw = 0.0;
  double omega = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Per-trial shortfall rated - output.
inline std::vector<double> shortfall_samples(double rated_kw, std::span<const double> output_kw) {
  std::vector<double> out(output_kw.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = rated_kw - output_kw[t];
  return out;
}

inline std::vector<std::vector<double>> shortfall_samples(std::span<const double> rated_kw, const SampleSet& set) {
  if (rated_kw.size() != set.sites.size()) throw std::invalid_argument("one rating per sampled site required");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < rated_kw.size(); ++i) {
    if (set.sites[i].kw.size() != set.n) throw std::invalid_argument("sample sets differ in length");
    out.push_back(shortfall_samples(rated_kw[i], set.sites[i].kw));
  }
  return out;
}

/// Smallest reserve q with #{r <= q} / n >= omega, floored at 0
/// (lower empirical quantile).
inline double reserve_output(std::span<const double> shortfall, double omega) {
  if (shortfall.empty()) throw std::invalid_argument("empty shortfall sample");
  if (!(omega > 0.0 && omega < 1.0)) throw std::invalid_argument("omega must be in (0, 1)");
  std::vector<double> s(shortfall.begin(), shortfall.end());
  const double n = static_cast<double>(s.size());
  std::size_t k = static_cast<std::size_t>(std::ceil(omega * n));
  k = std::clamp<std::size_t>(k, 1, s.size());
  // Settle k against the same comparison the coverage check uses.
  while (k > 1 && static_cast<double>(k - 1) / n >= omega) --k;
  while (k < s.size() && !(static_cast<double>(k) / n >= omega)) ++k;
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end());
  return std::max(0.0, s[k - 1]);
}

/// One reserve per stochastic site; dispatchable sites get none.
inline std::vector<StorageSpec> size_storage(const std::vector<StochasticSite>& sites, double omega, std::size_t n,
                                             std::uint64_t seed, unsigned threads = 1) {
  const auto set = sample_outputs(sites, n, seed, threads);
  std::vector<StorageSpec> out;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!sites[i].stochastic()) continue;
    const auto r = shortfall_samples(sites[i].s_rated_kw, set.sites[i].kw);
    out.push_back({sites[i].bus, reserve_output(r, omega), omega, n, seed});
  }
  return out;
}

}  // namespace dgplan
