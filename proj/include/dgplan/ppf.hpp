#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgplan/network.hpp"
#include "dgplan/power_flow.hpp"
#include "dgplan/stochastic.hpp"
#include "dgplan/storage.hpp"

namespace dgplan {

/// Empirical distribution: values sorted ascending, cum_prob[i] = (i + 1) / n.
struct CdfSeries {
  std::string label;
  std::string units;
  std::vector<double> values;
  std::vector<double> cum_prob;

  std::size_t size() const noexcept { return values.size(); }

  /// Lower quantile: smallest value whose cumulative probability reaches p.
  double quantile(double p) const {
    if (values.empty()) throw std::invalid_argument("empty distribution");
    const double n = static_cast<double>(values.size());
    auto k = static_cast<std::size_t>(std::ceil(p * n));
    k = std::clamp<std::size_t>(k, 1, values.size());
    while (k > 1 && static_cast<double>(k - 1) / n >= p) --k;
    return values[k - 1];
  }

  double median() const { return quantile(0.5); }

  /// Fraction of trials with value >= x.
  double probability_at_least(double x) const {
    if (values.empty()) return 0.0;
    const auto it = std::lower_bound(values.begin(), values.end(), x);
    return static_cast<double>(values.end() - it) / static_cast<double>(values.size());
  }
};

inline CdfSeries make_cdf(std::vector<double> values, std::string label, std::string units) {
  std::sort(values.begin(), values.end());
  CdfSeries c{std::move(label), std::move(units), std::move(values), {}};
  c.cum_prob.resize(c.values.size());
  const double n = static_cast<double>(c.values.size());
  for (std::size_t i = 0; i < c.values.size(); ++i) c.cum_prob[i] = static_cast<double>(i + 1) / n;
  if (!c.cum_prob.empty()) c.cum_prob.back() = 1.0;
  return c;
}

/// Largest distance between two empirical CDFs.
inline double kolmogorov_distance(const CdfSeries& a, const CdfSeries& b) {
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a.values[i], b.values[j]);
    while (i < a.size() && a.values[i] <= x) ++i;
    while (j < b.size() && b.values[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Output after storage covers the shortfall, never above rated.
inline double effective_output(double sample_kw, double rated_kw, double p_reest_kw) {
  if (rated_kw - sample_kw <= p_reest_kw) return rated_kw;
  return sample_kw + p_reest_kw;
}

enum class PpfScenario { without_storage, with_storage };

inline std::string_view to_string(PpfScenario s) {
  return s == PpfScenario::with_storage ? "with_storage" : "without_storage";
}

struct PpfReport {
  PpfScenario scenario = PpfScenario::without_storage;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t excluded = 0;
  std::vector<int> bus_ids;        // aligned with voltage
  std::vector<CdfSeries> voltage;  // per bus, pu
  CdfSeries p_loss;                // kW
  CdfSeries q_loss;                // kVar
  std::vector<int> site_buses;     // aligned with output
  std::vector<CdfSeries> output;   // per DG site, kW
};

struct PpfOptions {
  SweepOptions sweep{};
  unsigned threads = 1;
  double max_excluded_fraction = 0.001;
};

/// Monte Carlo power flow over sampled DG outputs. Storage entries are matched
/// to sites by bus. Sampling uses the same per-site streams as size_storage,
/// so equal (sites, n, seed) reproduce the sizing samples.
inline PpfReport run_ppf(const NetworkCase& c, const std::vector<StochasticSite>& sites,
                         const std::optional<std::vector<StorageSpec>>& storage, std::size_t n, std::uint64_t seed,
                         const PpfOptions& opt = {}) {
  for (const auto& s : sites)
    if (c.bus_index(s.bus) == c.swing_index()) throw std::invalid_argument("DG site at the swing bus");
  if (storage)
    for (const auto& st : *storage)
      if (std::none_of(sites.begin(), sites.end(), [&](const auto& s) { return s.bus == st.bus; }))
        throw std::invalid_argument("storage at bus " + std::to_string(st.bus) + " has no DG site");

  const auto set = sample_outputs(sites, n, seed, opt.threads);
  std::vector<std::vector<double>> eff(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    eff[i] = set.sites[i].kw;
    double reserve = 0.0;
    if (storage)
      for (const auto& st : *storage)
        if (st.bus == sites[i].bus) reserve += st.p_reest_kw;
    if (reserve > 0.0)
      for (auto& v : eff[i]) v = effective_output(v, sites[i].s_rated_kw, reserve);
  }

  const auto base_demand = net_demand_kw(c, {});
  std::vector<std::size_t> site_index(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) site_index[i] = c.bus_index(sites[i].bus);

  const std::size_t nb = c.bus_count();
  std::vector<double> p_loss(n), q_loss(n), volts(n * nb);
  std::vector<char> ok(n, 0);
  parallel_for(n, opt.threads, [&](std::size_t t) {
    std::vector<cplx> demand = base_demand;
    for (std::size_t i = 0; i < sites.size(); ++i) demand[site_index[i]] -= eff[i][t];
    try {
      const auto sol = solve_net(c, demand, opt.sweep);
      if (!sol.converged) return;
      p_loss[t] = sol.p_loss_kw;
      q_loss[t] = sol.q_loss_kvar;
      std::copy(sol.u.begin(), sol.u.end(), volts.begin() + static_cast<std::ptrdiff_t>(t * nb));
      ok[t] = 1;
    } catch (const divergence_error&) {
    }
  });

  PpfReport r;
  r.scenario = storage ? PpfScenario::with_storage : PpfScenario::without_storage;
  r.n = n;
  r.seed = seed;
  r.excluded = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  if (static_cast<double>(r.excluded) > opt.max_excluded_fraction * static_cast<double>(n))
    throw std::runtime_error("probabilistic power flow: " + std::to_string(r.excluded) + " of " + std::to_string(n) +
                             " trials failed to converge");

  auto kept = [&](auto&& get) {
    std::vector<double> v;
    v.reserve(n - r.excluded);
    for (std::size_t t = 0; t < n; ++t)
      if (ok[t]) v.push_back(get(t));
    return v;
  };
  for (std::size_t b = 0; b < nb; ++b) {
    const int id = c.buses()[b].id;
    r.bus_ids.push_back(id);
    r.voltage.push_back(make_cdf(kept([&](std::size_t t) { return volts[t * nb + b]; }),
                                 "voltage_bus_" + std::to_string(id), "pu"));
  }
  r.p_loss = make_cdf(kept([&](std::size_t t) { return p_loss[t]; }), "active_loss", "kW");
  r.q_loss = make_cdf(kept([&](std::size_t t) { return q_loss[t]; }), "reactive_loss", "kVar");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    r.site_buses.push_back(sites[i].bus);
    r.output.push_back(make_cdf(kept([&](std::size_t t) { return eff[i][t]; }),
                                "output_bus_" + std::to_string(sites[i].bus) + "_" + std::string(to_string(sites[i].kind)),
                                "kW"));
  }
  return r;
}

/// Bus with the lowest median voltage, swing excluded.
inline int min_voltage_bus(const NetworkCase& c, const PpfReport& r) {
  if (r.voltage.empty()) throw std::invalid_argument("empty report");
  int best = -1;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < r.voltage.size(); ++b) {
    if (c.bus_index(r.bus_ids[b]) == c.swing_index() || r.voltage[b].size() == 0) continue;
    const double m = r.voltage[b].median();
    if (m < lowest) {
      lowest = m;
      best = r.bus_ids[b];
    }
  }
  if (best < 0) throw std::invalid_argument("report has no load-bus voltages");
  return best;
}

}  // namespace dgplan
