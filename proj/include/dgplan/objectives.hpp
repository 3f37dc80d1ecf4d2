#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dgplan/network.hpp"
#include "dgplan/power_flow.hpp"

namespace dgplan {

enum class DgKind { wt, pv, mt };

inline std::string_view to_string(DgKind k) {
  switch (k) {
    case DgKind::wt: return "WT";
    case DgKind::pv: return "PV";
    case DgKind::mt: return "MT";
  }
  return "?";
}

inline DgKind parse_dg_kind(std::string_view s) {
  if (s == "WT" || s == "wt") return DgKind::wt;
  if (s == "PV" || s == "pv") return DgKind::pv;
  if (s == "MT" || s == "mt") return DgKind::mt;
  throw std::invalid_argument("unknown DG kind '" + std::string(s) + "'");
}

/// Hours used to annualise per-kWh prices.
inline constexpr double hours_per_year = 8760.0;

/// Per-kind investment parameters. Prices in $/kWh; c_fic in $ per kW installed.
struct DgEconomics {
  double c_gp = 0.0;
  double c_gs = 0.0;
  double c_mc = 0.0;
  double c_fic = 0.0;
  double xi_dg = 0.0;
  double lambda_cf = 0.0;
};

/// Scale applied to the tabulated fixed investment cost (tabulated in units of 10^4 $/kW).
inline constexpr double fic_table_scale = 1.0e4;

inline DgEconomics default_economics(DgKind k) {
  switch (k) {
    case DgKind::wt: return {0.08, 0.036, 0.0047, 0.163 * fic_table_scale, 0.1006, 0.35};
    case DgKind::pv: return {0.08, 0.036, 0.0019, 0.667 * fic_table_scale, 0.0843, 0.29};
    case DgKind::mt: return {0.064, 0.0, 0.0283, 0.164 * fic_table_scale, 0.1006, 1.00};
  }
  return {};
}

struct DgUnit {
  DgKind kind = DgKind::mt;
  int bus = 0;
  double s_rated_kw = 0.0;
  double power_factor = 1.0;
  DgEconomics economics = default_economics(DgKind::mt);

  double q_kvar() const {
    if (power_factor >= 1.0) return 0.0;
    return s_rated_kw * std::tan(std::acos(power_factor));
  }
};

class undefined_benefit_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Annual revenue over annual cost, C_p = C_T / C_I.
inline double investment_benefit(std::span<const DgUnit> portfolio) {
  double revenue = 0.0, running = 0.0, fixed = 0.0;
  for (const auto& u : portfolio) {
    const auto& e = u.economics;
    revenue += (e.c_gp + e.c_gs) * u.s_rated_kw * e.lambda_cf;
    running += e.c_mc * u.s_rated_kw * e.lambda_cf;
    fixed += e.c_fic * u.s_rated_kw * e.xi_dg;
  }
  const double cost = hours_per_year * running + fixed;
  if (!(cost > 0.0)) throw undefined_benefit_error("investment benefit undefined: zero annual cost");
  return hours_per_year * revenue / cost;
}

struct VsfResult {
  std::vector<double> per_bus;  // by internal bus index; swing entry is 0
  double total = 0.0;
};

/// Voltage stability factor 2 U_recv - U_send per branch, summed over receiving buses.
inline VsfResult vsf(const NetworkCase& c, const PowerFlowSolution& sol) {
  VsfResult r;
  r.per_bus.assign(c.bus_count(), 0.0);
  for (const auto& ob : c.downstream_order()) {
    const double f = 2.0 * sol.u[ob.receiving] - sol.u[ob.sending];
    r.per_bus[ob.receiving] = f;
    r.total += f;
  }
  return r;
}

struct ObjectiveVector {
  double c_p = 0.0;        // maximise
  double vsf_total = 0.0;  // maximise
  double p_loss_kw = 0.0;  // minimise
  bool feasible = true;
  double violation = 0.0;
};

struct ConstraintOptions {
  bool voltage = true;
  bool penetration = true;
  bool branch_rating = true;
};

/// Fixed DG sites on a network; evaluates capacity vectors against the three
/// planning objectives and the operating constraints.
class PlanningProblem {
 public:
  PlanningProblem(NetworkCase network, std::vector<DgUnit> sites, SweepOptions sweep = {},
                  ConstraintOptions constraints = {})
      : network_(std::move(network)), sites_(std::move(sites)), sweep_(sweep), constraints_(constraints) {
    for (const auto& s : sites_) {
      if (network_.bus_index(s.bus) == network_.swing_index())
        throw std::invalid_argument("DG site at the swing bus");
      if (s.s_rated_kw < 0.0) throw std::invalid_argument("negative DG capacity");
    }
    const auto base = solve(network_, {}, sweep_);
    base_p_loss_kw_ = base.p_loss_kw;
    base_q_loss_kvar_ = base.q_loss_kvar;
  }

  const NetworkCase& network() const noexcept { return network_; }
  const std::vector<DgUnit>& sites() const noexcept { return sites_; }
  std::size_t dimension() const noexcept { return sites_.size(); }
  double base_p_loss_kw() const noexcept { return base_p_loss_kw_; }
  double base_q_loss_kvar() const noexcept { return base_q_loss_kvar_; }
  double penetration_limit_kw() const { return network_.total_p_load_kw() + base_p_loss_kw_; }
  double penetration_limit_kvar() const { return network_.total_q_load_kvar() + base_q_loss_kvar_; }

  std::vector<DgUnit> portfolio(std::span<const double> capacities_kw) const {
    check_size(capacities_kw);
    auto out = sites_;
    for (std::size_t d = 0; d < out.size(); ++d) out[d].s_rated_kw = capacities_kw[d];
    return out;
  }

  std::vector<Injection> injections(std::span<const double> capacities_kw) const {
    std::vector<Injection> inj;
    for (const auto& u : portfolio(capacities_kw)) inj.push_back({u.bus, u.s_rated_kw, u.q_kvar()});
    return inj;
  }

  ObjectiveVector evaluate(std::span<const double> capacities_kw) const {
    const auto units = portfolio(capacities_kw);
    const auto inj = injections(capacities_kw);
    ObjectiveVector ov;

    PowerFlowSolution sol;
    try {
      sol = solve(network_, inj, sweep_);
    } catch (const divergence_error&) {
      return worst();
    }
    if (!sol.converged) return worst();

    double total_kw = 0.0, total_kvar = 0.0;
    for (const auto& u : units) {
      total_kw += u.s_rated_kw;
      total_kvar += u.q_kvar();
    }
    try {
      ov.c_p = investment_benefit(units);
    } catch (const undefined_benefit_error&) {
      ov.c_p = 0.0;  // nothing installed
    }
    ov.vsf_total = vsf(network_, sol).total;
    ov.p_loss_kw = sol.p_loss_kw;

    double v = 0.0;
    if (constraints_.voltage) {
      for (std::size_t i = 0; i < network_.bus_count(); ++i) {
        const auto& b = network_.buses()[i];
        v += std::max(0.0, b.u_min - sol.u[i]) + std::max(0.0, sol.u[i] - b.u_max);
      }
    }
    if (constraints_.penetration) {
      const double pl = penetration_limit_kw(), ql = penetration_limit_kvar();
      v += std::max(0.0, total_kw - pl) / pl;
      if (ql > 0.0) v += std::max(0.0, total_kvar - ql) / ql;
    }
    if (constraints_.branch_rating) {
      for (std::size_t k = 0; k < network_.branch_count(); ++k) {
        const double rated = network_.branches()[k].s_rated_kva;
        v += std::max(0.0, sol.branch_s_kva[k] - rated) / rated;
      }
    }
    ov.violation = v;
    ov.feasible = v == 0.0;
    return ov;
  }

  static ObjectiveVector worst() {
    return {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::max(), false, std::numeric_limits<double>::infinity()};
  }

 private:
  void check_size(std::span<const double> x) const {
    if (x.size() != sites_.size())
      throw std::invalid_argument("candidate has " + std::to_string(x.size()) + " entries, expected " +
                                  std::to_string(sites_.size()));
  }

  NetworkCase network_;
  std::vector<DgUnit> sites_;
  SweepOptions sweep_;
  ConstraintOptions constraints_;
  double base_p_loss_kw_ = 0.0;
  double base_q_loss_kvar_ = 0.0;
};

}  // namespace dgplan
