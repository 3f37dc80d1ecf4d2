#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgplan/network.hpp"
#include "dgplan/power_flow.hpp"

namespace dgplan {

/// First-order loss sensitivity 2 * sum_j (alpha_ij P_j - beta_ij Q_j), with
/// the loss coefficients frozen at the operating point. P/Q are net demand,
/// so values are dP_L/dP_Di (kW per kW). Swing entry is 0.
inline std::vector<double> loss_sensitivity_first_order(const NetworkCase& c, const PowerFlowSolution& sol,
                                                        const BusImpedance& zbus) {
  const auto lc = loss_coefficients(c, sol, zbus);
  // lc.p/q are injections; the demand-side derivative flips the sign.
  const Eigen::VectorXd a = -2.0 * (lc.alpha * lc.p - lc.beta * lc.q);
  std::vector<double> out(c.bus_count(), 0.0);
  for (std::size_t k = 0; k < zbus.buses().size(); ++k) out[zbus.buses()[k]] = a(static_cast<Eigen::Index>(k));
  return out;
}

/// Total derivative of the real loss with respect to active demand at each bus,
/// i.e. the first-order term above plus the coupling through bus voltages.
/// Uses the linearised current-injection model V = 1 - Z I, I = conj(S / V).
inline std::vector<double> loss_sensitivity(const NetworkCase& c, const PowerFlowSolution& sol,
                                            const BusImpedance& zbus) {
  const auto& idx = zbus.buses();
  const auto m = static_cast<Eigen::Index>(idx.size());
  std::vector<double> out(c.bus_count(), 0.0);
  if (m == 0) return out;

  const double base = c.kw_per_pu();
  const Eigen::MatrixXcd& z = zbus.z();
  const Eigen::MatrixXd r = z.real();
  Eigen::VectorXcd current(m), vconj(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto i = idx[static_cast<std::size_t>(a)];
    const cplx s(sol.net_p_kw[i] / base, sol.net_q_kvar[i] / base);
    vconj(a) = std::conj(sol.voltage[i]);
    current(a) = std::conj(s) / vconj(a);
  }
  // dI = rhs + diag(I / conj V) conj(Z) conj(dI), split into real and imaginary parts.
  const Eigen::MatrixXcd coupling = (current.array() / vconj.array()).matrix().asDiagonal() * z.conjugate();
  const Eigen::MatrixXd mr = coupling.real(), mi = coupling.imag();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd system(2 * m, 2 * m);
  system << eye - mr, -mi, -mi, eye + mr;

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(2 * m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const cplx unit = 1.0 / vconj(a);
    rhs(a, a) = unit.real();
    rhs(m + a, a) = unit.imag();
  }
  const Eigen::MatrixXd d = system.partialPivLu().solve(rhs);
  const Eigen::RowVectorXd gr = current.real().transpose() * r;
  const Eigen::RowVectorXd gi = current.imag().transpose() * r;
  const Eigen::RowVectorXd grad = 2.0 * (gr * d.topRows(m) + gi * d.bottomRows(m));
  for (Eigen::Index a = 0; a < m; ++a) out[idx[static_cast<std::size_t>(a)]] = grad(a);
  return out;
}

inline std::vector<double> loss_sensitivity(const NetworkCase& c, const PowerFlowSolution& sol) {
  return loss_sensitivity(c, sol, BusImpedance(c));
}

struct SizingOptions {
  double resolution_kw = 0.1;
  int coarse_points = 100;
  SweepOptions sweep{};
};

/// Capacity in [0, upper_kw] at `bus` minimising total real loss, given the
/// net demand already in place. Golden-section search, cross-checked by a
/// coarse sweep that re-brackets the search if the loss curve is not unimodal.
inline double optimal_size_at(const NetworkCase& c, int bus, std::span<const cplx> demand_kw, double upper_kw,
                              const SizingOptions& opt = {}) {
  const auto b = c.bus_index(bus);
  if (b == c.swing_index()) throw std::invalid_argument("cannot size DG at the swing bus");
  if (!(upper_kw > 0.0)) return 0.0;

  std::vector<cplx> work(demand_kw.begin(), demand_kw.end());
  const cplx original = work[b];
  auto loss_at = [&](double kw) {
    work[b] = original - kw;
    try {
      auto sol = solve_net(c, work, opt.sweep);
      return sol.converged ? sol.p_loss_kw : std::numeric_limits<double>::infinity();
    } catch (const divergence_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  auto golden = [&](double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = loss_at(x1), f2 = loss_at(x2);
    while (hi - lo > opt.resolution_kw) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = loss_at(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = loss_at(x2);
      }
    }
    return 0.5 * (lo + hi);
  };

  double best = golden(0.0, upper_kw);
  double best_loss = loss_at(best);

  const int npts = std::max(opt.coarse_points, 2);
  const double step = upper_kw / npts;
  int coarse_idx = 0;
  double coarse_loss = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= npts; ++i) {
    const double f = loss_at(step * i);
    if (f < coarse_loss) {
      coarse_loss = f;
      coarse_idx = i;
    }
  }
  if (coarse_loss < best_loss) {
    const double lo = step * std::max(coarse_idx - 1, 0), hi = step * std::min(coarse_idx + 1, npts);
    const double refined = golden(lo, hi);
    const double refined_loss = loss_at(refined);
    if (refined_loss < coarse_loss) {
      best = refined;
      best_loss = refined_loss;
    } else {
      best = step * coarse_idx;
      best_loss = coarse_loss;
    }
  }
  if (loss_at(0.0) <= best_loss) return 0.0;
  return best;
}

struct Placement {
  int bus = 0;
  double capacity_kw = 0.0;
  double lsf = 0.0;  // sensitivity that selected this bus
};

enum class SitingStop { reached_count, penetration_limit, no_loss_reduction };

struct SitingResult {
  std::vector<Placement> placements;
  std::vector<double> loss_after_each_kw;
  double base_loss_kw = 0.0;
  SitingStop stop = SitingStop::reached_count;
};

/// Greedy siting: repeatedly pick the unplaced bus with the largest loss
/// sensitivity, size it for minimum loss, and keep it as a negative load.
/// Stops early once the penetration headroom (total load + base loss) is used.
inline SitingResult stage1_place(const NetworkCase& c, std::size_t n_dg, const SizingOptions& opt = {}) {
  const std::size_t candidates = c.bus_count() - 1;
  if (n_dg < 1 || n_dg > candidates)
    throw std::invalid_argument("n_dg must be in [1, " + std::to_string(candidates) + "]");

  const BusImpedance zbus(c);
  std::vector<cplx> demand = net_demand_kw(c, {});
  const auto base = solve_net(c, demand, opt.sweep);
  const double headroom = c.total_p_load_kw() + base.p_loss_kw;

  SitingResult result;
  result.base_loss_kw = base.p_loss_kw;
  std::vector<bool> placed(c.bus_count(), false);
  placed[c.swing_index()] = true;
  double installed = 0.0;

  // Ties resolve to the lowest external bus id.
  std::vector<std::size_t> by_id(c.bus_count());
  for (std::size_t i = 0; i < by_id.size(); ++i) by_id[i] = i;
  std::sort(by_id.begin(), by_id.end(), [&](auto a, auto b) { return c.buses()[a].id < c.buses()[b].id; });

  while (result.placements.size() < n_dg) {
    const double remaining = headroom - installed;
    if (remaining < opt.resolution_kw) {
      result.stop = SitingStop::penetration_limit;
      break;
    }
    const auto sol = solve_net(c, demand, opt.sweep);
    const auto lsf = loss_sensitivity(c, sol, zbus);
    std::size_t pick = c.bus_count();
    for (auto i : by_id)
      if (!placed[i] && (pick == c.bus_count() || lsf[i] > lsf[pick])) pick = i;

    const int bus = c.buses()[pick].id;
    const double size = optimal_size_at(c, bus, demand, remaining, opt);
    if (size < opt.resolution_kw) {
      result.stop = SitingStop::no_loss_reduction;
      break;
    }
    demand[pick] -= size;
    installed += size;
    placed[pick] = true;
    result.placements.push_back({bus, size, lsf[pick]});
    result.loss_after_each_kw.push_back(solve_net(c, demand, opt.sweep).p_loss_kw);
  }
  return result;
}

}  // namespace dgplan
