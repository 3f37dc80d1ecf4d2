#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgplan/error.hpp"
#include "dgplan/network.hpp"

namespace dgplan {

using cplx = std::complex<double>;

/// Power injected at a bus; positive p is generation.
struct Injection {
  int bus = 0;
  double p_kw = 0.0;
  double q_kvar = 0.0;
};

struct SweepOptions {
  double tolerance_pu = 1e-6;  // max |dV| between sweeps
  int max_iterations = 100;
  double collapse_pu = 0.5;  // any |V| below this aborts the sweep
};

/// Per-bus vectors are indexed by position in NetworkCase::buses(),
/// per-branch vectors by position in NetworkCase::branches().
struct PowerFlowSolution {
  std::vector<cplx> voltage;
  std::vector<double> u;
  std::vector<double> delta;
  std::vector<double> net_p_kw;  // load minus generation
  std::vector<double> net_q_kvar;

  std::vector<cplx> branch_current_pu;
  std::vector<double> branch_p_kw;  // receiving end
  std::vector<double> branch_q_kvar;
  std::vector<double> branch_s_kva;  // sending-end apparent power

  double p_loss_kw = 0.0;
  double q_loss_kvar = 0.0;
  double p_swing_kw = 0.0;
  double q_swing_kvar = 0.0;
  bool converged = false;
  int iterations = 0;
  double max_mismatch_kw = 0.0;
  std::vector<double> trace;  // max |dV| per sweep
};

/// Net demand (load minus injections) per bus in kW/kVar. Injections at the
/// swing bus or at unknown buses are rejected.
inline std::vector<cplx> net_demand_kw(const NetworkCase& c, std::span<const Injection> injections) {
  std::vector<cplx> s(c.bus_count());
  for (std::size_t i = 0; i < c.bus_count(); ++i) s[i] = {c.buses()[i].p_load_kw, c.buses()[i].q_load_kvar};
  for (const auto& inj : injections) {
    if (!c.has_bus(inj.bus)) throw std::invalid_argument("injection at unknown bus " + std::to_string(inj.bus));
    auto i = c.bus_index(inj.bus);
    if (i == c.swing_index()) throw std::invalid_argument("injection at the swing bus is not allowed");
    s[i] -= cplx(inj.p_kw, inj.q_kvar);
  }
  return s;
}

namespace detail {

inline std::vector<cplx> branch_impedance_pu(const NetworkCase& c) {
  std::vector<cplx> z(c.branch_count());
  const double zb = c.z_base_ohm();
  for (std::size_t k = 0; k < c.branch_count(); ++k)
    z[k] = {c.branches()[k].r_ohm / zb, c.branches()[k].x_ohm / zb};
  return z;
}

inline void backward_sweep(const NetworkCase& c, std::span<const cplx> s_pu, std::span<const cplx> v,
                           std::vector<cplx>& acc, std::vector<cplx>& ib) {
  const auto& order = c.downstream_order();
  for (std::size_t i = 0; i < v.size(); ++i) acc[i] = std::conj(s_pu[i] / v[i]);
  acc[c.swing_index()] = 0.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    ib[it->branch] = acc[it->receiving];
    acc[it->sending] += ib[it->branch];
  }
}

}  // namespace detail

/// Backward/forward sweep on net demand given in kW/kVar per bus.
/// Non-convergence within the iteration cap is reported via `converged`;
/// voltage collapse throws divergence_error.
inline PowerFlowSolution solve_net(const NetworkCase& c, std::span<const cplx> demand_kw,
                                   const SweepOptions& opt = {}) {
  const std::size_t n = c.bus_count();
  if (demand_kw.size() != n) throw std::invalid_argument("demand vector size mismatch");
  const double base = c.kw_per_pu();
  const auto z = detail::branch_impedance_pu(c);
  const auto& order = c.downstream_order();

  std::vector<cplx> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = demand_kw[i] / base;

  PowerFlowSolution sol;
  std::vector<cplx> v(n, cplx(1.0, 0.0)), vn(n), acc(n), ib(c.branch_count());
  for (int it = 1; it <= opt.max_iterations; ++it) {
    detail::backward_sweep(c, s, v, acc, ib);
    vn[c.swing_index()] = 1.0;
    for (const auto& ob : order) vn[ob.receiving] = vn[ob.sending] - z[ob.branch] * ib[ob.branch];
    double dv = 0.0, vmin = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      dv = std::max(dv, std::abs(vn[i] - v[i]));
      vmin = std::min(vmin, std::abs(vn[i]));
    }
    std::swap(v, vn);
    sol.trace.push_back(dv);
    sol.iterations = it;
    if (vmin < opt.collapse_pu || !std::isfinite(dv))
      throw divergence_error("voltage collapsed below " + std::to_string(opt.collapse_pu) + " pu at sweep " +
                                 std::to_string(it),
                             sol.trace);
    if (dv < opt.tolerance_pu) {
      sol.converged = true;
      break;
    }
  }

  // Currents consistent with the final voltages, so flows and losses agree exactly.
  detail::backward_sweep(c, s, v, acc, ib);

  sol.voltage = v;
  sol.u.resize(n);
  sol.delta.resize(n);
  sol.net_p_kw.resize(n);
  sol.net_q_kvar.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.u[i] = std::abs(v[i]);
    sol.delta[i] = std::arg(v[i]);
    sol.net_p_kw[i] = demand_kw[i].real();
    sol.net_q_kvar[i] = demand_kw[i].imag();
  }
  sol.net_p_kw[c.swing_index()] = 0.0;
  sol.net_q_kvar[c.swing_index()] = 0.0;

  const std::size_t nb = c.branch_count();
  sol.branch_current_pu = ib;
  sol.branch_p_kw.assign(nb, 0.0);
  sol.branch_q_kvar.assign(nb, 0.0);
  sol.branch_s_kva.assign(nb, 0.0);
  std::vector<cplx> out_current(n, 0.0);
  cplx swing_s = 0.0;
  for (const auto& ob : order) {
    const cplx i_b = ib[ob.branch];
    const cplx s_recv = v[ob.receiving] * std::conj(i_b);
    const cplx s_send = v[ob.sending] * std::conj(i_b);
    sol.branch_p_kw[ob.branch] = s_recv.real() * base;
    sol.branch_q_kvar[ob.branch] = s_recv.imag() * base;
    sol.branch_s_kva[ob.branch] = std::abs(s_send) * base;
    const double i2 = std::norm(i_b);
    sol.p_loss_kw += z[ob.branch].real() * i2 * base;
    sol.q_loss_kvar += z[ob.branch].imag() * i2 * base;
    out_current[ob.sending] += i_b;
    if (ob.sending == c.swing_index()) swing_s += s_send;
  }
  sol.p_swing_kw = swing_s.real() * base;
  sol.q_swing_kvar = swing_s.imag() * base;

  // Per-bus mismatch: power absorbed from the branches versus specified demand.
  for (const auto& ob : order) {
    const std::size_t b = ob.receiving;
    const cplx absorbed = v[b] * std::conj(ib[ob.branch] - out_current[b]);
    sol.max_mismatch_kw = std::max(sol.max_mismatch_kw, std::abs(absorbed - s[b]) * base);
  }
  return sol;
}

inline PowerFlowSolution solve(const NetworkCase& c, std::span<const Injection> injections = {},
                               const SweepOptions& opt = {}) {
  auto demand = net_demand_kw(c, injections);
  return solve_net(c, demand, opt);
}

/// Branch loss R_m (P^2 + Q^2) / U^2 evaluated from receiving-end flow and voltage.
inline double branch_loss(const NetworkCase& c, const PowerFlowSolution& sol, int branch_id) {
  const auto k = c.branch_index(branch_id);
  const std::size_t recv = c.receiving(k);
  const double r_pu = c.branches()[k].r_ohm / c.z_base_ohm();
  const double base = c.kw_per_pu();
  const double p = sol.branch_p_kw[k] / base, q = sol.branch_q_kvar[k] / base, u = sol.u[recv];
  return r_pu * (p * p + q * q) / (u * u) * base;
}

inline double total_loss(const NetworkCase& c, const PowerFlowSolution& sol) {
  double s = 0.0;
  for (const auto& br : c.branches()) s += branch_loss(c, sol, br.id);
  return s;
}

/// Bus impedance matrix Z = Y^-1 with the swing row/column removed.
class BusImpedance {
 public:
  explicit BusImpedance(const NetworkCase& c) : swing_(c.swing_index()), n_(c.bus_count()) {
    const auto z = detail::branch_impedance_pu(c);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t k = 0; k < c.branch_count(); ++k) {
      if (std::abs(z[k]) == 0.0)
        throw singular_matrix_error("branch " + std::to_string(c.branches()[k].id) + " has zero impedance");
      const cplx yk = 1.0 / z[k];
      const auto f = static_cast<Eigen::Index>(c.bus_index(c.branches()[k].from_bus));
      const auto t = static_cast<Eigen::Index>(c.bus_index(c.branches()[k].to_bus));
      y(f, f) += yk;
      y(t, t) += yk;
      y(f, t) -= yk;
      y(t, f) -= yk;
    }
    for (std::size_t i = 0; i < n_; ++i)
      if (i != swing_) reduced_.push_back(i);
    const auto m = static_cast<Eigen::Index>(reduced_.size());
    Eigen::MatrixXcd yr(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) yr(a, b) = y(static_cast<Eigen::Index>(reduced_[a]),
                                                        static_cast<Eigen::Index>(reduced_[b]));
    if (m > 0) {
      Eigen::FullPivLU<Eigen::MatrixXcd> lu(yr);
      if (!lu.isInvertible()) throw singular_matrix_error("bus admittance matrix is singular");
      z_ = lu.inverse();
    }
  }

  /// Internal bus indices for the rows/columns of z(), i.e. every bus but the swing.
  const std::vector<std::size_t>& buses() const noexcept { return reduced_; }
  const Eigen::MatrixXcd& z() const noexcept { return z_; }
  Eigen::MatrixXd r() const { return z_.real(); }

 private:
  std::size_t swing_;
  std::size_t n_;
  std::vector<std::size_t> reduced_;
  Eigen::MatrixXcd z_;
};

/// Loss coefficient matrices alpha_ij, beta_ij over non-swing buses (per-unit).
struct LossCoefficients {
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd beta;
  Eigen::VectorXd p;  // net injection, pu
  Eigen::VectorXd q;
};

inline LossCoefficients loss_coefficients(const NetworkCase& c, const PowerFlowSolution& sol,
                                          const BusImpedance& zbus) {
  const auto& idx = zbus.buses();
  const auto m = static_cast<Eigen::Index>(idx.size());
  const Eigen::MatrixXd r = zbus.r();
  LossCoefficients lc{Eigen::MatrixXd(m, m), Eigen::MatrixXd(m, m), Eigen::VectorXd(m), Eigen::VectorXd(m)};
  const double base = c.kw_per_pu();
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto i = idx[static_cast<std::size_t>(a)];
    lc.p(a) = -sol.net_p_kw[i] / base;
    lc.q(a) = -sol.net_q_kvar[i] / base;
    for (Eigen::Index b = 0; b < m; ++b) {
      const auto j = idx[static_cast<std::size_t>(b)];
      const double scale = r(a, b) / (sol.u[i] * sol.u[j]);
      const double dd = sol.delta[i] - sol.delta[j];
      lc.alpha(a, b) = scale * std::cos(dd);
      lc.beta(a, b) = scale * std::sin(dd);
    }
  }
  return lc;
}

/// Total real loss from the exact loss formula (double sum over bus injections).
inline double exact_loss(const NetworkCase& c, const PowerFlowSolution& sol, const BusImpedance& zbus) {
  const auto lc = loss_coefficients(c, sol, zbus);
  const auto& P = lc.p;
  const auto& Q = lc.q;
  const double pl = P.dot(lc.alpha * P) + Q.dot(lc.alpha * Q) + Q.dot(lc.beta * P) - P.dot(lc.beta * Q);
  return pl * c.kw_per_pu();
}

inline double exact_loss(const NetworkCase& c, const PowerFlowSolution& sol) {
  return exact_loss(c, sol, BusImpedance(c));
}

}  // namespace dgplan
