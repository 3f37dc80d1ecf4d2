#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgplan/pareto.hpp"

namespace dgplan::grp {

/// Schemes by indications, row-major.
struct DecisionMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<Sense> senses;
  std::vector<double> weights;  // empty means equal

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  void validate() const {
    if (rows == 0 || cols == 0) throw std::invalid_argument("decision matrix has no rows or columns");
    if (values.size() != rows * cols) throw std::invalid_argument("decision matrix size mismatch");
    if (senses.size() != cols) throw std::invalid_argument("one sense per indication required");
    if (!weights.empty() && weights.size() != cols) throw std::invalid_argument("one weight per indication required");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and non-negative");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("decision matrix contains a non-finite value");
  }

  /// Weights scaled to sum to one; equal when none were given.
  std::vector<double> normalized_weights() const {
    if (weights.empty()) return std::vector<double>(cols, 1.0 / static_cast<double>(cols));
    double s = 0.0;
    for (double w : weights) s += w;
    if (!(s > 0.0)) throw std::invalid_argument("weight vector is zero");
    std::vector<double> out(weights);
    for (auto& w : out) w /= s;
    return out;
  }
};

/// Column-wise min-max scaling with 1 = best. A constant column maps to 1.
inline std::vector<double> normalize(const DecisionMatrix& m) {
  m.validate();
  std::vector<double> out(m.values.size(), 1.0);
  for (std::size_t k = 0; k < m.cols; ++k) {
    double lo = m(0, k), hi = m(0, k);
    for (std::size_t l = 1; l < m.rows; ++l) {
      lo = std::min(lo, m(l, k));
      hi = std::max(hi, m(l, k));
    }
    if (!(hi > lo)) continue;
    for (std::size_t l = 0; l < m.rows; ++l) {
      const double f = (m(l, k) - lo) / (hi - lo);
      out[l * m.cols + k] = m.senses[k] == Sense::maximize ? f : 1.0 - f;
    }
  }
  return out;
}

struct GreyCoefficients {
  std::vector<double> positive;  // against the all-1 row
  std::vector<double> negative;  // against the all-0 row
};

namespace detail {

inline std::vector<double> deng(const std::vector<double>& normalized, double reference, double rho) {
  std::vector<double> delta(normalized.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = std::abs(normalized[i] - reference);
  const auto [mn, mx] = std::minmax_element(delta.begin(), delta.end());
  const double dmin = *mn, dmax = *mx;
  std::vector<double> g(delta.size(), 1.0);
  if (!(dmax > 0.0)) return g;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (dmin + rho * dmax) / (delta[i] + rho * dmax);
  return g;
}

}  // namespace detail

/// Deng grey relation coefficients of the normalised matrix against both ideal rows.
inline GreyCoefficients grey_coefficients(const DecisionMatrix& m, double rho = 0.5) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("distinguishing coefficient must be in (0, 1]");
  const auto n = normalize(m);
  return {detail::deng(n, 1.0, rho), detail::deng(n, 0.0, rho)};
}

/// V = sum_k gamma_k w_k^2 / sqrt(sum_k w_k^2).
inline double projection(const std::vector<double>& gamma, const std::vector<double>& weights) {
  if (gamma.size() != weights.size()) throw std::invalid_argument("projection arity mismatch");
  double norm = 0.0, v = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    norm += weights[k] * weights[k];
    v += gamma[k] * weights[k] * weights[k];
  }
  if (!(norm > 0.0)) throw std::invalid_argument("weight vector is zero");
  return v / std::sqrt(norm);
}

struct SchemeScore {
  double v_plus = 0.0;
  double v_minus = 0.0;
  double d = 0.0;
};

struct GrpRanking {
  std::vector<SchemeScore> scores;
  std::size_t best_index = 0;
  double v0 = 0.0;
};

/// Priority membership of every scheme; the highest wins, ties to the lowest row.
inline GrpRanking rank(const DecisionMatrix& m, double rho = 0.5) {
  const auto g = grey_coefficients(m, rho);
  const auto w = m.normalized_weights();
  GrpRanking out;
  out.v0 = projection(std::vector<double>(m.cols, 1.0), w);
  out.scores.resize(m.rows);
  for (std::size_t l = 0; l < m.rows; ++l) {
    const auto first = static_cast<std::ptrdiff_t>(l * m.cols), last = first + static_cast<std::ptrdiff_t>(m.cols);
    auto& s = out.scores[l];
    s.v_plus = projection({g.positive.begin() + first, g.positive.begin() + last}, w);
    s.v_minus = projection({g.negative.begin() + first, g.negative.begin() + last}, w);
    const double a = (out.v0 - s.v_minus) * (out.v0 - s.v_minus);
    const double b = (out.v0 - s.v_plus) * (out.v0 - s.v_plus);
    s.d = a + b > 0.0 ? a / (a + b) : 0.5;
    if (s.d > out.scores[out.best_index].d) out.best_index = l;
  }
  return out;
}

}  // namespace dgplan::grp
