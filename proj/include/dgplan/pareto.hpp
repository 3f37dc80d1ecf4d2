#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dgplan {

enum class Sense { minimize, maximize };

/// Objective values plus constraint state. Feasible points dominate infeasible
/// ones; among infeasible points the smaller violation wins.
struct Evaluation {
  std::vector<double> values;
  bool feasible = true;
  double violation = 0.0;

  friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

/// Pareto dominance on raw objective tuples.
inline bool dominates(std::span<const double> a, std::span<const double> b, std::span<const Sense> senses) {
  if (a.size() != b.size() || a.size() != senses.size())
    throw std::invalid_argument("objective arity mismatch");
  bool strictly = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double better = senses[k] == Sense::minimize ? b[k] - a[k] : a[k] - b[k];
    if (better < 0.0) return false;
    if (better > 0.0) strictly = true;
  }
  return strictly;
}

inline bool dominates(const Evaluation& a, const Evaluation& b, std::span<const Sense> senses) {
  if (a.values.size() != b.values.size() || a.values.size() != senses.size())
    throw std::invalid_argument("objective arity mismatch");
  if (a.feasible != b.feasible) return a.feasible;
  if (!a.feasible) return a.violation < b.violation;
  return dominates(std::span<const double>(a.values), std::span<const double>(b.values), senses);
}

/// Indices of the non-dominated members, in input order. Exact duplicates
/// keep only their first occurrence. O(n^2).
inline std::vector<std::size_t> nondominated_indices(std::span<const Evaluation> pts, std::span<const Sense> senses) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool out = false;
    for (std::size_t j = 0; j < pts.size() && !out; ++j) {
      if (j == i) continue;
      if (dominates(pts[j], pts[i], senses) || (j < i && pts[j] == pts[i])) out = true;
    }
    if (!out) keep.push_back(i);
  }
  return keep;
}

namespace detail {

// Hypervolume for minimisation, points already strictly inside the reference box.
inline double hv_recursive(std::vector<std::vector<double>> pts, std::span<const double> ref, std::size_t dim) {
  if (pts.empty()) return 0.0;
  if (dim == 1) {
    double best = ref[0];
    for (const auto& p : pts) best = std::min(best, p[0]);
    return ref[0] - best;
  }
  const std::size_t last = dim - 1;
  std::sort(pts.begin(), pts.end(), [last](const auto& a, const auto& b) { return a[last] < b[last]; });
  double vol = 0.0;
  std::vector<std::vector<double>> slice;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    slice.emplace_back(pts[i].begin(), pts[i].begin() + static_cast<std::ptrdiff_t>(last));
    const double next = i + 1 < pts.size() ? pts[i + 1][last] : ref[last];
    const double depth = next - pts[i][last];
    if (depth > 0.0) vol += depth * hv_recursive(slice, ref, last);
  }
  return vol;
}

}  // namespace detail

/// Volume dominated by `points` and bounded by `reference` (exact, slicing).
/// Points that do not strictly improve on the reference in every objective add nothing.
inline double hypervolume(std::span<const std::vector<double>> points, std::span<const Sense> senses,
                          std::span<const double> reference) {
  const std::size_t d = senses.size();
  if (reference.size() != d) throw std::invalid_argument("reference arity mismatch");
  std::vector<double> ref(d);
  for (std::size_t k = 0; k < d; ++k) ref[k] = senses[k] == Sense::minimize ? reference[k] : -reference[k];
  std::vector<std::vector<double>> pts;
  for (const auto& p : points) {
    if (p.size() != d) throw std::invalid_argument("objective arity mismatch");
    std::vector<double> q(d);
    bool inside = true;
    for (std::size_t k = 0; k < d; ++k) {
      q[k] = senses[k] == Sense::minimize ? p[k] : -p[k];
      if (!(q[k] < ref[k])) inside = false;
    }
    if (inside) pts.push_back(std::move(q));
  }
  return detail::hv_recursive(std::move(pts), ref, d);
}

}  // namespace dgplan
