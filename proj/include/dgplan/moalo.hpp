#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgplan/parallel.hpp"
#include "dgplan/pareto.hpp"

namespace dgplan::moalo {

using Rng = std::mt19937_64;

struct Candidate {
  std::vector<double> x;
  Evaluation eval;
};

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const noexcept { return lower.size(); }
  void validate() const {
    if (lower.size() != upper.size() || lower.empty()) throw std::invalid_argument("box bounds arity mismatch");
    for (std::size_t d = 0; d < lower.size(); ++d)
      if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(lower[d] < upper[d]))
        throw std::invalid_argument("box bounds must be finite with lower < upper");
  }
};

struct Config {
  std::size_t n_ants = 100;
  std::size_t max_iter = 500;
  std::size_t archive_capacity = 100;
  std::uint64_t seed = 1;
  Box bounds;
  std::size_t grid_divisions = 10;
  unsigned threads = 1;
};

/// Bounded non-dominated archive. Crowding is the number of members sharing
/// a hypercube of a grid laid over the archive's own objective range.
class Archive {
 public:
  Archive(std::size_t capacity, std::vector<Sense> senses, std::size_t divisions = 10)
      : capacity_(capacity), divisions_(divisions), senses_(std::move(senses)) {
    if (capacity_ == 0) throw std::invalid_argument("archive capacity must be positive");
    if (divisions_ == 0) throw std::invalid_argument("grid divisions must be positive");
  }

  const std::vector<Candidate>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::vector<Sense>& senses() const noexcept { return senses_; }

  /// Hypercube coordinates of every member, flattened to one key per member.
  std::vector<std::vector<std::size_t>> cells() const {
    std::vector<std::vector<std::size_t>> out(members_.size());
    if (members_.empty()) return out;
    const std::size_t d = senses_.size();
    std::vector<double> lo(d, 0.0), hi(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      lo[k] = hi[k] = members_[0].eval.values[k];
      for (const auto& m : members_) {
        lo[k] = std::min(lo[k], m.eval.values[k]);
        hi[k] = std::max(hi[k], m.eval.values[k]);
      }
    }
    for (std::size_t i = 0; i < members_.size(); ++i) {
      out[i].resize(d);
      for (std::size_t k = 0; k < d; ++k) {
        std::size_t c = 0;
        const double span = hi[k] - lo[k];
        if (span > 0.0 && std::isfinite(span)) {
          const double f = (members_[i].eval.values[k] - lo[k]) / span;
          c = std::min(divisions_ - 1, static_cast<std::size_t>(f * static_cast<double>(divisions_)));
        }
        out[i][k] = c;
      }
    }
    return out;
  }

  /// Members sharing each member's hypercube, itself included (>= 1).
  std::vector<std::size_t> crowding() const {
    const auto cs = cells();
    std::map<std::vector<std::size_t>, std::size_t> count;
    for (const auto& c : cs) ++count[c];
    std::vector<std::size_t> out(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) out[i] = count[cs[i]];
    return out;
  }

  /// Merges entrants, drops everything dominated (and exact duplicates), then
  /// thins the densest stretch of the front until within capacity. Returns true
  /// if trimming removed any non-dominated member.
  bool update(std::vector<Candidate> entrants) {
    std::vector<Candidate> pool = std::move(members_);
    for (auto& e : entrants) {
      if (e.eval.values.size() != senses_.size()) throw std::invalid_argument("objective arity mismatch");
      pool.push_back(std::move(e));
    }
    std::vector<Evaluation> evals;
    evals.reserve(pool.size());
    for (const auto& c : pool) evals.push_back(c.eval);
    members_.clear();
    for (auto i : nondominated_indices(evals, senses_)) members_.push_back(std::move(pool[i]));

    bool truncated = false;
    while (members_.size() > capacity_) {
      truncated = true;
      members_.erase(members_.begin() + static_cast<std::ptrdiff_t>(pick_victim()));
    }
    return truncated;
  }

 private:
  // Per-objective extremes are kept; of the rest, the member leaving the
  // narrowest hole (range-normalized objectives) goes. Ties fall to the most
  // recently added.
  std::size_t pick_victim() const {
    const std::size_t d = senses_.size(), n = members_.size();
    std::vector<double> lo(d), span(d);
    std::vector<char> extreme(n, 0);
    for (std::size_t k = 0; k < d; ++k) {
      std::size_t imin = 0, imax = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (members_[i].eval.values[k] < members_[imin].eval.values[k]) imin = i;
        if (members_[i].eval.values[k] > members_[imax].eval.values[k]) imax = i;
      }
      extreme[imin] = extreme[imax] = 1;
      lo[k] = members_[imin].eval.values[k];
      span[k] = members_[imax].eval.values[k] - lo[k];
      if (!(span[k] > 0.0) || !std::isfinite(span[k])) span[k] = 1.0;
    }
    // Width of the hole left behind: distance to the two nearest neighbours.
    auto gap = [&](std::size_t i) {
      double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double t = (members_[i].eval.values[k] - members_[j].eval.values[k]) / span[k];
          s += t * t;
        }
        s = std::sqrt(s);
        if (s < d1) {
          d2 = d1;
          d1 = s;
        } else if (s < d2) {
          d2 = s;
        }
      }
      return std::isfinite(d2) ? d1 + d2 : d1;
    };
    for (const bool keep_extremes : {true, false}) {
      std::size_t victim = n;
      double smallest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (keep_extremes && extreme[i]) continue;
        const double g = gap(i);
        if (victim == n || g <= smallest) {
          smallest = g;
          victim = i;
        }
      }
      if (victim < n) return victim;
    }
    return n - 1;
  }

  std::size_t capacity_;
  std::size_t divisions_;
  std::vector<Sense> senses_;
  std::vector<Candidate> members_;
};

inline Archive update_archive(Archive archive, std::vector<Candidate> entrants) {
  archive.update(std::move(entrants));
  return archive;
}

/// Roulette-wheel pick with weight 1 / crowding, favouring sparse regions.
inline std::size_t select_elite(const Archive& archive, Rng& rng) {
  if (archive.empty()) throw std::invalid_argument("cannot select from an empty archive");
  const auto crowd = archive.crowding();
  std::vector<double> w(crowd.size());
  for (std::size_t i = 0; i < crowd.size(); ++i) w[i] = 1.0 / static_cast<double>(crowd[i]);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return pick(rng);
}

/// Walk positions, (steps + 1) rows by dim columns, row-major.
struct WalkMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

/// Cumulative sum of +-1 steps, starting at 0.
inline std::vector<double> cumulative_walk(std::span<const int> steps) {
  std::vector<double> x(steps.size() + 1, 0.0);
  for (std::size_t t = 0; t < steps.size(); ++t) x[t + 1] = x[t] + (steps[t] > 0 ? 1.0 : -1.0);
  return x;
}

/// Min-max maps a raw walk onto [lo, hi].
inline std::vector<double> normalize_walk(std::span<const double> raw, double lo, double hi) {
  const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
  std::vector<double> out(raw.size(), lo);
  if (*mx == *mn) return out;
  for (std::size_t t = 0; t < raw.size(); ++t) out[t] = lo + (raw[t] - *mn) * (hi - lo) / (*mx - *mn);
  return out;
}

/// One independent normalised +-1 walk per dimension.
inline WalkMatrix random_walk(std::size_t dim, std::size_t steps, std::span<const double> lower,
                              std::span<const double> upper, Rng& rng) {
  if (lower.size() != dim || upper.size() != dim) throw std::invalid_argument("walk bounds arity mismatch");
  WalkMatrix w{steps + 1, dim, std::vector<double>((steps + 1) * dim)};
  std::bernoulli_distribution coin(0.5);
  std::vector<int> s(steps);
  for (std::size_t d = 0; d < dim; ++d) {
    for (auto& v : s) v = coin(rng) ? 1 : -1;
    const auto raw = cumulative_walk(s);
    const auto norm = normalize_walk(raw, lower[d], upper[d]);
    for (std::size_t t = 0; t <= steps; ++t) w(t, d) = norm[t];
  }
  return w;
}

/// Boundary shrink ratio: 1 for the first tenth of the run, then
/// 1 + 10^w * iter / max_iter with w stepping 2..6 at 10/50/75/90/95 %.
inline double shrink_ratio(std::size_t iter, std::size_t max_iter) {
  const double f = static_cast<double>(iter) / static_cast<double>(max_iter);
  int w = 0;
  if (f > 0.10) w = 2;
  if (f > 0.50) w = 3;
  if (f > 0.75) w = 4;
  if (f > 0.90) w = 5;
  if (f > 0.95) w = 6;
  return w == 0 ? 1.0 : 1.0 + std::pow(10.0, w) * f;
}

/// Trap bounds around an antlion for the given iteration, as (lower, upper) per dimension.
inline std::pair<std::vector<double>, std::vector<double>> trap_bounds(std::span<const double> antlion,
                                                                       const Box& box, std::size_t iter,
                                                                       std::size_t max_iter, Rng& rng) {
  const double ratio = shrink_ratio(iter, max_iter);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool lo_plus = u(rng) < 0.5;
  const bool hi_plus = u(rng) >= 0.5;
  std::vector<double> lo(box.dim()), hi(box.dim());
  for (std::size_t d = 0; d < box.dim(); ++d) {
    const double c = (lo_plus ? box.lower[d] / ratio : -box.lower[d] / ratio) + antlion[d];
    const double e = (hi_plus ? box.upper[d] / ratio : -box.upper[d] / ratio) + antlion[d];
    lo[d] = std::min(c, e);
    hi[d] = std::max(c, e);
  }
  return {lo, hi};
}

/// Position of a walk around `antlion` at step `iter`.
inline std::vector<double> walk_around(std::span<const double> antlion, const Box& box, std::size_t iter,
                                       std::size_t max_iter, Rng& rng) {
  const auto [lo, hi] = trap_bounds(antlion, box, iter, max_iter, rng);
  const auto w = random_walk(box.dim(), max_iter, lo, hi, rng);
  std::vector<double> x(box.dim());
  for (std::size_t d = 0; d < box.dim(); ++d) x[d] = w(iter, d);
  return x;
}

using Observer = std::function<void(std::size_t iter, const Archive& archive, bool truncated)>;

/// Multi-objective ant lion optimiser. `evaluate` maps a decision vector to
/// an Evaluation; it must be deterministic and safe to call concurrently when
/// config.threads > 1.
template <class Evaluator>
Archive optimize(Evaluator&& evaluate, const Config& config, std::vector<Sense> senses,
                 const Observer& observer = {}) {
  config.bounds.validate();
  if (config.n_ants == 0 || config.max_iter == 0) throw std::invalid_argument("n_ants and max_iter must be positive");
  const Box& box = config.bounds;
  const std::size_t dim = box.dim();
  Rng rng(config.seed);
  Archive archive(config.archive_capacity, std::move(senses), config.grid_divisions);

  std::vector<Candidate> ants(config.n_ants);
  auto evaluate_all = [&](std::size_t iter) {
    parallel_for(ants.size(), config.threads, [&](std::size_t i) {
      try {
        ants[i].eval = evaluate(std::span<const double>(ants[i].x));
      } catch (const std::exception& e) {
        throw std::runtime_error("evaluation failed at iteration " + std::to_string(iter) + ", ant " +
                                 std::to_string(i) + ": " + e.what());
      }
    });
  };

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& a : ants) {
    a.x.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) a.x[d] = box.lower[d] + unit(rng) * (box.upper[d] - box.lower[d]);
  }
  evaluate_all(0);
  bool truncated = archive.update(ants);
  if (observer) observer(0, archive, truncated);

  for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
    for (auto& a : ants) {
      std::uniform_int_distribution<std::size_t> any(0, archive.size() - 1);
      const auto& antlion = archive.members()[any(rng)].x;
      const auto& elite = archive.members()[select_elite(archive, rng)].x;
      const auto ra = walk_around(antlion, box, iter, config.max_iter, rng);
      const auto re = walk_around(elite, box, iter, config.max_iter, rng);
      for (std::size_t d = 0; d < dim; ++d)
        a.x[d] = std::clamp(0.5 * (ra[d] + re[d]), box.lower[d], box.upper[d]);
    }
    evaluate_all(iter);
    truncated = archive.update(ants);
    if (observer) observer(iter, archive, truncated);
  }
  return archive;
}

}  // namespace dgplan::moalo
