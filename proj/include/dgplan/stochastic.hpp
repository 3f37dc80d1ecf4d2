#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dgplan/objectives.hpp"
#include "dgplan/parallel.hpp"

namespace dgplan {

struct WtCurve {
  double v_in = 4.0;
  double v_r = 16.0;
  double v_out = 28.0;
  double s_rated = 0.0;  // kW

  void validate() const {
    if (!(0.0 < v_in && v_in < v_r && v_r < v_out)) throw std::invalid_argument("wind curve needs 0 < v_in < v_r < v_out");
    if (!(s_rated >= 0.0)) throw std::invalid_argument("negative WT rating");
  }
};

/// Irradiance to output. With area_m2 == 0 the output is normalised so that
/// r_max gives s_rated; otherwise P = eta * area * r, capped at s_rated.
struct PvModel {
  double eta = 0.12;
  double r_max = 1000.0;  // W/m^2
  double s_rated = 0.0;   // kW
  double area_m2 = 0.0;

  void validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("PV efficiency must be in (0, 1]");
    if (!(r_max > 0.0)) throw std::invalid_argument("r_max must be positive");
    if (!(s_rated >= 0.0) || !(area_m2 >= 0.0)) throw std::invalid_argument("negative PV rating or area");
  }
};

inline double wt_power(double v, const WtCurve& c) {
  if (v < 0.0) throw std::invalid_argument("negative wind speed");
  if (v < c.v_in || v >= c.v_out) return 0.0;
  if (v < c.v_r) return c.s_rated * (v - c.v_in) / (c.v_r - c.v_in);
  return c.s_rated;
}

inline double pv_power(double r, const PvModel& m) {
  if (r < 0.0) throw std::invalid_argument("negative irradiance");
  if (m.area_m2 > 0.0) return std::min(m.s_rated, m.eta * m.area_m2 * r / 1000.0);
  return m.s_rated * std::min(r / m.r_max, 1.0);
}

enum class DistKind { weibull, beta, constant };

inline std::string_view to_string(DistKind k) {
  switch (k) {
    case DistKind::weibull: return "weibull";
    case DistKind::beta: return "beta";
    case DistKind::constant: return "constant";
  }
  return "?";
}

inline DistKind parse_dist_kind(std::string_view s) {
  if (s == "weibull") return DistKind::weibull;
  if (s == "beta") return DistKind::beta;
  if (s == "constant") return DistKind::constant;
  throw std::invalid_argument("unknown distribution '" + std::string(s) + "'");
}

/// weibull: a = shape k, b = scale c (m/s). beta: a, b shape parameters of r / r_max.
struct Distribution {
  DistKind kind = DistKind::constant;
  double a = 0.0;
  double b = 0.0;

  void validate() const {
    if (kind != DistKind::constant && !(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b)))
      throw std::invalid_argument(std::string(to_string(kind)) + " parameters must be positive");
  }
};

inline Distribution default_distribution(DgKind k) {
  switch (k) {
    case DgKind::wt: return {DistKind::weibull, 2.0, 8.0};
    case DgKind::pv: return {DistKind::beta, 2.06, 2.5};
    case DgKind::mt: return {DistKind::constant, 0.0, 0.0};
  }
  return {};
}

struct StochasticSite {
  DgKind kind = DgKind::mt;
  int bus = 0;
  double s_rated_kw = 0.0;
  Distribution dist{};
  WtCurve wind{};
  PvModel pv{};

  bool stochastic() const noexcept { return dist.kind != DistKind::constant; }
};

inline StochasticSite make_site(const DgUnit& u) {
  StochasticSite s;
  s.kind = u.kind;
  s.bus = u.bus;
  s.s_rated_kw = u.s_rated_kw;
  s.dist = default_distribution(u.kind);
  return s;
}

struct SiteSamples {
  int bus = 0;
  DgKind kind = DgKind::mt;
  double s_rated_kw = 0.0;
  std::vector<double> kw;
};

struct SampleSet {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::vector<SiteSamples> sites;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of an independent stream derived from a run seed and a stream index.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Draws n outputs for one site from its own stream. Draws are sequential, so a
/// shorter run is a prefix of a longer one with the same seed.
inline std::vector<double> sample_site(const StochasticSite& site, std::size_t n, std::uint64_t seed,
                                       std::uint64_t stream) {
  site.dist.validate();
  std::vector<double> out(n, site.s_rated_kw);
  if (site.dist.kind == DistKind::constant) return out;
  std::mt19937_64 rng(stream_seed(seed, stream));
  if (site.dist.kind == DistKind::weibull) {
    WtCurve c = site.wind;
    c.s_rated = site.s_rated_kw;
    c.validate();
    std::weibull_distribution<double> speed(site.dist.a, site.dist.b);
    for (auto& v : out) v = wt_power(speed(rng), c);
  } else {
    PvModel m = site.pv;
    m.s_rated = site.s_rated_kw;
    m.validate();
    std::gamma_distribution<double> ga(site.dist.a, 1.0), gb(site.dist.b, 1.0);
    for (auto& v : out) {
      const double x = ga(rng), y = gb(rng);
      v = pv_power(m.r_max * x / (x + y), m);
    }
  }
  return out;
}

inline SampleSet sample_outputs(const std::vector<StochasticSite>& sites, std::size_t n, std::uint64_t seed,
                                unsigned threads = 1) {
  if (n == 0) throw std::invalid_argument("sample count must be at least 1");
  for (const auto& s : sites) s.dist.validate();
  SampleSet set;
  set.seed = seed;
  set.n = n;
  set.sites.resize(sites.size());
  parallel_for(sites.size(), threads, [&](std::size_t i) {
    set.sites[i] = {sites[i].bus, sites[i].kind, sites[i].s_rated_kw, sample_site(sites[i], n, seed, i)};
  });
  return set;
}

}  // namespace dgplan
