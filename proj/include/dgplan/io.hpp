#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dgplan/error.hpp"
#include "dgplan/format.hpp"
#include "dgplan/moalo.hpp"
#include "dgplan/objectives.hpp"
#include "dgplan/ppf.hpp"
#include "dgplan/stochastic.hpp"
#include "dgplan/storage.hpp"

namespace dgplan::io {

using json = nlohmann::json;

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("failed writing " + p.string());
}

inline json read_json(const std::filesystem::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw parse_error(p.string() + ": invalid JSON: " + e.what());
  }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

// ---- CSV ------------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw parse_error("missing CSV column '" + std::string(name) + "'");
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
  double number(std::size_t row, std::size_t col) const {
    auto v = fmt::parse_double(rows.at(row).at(col));
    if (!v) throw parse_error("non-numeric CSV cell '" + rows[row][col] + "'", row + 2);
    return *v;
  }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    out.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw parse_error("expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()),
                        line_no);
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw parse_error("empty CSV");
  return t;
}

inline Table read_csv(const std::filesystem::path& p) { return parse_csv(read_file(p)); }

inline std::string to_csv(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

inline void write_csv(const std::filesystem::path& p, const Table& t) { write_file(p, to_csv(t)); }

// ---- JSON configs ---------------------------------------------------------

inline DgEconomics parse_economics(const json& j, DgEconomics base) {
  base.c_gp = j.value("c_gp_usd_per_kwh", base.c_gp);
  base.c_gs = j.value("c_gs_usd_per_kwh", base.c_gs);
  base.c_mc = j.value("c_mc_usd_per_kwh", base.c_mc);
  base.c_fic = j.value("c_fic_usd_per_kw", base.c_fic);
  base.xi_dg = j.value("xi_dg", base.xi_dg);
  base.lambda_cf = j.value("lambda_cf", base.lambda_cf);
  return base;
}

inline json economics_json(const DgEconomics& e) {
  return {{"c_gp_usd_per_kwh", e.c_gp}, {"c_gs_usd_per_kwh", e.c_gs}, {"c_mc_usd_per_kwh", e.c_mc},
          {"c_fic_usd_per_kw", e.c_fic}, {"xi_dg", e.xi_dg},          {"lambda_cf", e.lambda_cf}};
}

/// Per-kind overrides keyed "WT"/"PV"/"MT".
inline std::map<DgKind, DgEconomics> parse_economics_table(const json& j) {
  std::map<DgKind, DgEconomics> out;
  for (auto k : {DgKind::wt, DgKind::pv, DgKind::mt}) out[k] = default_economics(k);
  if (j.is_null()) return out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto k = parse_dg_kind(it.key());
    out[k] = parse_economics(it.value(), out[k]);
  }
  return out;
}

inline Distribution parse_distribution(const json& j, Distribution base) {
  if (j.contains("dist")) base.kind = parse_dist_kind(j.at("dist").get<std::string>());
  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (base.kind == DistKind::weibull) {
      base.a = p.value("shape", base.a);
      base.b = p.value("scale_m_per_s", base.b);
    } else if (base.kind == DistKind::beta) {
      base.a = p.value("alpha", base.a);
      base.b = p.value("beta", base.b);
    }
  }
  base.validate();
  return base;
}

inline json distribution_json(const Distribution& d) {
  json j{{"dist", std::string(to_string(d.kind))}};
  if (d.kind == DistKind::weibull) j["params"] = {{"shape", d.a}, {"scale_m_per_s", d.b}};
  if (d.kind == DistKind::beta) j["params"] = {{"alpha", d.a}, {"beta", d.b}};
  return j;
}

/// Per-kind stochastic model defaults, overridable per site.
struct ModelDefaults {
  std::map<DgKind, Distribution> dist{{DgKind::wt, default_distribution(DgKind::wt)},
                                      {DgKind::pv, default_distribution(DgKind::pv)},
                                      {DgKind::mt, default_distribution(DgKind::mt)}};
  WtCurve wind{};
  PvModel pv{};
};

inline WtCurve parse_wind(const json& j, WtCurve c) {
  c.v_in = j.value("v_in_m_per_s", c.v_in);
  c.v_r = j.value("v_r_m_per_s", c.v_r);
  c.v_out = j.value("v_out_m_per_s", c.v_out);
  return c;
}

inline PvModel parse_pv(const json& j, PvModel m) {
  m.eta = j.value("eta", m.eta);
  m.r_max = j.value("r_max_w_per_m2", m.r_max);
  m.area_m2 = j.value("area_m2", m.area_m2);
  return m;
}

inline ModelDefaults parse_model_defaults(const json& j) {
  ModelDefaults d;
  if (j.is_null()) return d;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "wind_curve") {
      d.wind = parse_wind(it.value(), d.wind);
    } else if (it.key() == "pv_model") {
      d.pv = parse_pv(it.value(), d.pv);
    } else {
      const auto k = parse_dg_kind(it.key());
      d.dist[k] = parse_distribution(it.value(), d.dist[k]);
    }
  }
  return d;
}

/// DG units with their stochastic models, index-aligned.
struct Portfolio {
  std::vector<DgUnit> units;
  std::vector<StochasticSite> sites;
};

/// {"economics": {...}, "distributions": {...}, "sites": [{"kind","bus","s_rated_kw",...}]}
inline Portfolio parse_portfolio(const json& j) {
  try {
    const auto econ = parse_economics_table(j.value("economics", json()));
    const auto models = parse_model_defaults(j.value("distributions", json()));
    Portfolio p;
    for (const auto& s : j.at("sites")) {
      DgUnit u;
      u.kind = parse_dg_kind(s.at("kind").get<std::string>());
      u.bus = s.at("bus").get<int>();
      u.s_rated_kw = s.value("s_rated_kw", 0.0);
      u.power_factor = s.value("power_factor", 1.0);
      if (!(u.s_rated_kw >= 0.0)) throw validation_error("negative s_rated_kw at bus " + std::to_string(u.bus));
      if (!(u.power_factor > 0.0 && u.power_factor <= 1.0))
        throw validation_error("power_factor must be in (0, 1] at bus " + std::to_string(u.bus));
      u.economics = econ.at(u.kind);
      if (s.contains("economics")) u.economics = parse_economics(s.at("economics"), u.economics);

      StochasticSite st;
      st.kind = u.kind;
      st.bus = u.bus;
      st.s_rated_kw = u.s_rated_kw;
      st.dist = parse_distribution(s, models.dist.at(u.kind));
      st.wind = s.contains("wind_curve") ? parse_wind(s.at("wind_curve"), models.wind) : models.wind;
      st.pv = s.contains("pv_model") ? parse_pv(s.at("pv_model"), models.pv) : models.pv;
      p.units.push_back(u);
      p.sites.push_back(st);
    }
    return p;
  } catch (const json::exception& e) {
    throw parse_error(std::string("bad portfolio JSON: ") + e.what());
  }
}

inline json portfolio_json(const Portfolio& p) {
  json sites = json::array();
  for (std::size_t i = 0; i < p.units.size(); ++i) {
    const auto& u = p.units[i];
    json s{{"kind", std::string(to_string(u.kind))},
           {"bus", u.bus},
           {"s_rated_kw", u.s_rated_kw},
           {"power_factor", u.power_factor},
           {"economics", economics_json(u.economics)}};
    if (i < p.sites.size()) s.update(distribution_json(p.sites[i].dist));
    sites.push_back(std::move(s));
  }
  return {{"sites", sites}};
}

inline void set_capacities(Portfolio& p, std::span<const double> kw) {
  if (kw.size() != p.units.size()) throw std::invalid_argument("capacity vector length mismatch");
  for (std::size_t i = 0; i < kw.size(); ++i) p.units[i].s_rated_kw = p.sites[i].s_rated_kw = kw[i];
}

struct MoaloSettings {
  std::size_t n_ants = 100;
  std::size_t max_iter = 500;
  std::size_t archive_capacity = 100;
  std::size_t grid_divisions = 10;
  unsigned threads = 1;
  double upper_scale = 2.0;       // box upper = scale * stage-1 size when upper_kw is absent
  std::vector<double> lower_kw;   // empty means 0
  std::vector<double> upper_kw;   // empty means derived
};

inline MoaloSettings parse_moalo(const json& j) {
  MoaloSettings s;
  if (j.is_null()) return s;
  s.n_ants = j.value("n_ants", s.n_ants);
  s.max_iter = j.value("max_iter", s.max_iter);
  s.archive_capacity = j.value("archive_capacity", s.archive_capacity);
  s.grid_divisions = j.value("grid_divisions", s.grid_divisions);
  s.threads = j.value("threads", s.threads);
  s.upper_scale = j.value("upper_scale", s.upper_scale);
  s.lower_kw = j.value("lower_kw", s.lower_kw);
  s.upper_kw = j.value("upper_kw", s.upper_kw);
  if (s.n_ants == 0 || s.max_iter == 0 || s.archive_capacity == 0 || s.grid_divisions == 0)
    throw validation_error("MOALO counts must be positive");
  if (!(s.upper_scale > 0.0)) throw validation_error("upper_scale must be positive");
  return s;
}

// ---- Standard tables ------------------------------------------------------

inline Table storage_table(const std::vector<StorageSpec>& specs) {
  Table t{{"bus", "omega", "p_reest_kw", "n"}, {}};
  for (const auto& s : specs) t.rows.push_back({std::to_string(s.bus), fmt::num(s.omega), fmt::num(s.p_reest_kw),
                                                std::to_string(s.n_samples)});
  return t;
}

inline std::vector<StorageSpec> parse_storage_table(const Table& t) {
  const auto bus = t.column("bus"), om = t.column("omega"), p = t.column("p_reest_kw"), n = t.column("n");
  std::vector<StorageSpec> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    out.push_back({static_cast<int>(t.number(r, bus)), t.number(r, p), t.number(r, om),
                   static_cast<std::size_t>(t.number(r, n)), 0});
  return out;
}

inline Table cdf_table(const CdfSeries& c) {
  Table t{{"value_" + c.units, "cum_prob"}, {}};
  for (std::size_t i = 0; i < c.values.size(); ++i) t.rows.push_back({fmt::num(c.values[i]), fmt::num(c.cum_prob[i])});
  return t;
}

}  // namespace dgplan::io
