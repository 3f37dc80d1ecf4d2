#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgplan/grp.hpp"
#include "dgplan/io.hpp"
#include "dgplan/moalo.hpp"
#include "dgplan/network.hpp"
#include "dgplan/objectives.hpp"
#include "dgplan/ppf.hpp"
#include "dgplan/siting.hpp"
#include "dgplan/storage.hpp"

namespace dgplan {

inline constexpr const char* version = "0.3.0";

namespace fs = std::filesystem;
using io::json;

/// Objective order used for archives, Pareto files and decisions.
inline const std::vector<Sense>& planning_senses() {
  static const std::vector<Sense> s{Sense::maximize, Sense::maximize, Sense::minimize};
  return s;
}

inline Evaluation to_evaluation(const ObjectiveVector& ov) {
  return {{ov.c_p, ov.vsf_total, ov.p_loss_kw}, ov.feasible, ov.violation};
}

struct RunConfig {
  fs::path case_path;
  std::size_t n_dg = 4;
  std::vector<DgKind> dg_kinds;  // by placement order
  io::MoaloSettings moalo;
  json economics;
  json distributions;
  std::vector<double> weights;  // empty means equal
  double omega = 0.6;
  std::size_t n_samples = 10000;
  std::optional<std::uint64_t> seed;
  fs::path out_dir;
  unsigned threads = 1;
  std::string source_text;  // raw config, hashed into the manifest
};

/// Relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  try {
    RunConfig c;
    c.case_path = j.at("case").get<std::string>();
    if (c.case_path.is_relative()) c.case_path = (base_dir / c.case_path).lexically_normal();
    c.n_dg = j.value("n_dg", c.n_dg);
    for (const auto& k : j.value("dg_kinds", std::vector<std::string>{})) c.dg_kinds.push_back(parse_dg_kind(k));
    c.moalo = io::parse_moalo(j.value("moalo", json()));
    c.economics = j.value("economics", json());
    c.distributions = j.value("distributions", json());
    c.weights = j.value("weights", c.weights);
    c.omega = j.value("omega", c.omega);
    c.n_samples = j.value("n_samples", c.n_samples);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out_dir")) {
      c.out_dir = j.at("out_dir").get<std::string>();
      if (c.out_dir.is_relative()) c.out_dir = (base_dir / c.out_dir).lexically_normal();
    }
    c.threads = j.value("threads", c.threads);
    c.source_text = j.dump();
    return c;
  } catch (const json::exception& e) {
    throw parse_error(std::string("bad run config: ") + e.what());
  }
}

inline RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("config file not found: " + path.string());
  return parse_run_config(io::read_json(path), path.parent_path());
}

inline void validate_run_config(const RunConfig& c) {
  if (!fs::is_regular_file(c.case_path)) throw std::runtime_error("case file not found: " + c.case_path.string());
  if (!c.seed) throw validation_error("a seed is required for pipeline runs");
  if (c.out_dir.empty()) throw validation_error("an output directory is required");
  if (c.n_dg == 0) throw validation_error("n_dg must be positive");
  if (c.dg_kinds.size() != c.n_dg)
    throw validation_error("dg_kinds lists " + std::to_string(c.dg_kinds.size()) + " kinds for n_dg = " +
                           std::to_string(c.n_dg));
  if (!(c.omega > 0.0 && c.omega < 1.0)) throw validation_error("omega must be in (0, 1)");
  if (c.n_samples == 0) throw validation_error("n_samples must be positive");
  if (!c.weights.empty() && c.weights.size() != 3) throw validation_error("weights needs one entry per objective (3)");
}

// ---- Stage helpers shared by the CLI and the pipeline ----------------------

inline io::Table stage1_table(const SitingResult& r, const std::vector<DgKind>& kinds) {
  io::Table t{{"order", "bus", "kind", "capacity_kw", "lsf_kw_per_kw", "loss_after_kw"}, {}};
  for (std::size_t i = 0; i < r.placements.size(); ++i) {
    const auto& p = r.placements[i];
    t.rows.push_back({std::to_string(i + 1), std::to_string(p.bus),
                      i < kinds.size() ? std::string(to_string(kinds[i])) : "", fmt::num(p.capacity_kw),
                      fmt::num(p.lsf), fmt::num(r.loss_after_each_kw[i])});
  }
  return t;
}

inline std::string capacity_column(const DgUnit& u) {
  return "cap_bus" + std::to_string(u.bus) + "_" + std::string(to_string(u.kind)) + "_kw";
}

inline io::Table pareto_table(const std::vector<DgUnit>& sites, const moalo::Archive& archive) {
  io::Table t;
  t.header.push_back("id");
  for (const auto& u : sites) t.header.push_back(capacity_column(u));
  for (const char* h : {"c_p_pu", "vsf_total_pu", "p_loss_kw", "feasible", "violation_pu"}) t.header.push_back(h);
  // Sorted by loss so the file does not depend on archive insertion history.
  std::vector<std::size_t> order(archive.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& m = archive.members();
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return m[a].eval.values[2] < m[b].eval.values[2]; });
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& c = m[order[r]];
    std::vector<std::string> row{std::to_string(r)};
    for (double x : c.x) row.push_back(fmt::num(x));
    for (double v : c.eval.values) row.push_back(fmt::num(v));
    row.push_back(c.eval.feasible ? "1" : "0");
    row.push_back(fmt::num(c.eval.violation));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Decision matrix from the feasible rows of a Pareto table. `rows` receives
/// the table row of each matrix row.
inline grp::DecisionMatrix decision_matrix(const io::Table& pareto, std::vector<double> weights,
                                           std::vector<std::size_t>* rows = nullptr) {
  const std::size_t cols[3] = {pareto.column("c_p_pu"), pareto.column("vsf_total_pu"), pareto.column("p_loss_kw")};
  const bool has_feasible = pareto.has_column("feasible");
  const auto fcol = has_feasible ? pareto.column("feasible") : 0;
  grp::DecisionMatrix m;
  m.cols = 3;
  m.senses = planning_senses();
  m.weights = std::move(weights);
  for (std::size_t r = 0; r < pareto.rows.size(); ++r) {
    if (has_feasible && pareto.rows[r][fcol] != "1") continue;
    for (auto c : cols) m.values.push_back(pareto.number(r, c));
    if (rows) rows->push_back(r);
    ++m.rows;
  }
  if (m.rows == 0) throw validation_error("no feasible Pareto solutions to decide between");
  return m;
}

inline io::Table ranking_table(const io::Table& pareto, const std::vector<std::size_t>& rows,
                               const grp::GrpRanking& rk) {
  const auto id = pareto.column("id");
  io::Table t{{"id", "v_plus", "v_minus", "priority_d", "best"}, {}};
  for (std::size_t l = 0; l < rk.scores.size(); ++l) {
    const auto& s = rk.scores[l];
    t.rows.push_back({pareto.rows[rows[l]][id], fmt::num(s.v_plus), fmt::num(s.v_minus), fmt::num(s.d),
                      l == rk.best_index ? "1" : "0"});
  }
  return t;
}

/// Box for capacity search: [lower, upper] per site, defaulting to
/// [0, scale * stage-1 size] capped at the penetration limit.
inline moalo::Box planning_box(const PlanningProblem& p, const std::vector<double>& stage1_kw,
                               const io::MoaloSettings& s) {
  const std::size_t d = p.dimension();
  moalo::Box b;
  b.lower = s.lower_kw.empty() ? std::vector<double>(d, 0.0) : s.lower_kw;
  if (!s.upper_kw.empty()) {
    b.upper = s.upper_kw;
  } else {
    b.upper.resize(d);
    for (std::size_t i = 0; i < d; ++i)
      b.upper[i] = std::min(p.penetration_limit_kw(), std::max(s.upper_scale * stage1_kw.at(i), 1.0));
  }
  if (b.lower.size() != d || b.upper.size() != d) throw validation_error("MOALO bounds need one entry per DG site");
  b.validate();
  return b;
}

inline moalo::Archive optimize_planning(const PlanningProblem& problem, const moalo::Box& box,
                                        const io::MoaloSettings& s, std::uint64_t seed,
                                        const moalo::Observer& observer = {}) {
  moalo::Config cfg;
  cfg.n_ants = s.n_ants;
  cfg.max_iter = s.max_iter;
  cfg.archive_capacity = s.archive_capacity;
  cfg.grid_divisions = s.grid_divisions;
  cfg.threads = s.threads;
  cfg.seed = seed;
  cfg.bounds = box;
  return moalo::optimize([&](std::span<const double> x) { return to_evaluation(problem.evaluate(x)); }, cfg,
                         planning_senses(), observer);
}

inline io::Table ppf_summary_table(const PpfReport& r) {
  io::Table t{{"series", "units", "n", "excluded", "p05", "median", "p95", "mean"}, {}};
  auto add = [&](const CdfSeries& c) {
    double mean = 0.0;
    for (double v : c.values) mean += v;
    if (c.size()) mean /= static_cast<double>(c.size());
    t.rows.push_back({c.label, c.units, std::to_string(c.size()), std::to_string(r.excluded), fmt::num(c.quantile(0.05)),
                      fmt::num(c.median()), fmt::num(c.quantile(0.95)), fmt::num(mean)});
  };
  add(r.p_loss);
  add(r.q_loss);
  for (const auto& c : r.output) add(c);
  for (const auto& c : r.voltage) add(c);
  return t;
}

/// Writes one CSV per series plus summary.csv; returns the written paths.
inline std::vector<fs::path> write_ppf(const fs::path& dir, const PpfReport& r) {
  std::vector<fs::path> out;
  auto put = [&](const fs::path& p, const io::Table& t) {
    io::write_csv(p, t);
    out.push_back(p);
  };
  put(dir / "summary.csv", ppf_summary_table(r));
  put(dir / (r.p_loss.label + ".csv"), io::cdf_table(r.p_loss));
  put(dir / (r.q_loss.label + ".csv"), io::cdf_table(r.q_loss));
  for (const auto& c : r.output) put(dir / (c.label + ".csv"), io::cdf_table(c));
  for (const auto& c : r.voltage) put(dir / (c.label + ".csv"), io::cdf_table(c));
  return out;
}

// ---- Pipeline -------------------------------------------------------------

class stage_error : public std::runtime_error {
 public:
  stage_error(const std::string& stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Runs stage1 -> optimize -> decide -> storage -> ppf (without, then with
/// storage), writing every artifact and manifest.json under cfg.out_dir.
inline json run_pipeline(const RunConfig& cfg) {
  validate_run_config(cfg);
  const auto seed = *cfg.seed;
  const std::string case_text = io::read_file(cfg.case_path);
  const auto network = load_case(case_text);
  fs::create_directories(cfg.out_dir);

  json manifest{{"tool", "dgplan"},
                {"version", version},
                {"seed", seed},
                {"inputs",
                 {{"case", cfg.case_path.string()},
                  {"case_fnv1a", io::hex64(io::fnv1a(case_text))},
                  {"config_fnv1a", io::hex64(io::fnv1a(cfg.source_text))}}},
                {"stages", json::array()}};
  auto save_manifest = [&] { io::write_file(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n"); };

  auto stage = [&](const std::string& name, const std::function<std::vector<fs::path>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<fs::path> files;
    try {
      files = body();
    } catch (const std::exception& e) {
      manifest["failed_stage"] = name;
      manifest["error"] = e.what();
      save_manifest();
      throw stage_error(name, e.what());
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    json art = json::array();
    for (const auto& f : files)
      art.push_back({{"path", fs::relative(f, cfg.out_dir).generic_string()},
                     {"fnv1a", io::hex64(io::fnv1a(io::read_file(f)))}});
    manifest["stages"].push_back({{"name", name}, {"wall_time_s", dt.count()}, {"artifacts", art}});
  };

  SitingResult sited;
  io::Portfolio portfolio;
  std::optional<PlanningProblem> problem;
  moalo::Archive archive(1, planning_senses());
  std::vector<double> compromise;
  std::vector<StorageSpec> storage;

  stage("stage1", [&] {
    sited = stage1_place(network, cfg.n_dg);
    const auto p = cfg.out_dir / "stage1.csv";
    io::write_csv(p, stage1_table(sited, cfg.dg_kinds));
    return std::vector<fs::path>{p};
  });

  stage("optimize", [&] {
    json sites = json::array();
    std::vector<double> initial;
    for (std::size_t i = 0; i < sited.placements.size(); ++i) {
      sites.push_back({{"kind", std::string(to_string(cfg.dg_kinds[i]))},
                       {"bus", sited.placements[i].bus},
                       {"s_rated_kw", sited.placements[i].capacity_kw}});
      initial.push_back(sited.placements[i].capacity_kw);
    }
    if (initial.empty()) throw validation_error("stage 1 placed no DG");
    portfolio = io::parse_portfolio({{"sites", sites}, {"economics", cfg.economics}, {"distributions", cfg.distributions}});
    auto settings = cfg.moalo;
    if (settings.threads == 1) settings.threads = cfg.threads;
    problem.emplace(network, portfolio.units);
    archive = optimize_planning(*problem, planning_box(*problem, initial, settings), settings, seed);
    const auto p = cfg.out_dir / "pareto.csv";
    io::write_csv(p, pareto_table(portfolio.units, archive));
    return std::vector<fs::path>{p};
  });

  stage("decide", [&] {
    const auto pareto = io::read_csv(cfg.out_dir / "pareto.csv");
    std::vector<std::size_t> rows;
    const auto m = decision_matrix(pareto, cfg.weights, &rows);
    const auto rk = grp::rank(m);
    const auto p = cfg.out_dir / "ranking.csv";
    io::write_csv(p, ranking_table(pareto, rows, rk));
    const auto best = rows[rk.best_index];
    for (const auto& u : portfolio.units) compromise.push_back(pareto.number(best, pareto.column(capacity_column(u))));
    io::set_capacities(portfolio, compromise);
    const auto q = cfg.out_dir / "compromise.json";
    io::write_file(q, io::portfolio_json(portfolio).dump(2) + "\n");
    return std::vector<fs::path>{p, q};
  });

  stage("storage", [&] {
    storage = size_storage(portfolio.sites, cfg.omega, cfg.n_samples, seed, cfg.threads);
    const auto p = cfg.out_dir / "storage.csv";
    io::write_csv(p, io::storage_table(storage));
    return std::vector<fs::path>{p};
  });

  PpfOptions popt;
  popt.threads = cfg.threads;
  stage("ppf_without_storage", [&] {
    const auto r = run_ppf(network, portfolio.sites, std::nullopt, cfg.n_samples, seed, popt);
    return write_ppf(cfg.out_dir / "ppf_without_storage", r);
  });
  stage("ppf_with_storage", [&] {
    const auto r = run_ppf(network, portfolio.sites, storage, cfg.n_samples, seed, popt);
    return write_ppf(cfg.out_dir / "ppf_with_storage", r);
  });

  const auto base = solve(network);
  const auto comp = problem->evaluate(compromise);
  json caps = json::array();
  for (const auto& u : portfolio.units)
    caps.push_back({{"bus", u.bus}, {"kind", std::string(to_string(u.kind))}, {"s_rated_kw", u.s_rated_kw}});
  manifest["summary"] = {
      {"base", {{"p_loss_kw", base.p_loss_kw}, {"vsf_total_pu", vsf(network, base).total}}},
      {"compromise",
       {{"p_loss_kw", comp.p_loss_kw}, {"vsf_total_pu", comp.vsf_total}, {"c_p_pu", comp.c_p}, {"sites", caps}}}};
  save_manifest();
  return manifest;
}

// ---- Report ---------------------------------------------------------------

struct Comparison {
  double base_loss_kw = 0.0;
  double loss_kw = 0.0;
  double base_vsf = 0.0;
  double vsf = 0.0;
  double c_p = 0.0;

  double loss_reduction_pct() const { return base_loss_kw > 0.0 ? 100.0 * (base_loss_kw - loss_kw) / base_loss_kw : 0.0; }
  double vsf_increase_pct() const { return base_vsf != 0.0 ? 100.0 * (vsf - base_vsf) / base_vsf : 0.0; }
};

inline Comparison compare(const NetworkCase& c, std::span<const Injection> injections,
                          std::span<const DgUnit> units) {
  const auto base = solve(c);
  const auto sol = solve(c, injections);
  Comparison r{base.p_loss_kw, sol.p_loss_kw, vsf(c, base).total, vsf(c, sol).total, 0.0};
  try {
    r.c_p = investment_benefit(units);
  } catch (const undefined_benefit_error&) {
  }
  return r;
}

inline io::Table comparison_table(const Comparison& r) {
  return {{"metric", "units", "base", "compromise", "change_pct"},
          {{"c_p", "pu", "", fmt::num(r.c_p), ""},
           {"vsf_total", "pu", fmt::num(r.base_vsf), fmt::num(r.vsf), fmt::num(r.vsf_increase_pct())},
           {"p_loss", "kW", fmt::num(r.base_loss_kw), fmt::num(r.loss_kw), fmt::num(-r.loss_reduction_pct())}}};
}

inline Comparison report(const json& manifest) {
  if (!manifest.contains("summary") || manifest.contains("failed_stage"))
    throw validation_error("manifest is incomplete: the pipeline did not finish");
  try {
    const auto& s = manifest.at("summary");
    return {s.at("base").at("p_loss_kw").get<double>(), s.at("compromise").at("p_loss_kw").get<double>(),
            s.at("base").at("vsf_total_pu").get<double>(), s.at("compromise").at("vsf_total_pu").get<double>(),
            s.at("compromise").at("c_p_pu").get<double>()};
  } catch (const json::exception& e) {
    throw validation_error(std::string("manifest is incomplete: ") + e.what());
  }
}

}  // namespace dgplan
