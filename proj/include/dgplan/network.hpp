#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dgplan/error.hpp"
#include "dgplan/format.hpp"

namespace dgplan {

enum class BusKind { swing, load };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::load;
  double p_load_kw = 0.0;
  double q_load_kvar = 0.0;
  double u_min = 0.95;
  double u_max = 1.05;

  friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
  double s_rated_kva = 0.0;

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// A branch oriented away from the swing bus, in internal (0-based) bus indices.
struct OrientedBranch {
  std::size_t branch = 0;  // position in NetworkCase::branches()
  std::size_t sending = 0;
  std::size_t receiving = 0;
};

/// Validated, immutable radial network. Buses keep their external ids;
/// internal code addresses them by position in buses().
class NetworkCase {
 public:
  NetworkCase(double base_kv, double base_mva, std::vector<Bus> buses, std::vector<Branch> branches)
      : base_kv_(base_kv), base_mva_(base_mva), buses_(std::move(buses)), branches_(std::move(branches)) {
    validate_and_index();
  }

  double base_kv() const noexcept { return base_kv_; }
  double base_mva() const noexcept { return base_mva_; }
  double z_base_ohm() const noexcept { return base_kv_ * base_kv_ / base_mva_; }
  double kw_per_pu() const noexcept { return 1000.0 * base_mva_; }

  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  std::size_t bus_count() const noexcept { return buses_.size(); }
  std::size_t branch_count() const noexcept { return branches_.size(); }
  std::size_t swing_index() const noexcept { return swing_; }

  bool has_bus(int id) const { return bus_index_.count(id) != 0; }
  std::size_t bus_index(int id) const {
    auto it = bus_index_.find(id);
    if (it == bus_index_.end()) throw std::out_of_range("unknown bus id " + std::to_string(id));
    return it->second;
  }
  std::size_t branch_index(int id) const {
    auto it = branch_index_.find(id);
    if (it == branch_index_.end()) throw std::out_of_range("unknown branch id " + std::to_string(id));
    return it->second;
  }

  /// Root-to-leaf (BFS) order; every branch's sending bus precedes its receiving bus.
  const std::vector<OrientedBranch>& downstream_order() const noexcept { return order_; }
  /// Distance in branches from the swing bus, per internal bus index.
  const std::vector<std::size_t>& depth() const noexcept { return depth_; }
  /// Internal index of the bus on the far (downstream) side of a branch.
  std::size_t receiving(std::size_t branch) const { return receiving_.at(branch); }
  std::size_t sending(std::size_t branch) const { return sending_.at(branch); }

  double total_p_load_kw() const {
    double s = 0.0;
    for (const auto& b : buses_) s += b.p_load_kw;
    return s;
  }
  double total_q_load_kvar() const {
    double s = 0.0;
    for (const auto& b : buses_) s += b.q_load_kvar;
    return s;
  }

  friend bool operator==(const NetworkCase& a, const NetworkCase& b) {
    return a.base_kv_ == b.base_kv_ && a.base_mva_ == b.base_mva_ && a.buses_ == b.buses_ &&
           a.branches_ == b.branches_;
  }

 private:
  void validate_and_index() {
    if (!(base_kv_ > 0.0) || !(base_mva_ > 0.0)) throw validation_error("base_kv and base_mva must be positive");
    if (buses_.empty()) throw validation_error("case has no buses");

    std::size_t swings = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      const auto& b = buses_[i];
      if (!bus_index_.emplace(b.id, i).second) throw validation_error("duplicate bus id " + std::to_string(b.id));
      if (b.kind == BusKind::swing) {
        ++swings;
        swing_ = i;
      }
      if (!(b.u_min > 0.0) || !(b.u_min < b.u_max))
        throw validation_error("bus " + std::to_string(b.id) + ": require 0 < u_min < u_max");
      if (b.p_load_kw < 0.0 || b.q_load_kvar < 0.0)
        throw validation_error("bus " + std::to_string(b.id) + ": loads must be non-negative");
    }
    if (swings == 0) throw validation_error("missing swing bus");
    if (swings > 1) throw validation_error("more than one swing bus");

    for (std::size_t k = 0; k < branches_.size(); ++k) {
      const auto& br = branches_[k];
      const std::string tag = "branch " + std::to_string(br.id);
      if (!branch_index_.emplace(br.id, k).second) throw validation_error("duplicate branch id " + std::to_string(br.id));
      if (br.from_bus == br.to_bus) throw validation_error(tag + ": from_bus equals to_bus");
      if (!has_bus(br.from_bus) || !has_bus(br.to_bus)) throw validation_error(tag + ": references unknown bus");
      if (br.r_ohm < 0.0 || br.x_ohm < 0.0) throw validation_error(tag + ": negative impedance");
      if (!(br.s_rated_kva > 0.0)) throw validation_error(tag + ": s_rated must be positive");
    }
    if (branches_.size() != buses_.size() - 1) throw validation_error("not radial: |branches| != |buses| - 1");

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(buses_.size());
    for (std::size_t k = 0; k < branches_.size(); ++k) {
      auto f = bus_index_.at(branches_[k].from_bus);
      auto t = bus_index_.at(branches_[k].to_bus);
      adj[f].emplace_back(t, k);
      adj[t].emplace_back(f, k);
    }
    constexpr auto unseen = static_cast<std::size_t>(-1);
    depth_.assign(buses_.size(), unseen);
    depth_[swing_] = 0;
    std::queue<std::size_t> q;
    q.push(swing_);
    while (!q.empty()) {
      auto u = q.front();
      q.pop();
      for (auto [v, k] : adj[u]) {
        if (depth_[v] != unseen) continue;
        depth_[v] = depth_[u] + 1;
        order_.push_back({k, u, v});
        q.push(v);
      }
    }
    // With |E| = |V| - 1, connectivity is equivalent to acyclicity.
    if (order_.size() != branches_.size()) throw validation_error("not radial: network is disconnected or has a cycle");
    receiving_.resize(branches_.size());
    sending_.resize(branches_.size());
    for (const auto& ob : order_) {
      receiving_[ob.branch] = ob.receiving;
      sending_[ob.branch] = ob.sending;
    }
  }

  double base_kv_;
  double base_mva_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::size_t swing_ = 0;
  std::map<int, std::size_t> bus_index_;
  std::map<int, std::size_t> branch_index_;
  std::vector<OrientedBranch> order_;
  std::vector<std::size_t> depth_;
  std::vector<std::size_t> receiving_;
  std::vector<std::size_t> sending_;
};

inline std::vector<OrientedBranch> downstream_order(const NetworkCase& c) { return c.downstream_order(); }

namespace detail {

inline BusKind parse_kind(std::string_view s, std::size_t line) {
  if (s == "swing" || s == "slack") return BusKind::swing;
  if (s == "load" || s == "pq") return BusKind::load;
  throw parse_error("unknown bus kind '" + std::string(s) + "'", line);
}

inline double need_double(std::string_view s, std::string_view field, std::size_t line) {
  auto v = fmt::parse_double(s);
  if (!v) throw parse_error("malformed " + std::string(field) + " '" + std::string(s) + "'", line);
  return *v;
}

inline int need_int(std::string_view s, std::string_view field, std::size_t line) {
  auto v = fmt::parse_int(s);
  if (!v) throw parse_error("malformed " + std::string(field) + " '" + std::string(s) + "'", line);
  return static_cast<int>(*v);
}

inline NetworkCase parse_case_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(std::string("invalid JSON: ") + e.what());
  }
  try {
    std::vector<Bus> buses;
    for (const auto& b : j.at("bus")) {
      Bus bus;
      bus.id = b.at("id").get<int>();
      bus.kind = parse_kind(b.at("kind").get<std::string>(), 0);
      bus.p_load_kw = b.value("p_kw", 0.0);
      bus.q_load_kvar = b.value("q_kvar", 0.0);
      bus.u_min = b.value("umin_pu", 0.95);
      bus.u_max = b.value("umax_pu", 1.05);
      buses.push_back(bus);
    }
    std::vector<Branch> branches;
    for (const auto& b : j.at("branch")) {
      Branch br;
      br.id = b.at("id").get<int>();
      br.from_bus = b.at("from").get<int>();
      br.to_bus = b.at("to").get<int>();
      br.r_ohm = b.at("r_ohm").get<double>();
      br.x_ohm = b.at("x_ohm").get<double>();
      br.s_rated_kva = b.at("s_rated_kva").get<double>();
      branches.push_back(br);
    }
    return NetworkCase(j.at("base_kv").get<double>(), j.at("base_mva").get<double>(), std::move(buses),
                       std::move(branches));
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("bad case JSON: ") + e.what());
  }
}

}  // namespace detail

/// Parses the line-oriented case format (or its JSON encoding) and validates it.
inline NetworkCase load_case(const std::string& source) {
  auto first = source.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && source[first] == '{') return detail::parse_case_json(source);

  enum class Section { none, bus, branch } section = Section::none;
  std::optional<double> base_kv, base_mva;
  std::vector<Bus> buses;
  std::vector<Branch> branches;

  std::istringstream in(source);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = fmt::tokens(line);
    if (toks.empty()) continue;

    if (toks[0] == "[bus]") {
      section = Section::bus;
      continue;
    }
    if (toks[0] == "[branch]") {
      section = Section::branch;
      continue;
    }
    if (toks[0].find('=') != std::string_view::npos) {
      for (auto t : toks) {
        auto eq = t.find('=');
        if (eq == std::string_view::npos) throw parse_error("expected key=value", line_no);
        auto key = t.substr(0, eq);
        double v = detail::need_double(t.substr(eq + 1), key, line_no);
        if (key == "base_kv")
          base_kv = v;
        else if (key == "base_mva")
          base_mva = v;
        else
          throw parse_error("unknown header key '" + std::string(key) + "'", line_no);
      }
      continue;
    }

    switch (section) {
      case Section::bus: {
        if (toks.size() != 6) throw parse_error("bus row needs 6 fields", line_no);
        Bus b;
        b.id = detail::need_int(toks[0], "bus id", line_no);
        b.kind = detail::parse_kind(toks[1], line_no);
        b.p_load_kw = detail::need_double(toks[2], "p_kw", line_no);
        b.q_load_kvar = detail::need_double(toks[3], "q_kvar", line_no);
        b.u_min = detail::need_double(toks[4], "umin_pu", line_no);
        b.u_max = detail::need_double(toks[5], "umax_pu", line_no);
        buses.push_back(b);
        break;
      }
      case Section::branch: {
        if (toks.size() != 6) throw parse_error("branch row needs 6 fields", line_no);
        Branch br;
        br.id = detail::need_int(toks[0], "branch id", line_no);
        br.from_bus = detail::need_int(toks[1], "from", line_no);
        br.to_bus = detail::need_int(toks[2], "to", line_no);
        br.r_ohm = detail::need_double(toks[3], "r_ohm", line_no);
        br.x_ohm = detail::need_double(toks[4], "x_ohm", line_no);
        br.s_rated_kva = detail::need_double(toks[5], "s_rated_kva", line_no);
        branches.push_back(br);
        break;
      }
      case Section::none:
        throw parse_error("data row outside of a [bus] or [branch] section", line_no);
    }
  }
  if (!base_kv || !base_mva) throw parse_error("missing header line base_kv=<f> base_mva=<f>");
  return NetworkCase(*base_kv, *base_mva, std::move(buses), std::move(branches));
}

inline NetworkCase load_case_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open case file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_case(ss.str());
}

inline std::string serialize_case(const NetworkCase& c) {
  std::ostringstream out;
  out << "base_kv=" << fmt::num(c.base_kv()) << " base_mva=" << fmt::num(c.base_mva()) << "\n";
  out << "[bus]\n# id kind p_kw q_kvar umin_pu umax_pu\n";
  for (const auto& b : c.buses())
    out << b.id << ' ' << (b.kind == BusKind::swing ? "swing" : "load") << ' ' << fmt::num(b.p_load_kw) << ' '
        << fmt::num(b.q_load_kvar) << ' ' << fmt::num(b.u_min) << ' ' << fmt::num(b.u_max) << '\n';
  out << "[branch]\n# id from to r_ohm x_ohm s_rated_kva\n";
  for (const auto& br : c.branches())
    out << br.id << ' ' << br.from_bus << ' ' << br.to_bus << ' ' << fmt::num(br.r_ohm) << ' ' << fmt::num(br.x_ohm)
        << ' ' << fmt::num(br.s_rated_kva) << '\n';
  return out.str();
}

}  // namespace dgplan
