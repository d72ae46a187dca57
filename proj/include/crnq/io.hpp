#pragma once

// CSV and JSON encodings of library results, and atomic file output.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crnq/conservation.hpp"
#include "crnq/ctmc.hpp"
#include "crnq/error.hpp"
#include "crnq/optimize.hpp"
#include "crnq/sim/types.hpp"
#include "crnq/synthesis.hpp"

namespace crnq::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kCsvVersionLine = "# crn-queues v1";

// Shortest round-trip decimal form.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline json number_or_null(const std::optional<double>& x) {
  return x ? number_or_null(*x) : json(nullptr);
}

// Writes to a sibling temporary and renames it over the destination.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Config, "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Config, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Output files are staged in memory and committed together.
class OutputSet {
 public:
  void add(std::string name, std::string content) {
    files_.emplace_back(std::move(name), std::move(content));
  }

  void commit(const std::filesystem::path& dir) const {
    for (const auto& [name, content] : files_) write_file_atomic(dir / name, content);
  }

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

// ---- CSV ------------------------------------------------------------------

inline std::string joint_pmf_csv(const JointPmf& pmf) {
  std::string out = std::string(kCsvVersionLine) + "\ni,j,p\n";
  out.reserve(out.size() + pmf.probabilities().size() * 24);
  for (int i = 0; i < pmf.rows(); ++i)
    for (int j = 0; j < pmf.cols(); ++j) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(j);
      out += ',';
      out += fmt(pmf.at(i, j));
      out += '\n';
    }
  return out;
}

inline std::string marginal_csv(const std::vector<double>& pmf, const std::string& index_name) {
  std::string out = std::string(kCsvVersionLine) + "\n" + index_name + ",p\n";
  for (std::size_t k = 0; k < pmf.size(); ++k) out += std::to_string(k) + "," + fmt(pmf[k]) + "\n";
  return out;
}

inline std::string cost_curve_csv(const std::vector<CostSample>& samples) {
  std::string out = std::string(kCsvVersionLine) + "\nalpha,cost\n";
  for (const auto& s : samples) out += fmt(s.alpha) + "," + fmt(s.cost) + "\n";
  return out;
}

inline std::string region_csv(const std::vector<std::pair<std::string, MixedWaiting>>& corners) {
  std::string out = std::string(kCsvVersionLine) + "\nkind,w_pu,w_su\n";
  for (const auto& [kind, w] : corners) out += kind + "," + fmt(w.w_pu_mix) + "," + fmt(w.w_su_mix) + "\n";
  return out;
}

inline std::string event_log_csv(const std::vector<sim::EventRecord>& log) {
  std::string out = std::string(kCsvVersionLine) +
                    "\ntime,event,class,channel,pu_in_system,su_in_system,pu_busy,su_busy\n";
  for (const auto& e : log) {
    out += fmt(e.time) + "," + sim::to_string(e.kind) + "," + std::to_string(e.cls) + "," +
           std::to_string(e.channel) + "," + std::to_string(e.pu_in_system) + "," +
           std::to_string(e.su_in_system) + "," + std::to_string(e.pu_busy) + "," +
           std::to_string(e.su_busy) + "\n";
  }
  return out;
}

// Parses the i,j,p body of a joint-PMF CSV (version line and header included).
inline std::vector<std::tuple<int, int, double>> parse_joint_pmf_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvVersionLine)
    throw ConfigError("joint PMF CSV: missing version line");
  if (!std::getline(in, line) || line != "i,j,p") throw ConfigError("joint PMF CSV: bad header");
  std::vector<std::tuple<int, int, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ConfigError("joint PMF CSV: malformed row '" + line + "'");
    rows.emplace_back(std::stoi(line.substr(0, c1)), std::stoi(line.substr(c1 + 1, c2 - c1 - 1)),
                      std::stod(line.substr(c2 + 1)));
  }
  return rows;
}

// ---- JSON -----------------------------------------------------------------

inline json to_json(const NetworkModel& m) {
  const auto u = utilization(m);
  return json{{"n_servers", m.n_servers()},
              {"pu", {{"lambda", m.pu().lambda()}, {"mu", m.pu().mu()}}},
              {"su", {{"lambda", m.su().lambda()}, {"mu", m.su().mu()}}},
              {"rho_pu", u.rho_pu},
              {"rho_su", u.rho_su},
              {"rho_total", u.rho_total},
              {"stable", check_stability(m).stable}};
}

inline json to_json(const TruncationSpec& t) {
  return json{{"i_max", t.i_max}, {"j_max", t.j_max}, {"tail_tolerance", t.tail_tolerance}};
}

inline json to_json(const JointPmf& pmf, bool include_probabilities = true) {
  json j{{"model", to_json(pmf.model())},
         {"truncation", to_json(pmf.truncation())},
         {"achieved_tail_mass", pmf.achieved_tail_mass()},
         {"residual", pmf.residual()},
         {"indexing", "row-major, i (PU) then j (SU)"}};
  if (include_probabilities) {
    json rows = json::array();
    for (int i = 0; i < pmf.rows(); ++i) {
      json row = json::array();
      for (int jj = 0; jj < pmf.cols(); ++jj) row.push_back(pmf.at(i, jj));
      rows.push_back(std::move(row));
    }
    j["probabilities"] = std::move(rows);
  }
  return j;
}

inline const char* to_string(Ordering o) {
  return o == Ordering::PuPriority ? "pu_priority" : "su_priority";
}

inline json to_json(const PerformanceVector& v) {
  return json{{"ordering", to_string(v.ordering)},
              {"d_pu", v.d_pu},
              {"d_su", v.d_su},
              {"w_pu", v.w_pu},
              {"w_su", v.w_su}};
}

inline json to_json(const RegionVertices& v) {
  return json{{"a", v.a}, {"b", v.b}, {"c", v.c}, {"d", v.d}};
}

inline json to_json(const FeasibleInterval& iv) {
  return json{{"a1", iv.a1}, {"a2", iv.a2}, {"feasible", iv.feasible}, {"boundary", iv.boundary}};
}

inline json to_json(const FrontierPoint& fp) {
  return json{{"eta", fp.eta},
              {"slope_m_prime", fp.slope_m_prime},
              {"excess_delay_pu", number_or_null(fp.excess_delay_pu)}};
}

inline const char* to_string(Clamp c) {
  switch (c) {
    case Clamp::Lower: return "lower";
    case Clamp::Upper: return "upper";
    case Clamp::Interior: return "interior";
  }
  return "interior";
}

inline json to_json(const OptimalMix& m) {
  return json{{"alpha_min", m.alpha_min},
              {"beta", m.beta_unconstrained},
              {"cost_at_min", m.cost_at_min},
              {"clamped", to_string(m.clamped)}};
}

inline json to_json(const sim::Metric& m) {
  return json{{"mean", number_or_null(m.mean)}, {"ci_halfwidth", number_or_null(m.ci_halfwidth)}};
}

inline const char* to_string(sim::Topology t) {
  return t == sim::Topology::Decoupled ? "decoupled" : "coupled";
}

inline json to_json(const sim::SimEstimate& e) {
  json j{{"topology", to_string(e.topology)},
         {"seed", e.seed},
         {"replications", e.replications},
         {"measured_departures", e.measured_departures},
         {"events_processed", e.events_processed},
         {"rates",
          {{"lambda_pu", e.lambda_pu},
           {"mu_pu", e.mu_pu},
           {"lambda_su", e.lambda_su},
           {"mu_su", e.mu_su}}},
         {"d_pu", to_json(e.d_pu)},
         {"d_su", to_json(e.d_su)},
         {"w_pu", to_json(e.w_pu)},
         {"w_su", to_json(e.w_su)},
         {"mean_q_pu", to_json(e.mean_q_pu)},
         {"mean_q_su", to_json(e.mean_q_su)}};
  if (!e.d_su_per_station.empty()) {
    json st = json::array();
    for (const auto& m : e.d_su_per_station) st.push_back(to_json(m));
    j["d_su_per_station"] = std::move(st);
  }
  json runs = json::array();
  for (const auto& r : e.runs)
    runs.push_back(json{{"d_pu", number_or_null(r.d_pu)},
                        {"d_su", number_or_null(r.d_su)},
                        {"mean_q_pu", r.mean_q_pu},
                        {"mean_q_su", r.mean_q_su},
                        {"departures_pu", r.departures_pu},
                        {"departures_su", r.departures_su},
                        {"events", r.events},
                        {"window", r.window}});
  j["replication_results"] = std::move(runs);
  return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace crnq::io
