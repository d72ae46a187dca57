#pragma once

// Run configuration: a single JSON document. Command-line flags override
// file values, and file values override the defaults below. Unknown keys are
// rejected at every level.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crnq/ctmc.hpp"
#include "crnq/error.hpp"
#include "crnq/model.hpp"
#include "crnq/sim/types.hpp"
#include "crnq/synthesis.hpp"

namespace crnq::config {

using json = nlohmann::ordered_json;

struct PuSpec {
  // Exactly one of lambda / per_channel_lambda is given.
  std::optional<double> lambda;
  std::vector<double> per_channel_lambda;
  double mu = 1.0;

  bool operator==(const PuSpec&) const = default;
};

struct SuSpec {
  double lambda = 0.0;
  // Exactly one of mu / access is given.
  std::optional<double> mu;
  std::optional<AccessTiming> access;

  bool operator==(const SuSpec&) const = default;
};

struct ModelSpec {
  int n_servers = 1;
  PuSpec pu;
  SuSpec su;

  bool operator==(const ModelSpec&) const = default;
};

struct TruncationConfig {
  double tail_tolerance = 1e-12;
  int cap = 16384;
  double residual_tolerance = 1e-10;

  bool operator==(const TruncationConfig&) const = default;
};

// Thresholds in seconds, or as interval endpoints: th_pu_alpha = a places
// Th_PU at a*A + (1-a)*B, th_su_alpha = a places Th_SU at a*C + (1-a)*D.
struct ThresholdSpec {
  std::optional<double> th_pu;
  std::optional<double> th_su;
  std::optional<double> th_pu_alpha;
  std::optional<double> th_su_alpha;

  bool operator==(const ThresholdSpec&) const = default;
};

struct TargetSpec {
  double w_pu = 0.0;
  double w_su = 0.0;

  bool operator==(const TargetSpec&) const = default;
};

struct SweepSpec {
  double rho_pu_from = 0.0;
  double rho_pu_to = 0.0;
  int points = 1;

  bool operator==(const SweepSpec&) const = default;
};

struct CoupledConfig {
  // Empty: a single station carrying the whole SU stream.
  std::vector<sim::StationSpec> su_stations;
  bool compare_decoupled = true;

  bool operator==(const CoupledConfig&) const = default;
};

struct SimulationSpec {
  bool enabled = true;
  std::uint64_t seed = 1;
  sim::Topology topology = sim::Topology::Decoupled;
  std::uint64_t measured_departures = 100'000;
  std::optional<std::uint64_t> warmup_departures;  // default: measured / 5
  int replications = 10;
  std::uint64_t event_budget = 0;
  bool emit_event_log = false;
  CoupledConfig coupled;

  bool operator==(const SimulationSpec&) const = default;
};

struct RunConfig {
  ModelSpec model;
  std::optional<SensingConfig> sensing;
  std::optional<ImperfectionConfig> imperfections;
  TruncationConfig truncation;
  std::optional<ThresholdSpec> thresholds;
  std::optional<TargetSpec> target;
  std::optional<SweepSpec> sweep;
  SimulationSpec simulation;
  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

// ---- parsing helpers --------------------------------------------------------

namespace detail {

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  require_object(j, where);
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline double required_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return number(j.at(key), where + "." + key);
}

inline std::optional<double> optional_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return number(j.at(key), where + "." + key);
}

inline std::uint64_t unsigned_integer(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

}  // namespace detail

inline ModelSpec model_from_json(const json& j) {
  using namespace detail;
  check_keys(j, "model", {"n_servers", "pu", "su"});
  ModelSpec m;
  if (!j.contains("n_servers")) throw ConfigError("model: missing 'n_servers'");
  m.n_servers = integer(j.at("n_servers"), "model.n_servers");

  if (!j.contains("pu")) throw ConfigError("model: missing 'pu'");
  const json& pu = j.at("pu");
  check_keys(pu, "model.pu", {"lambda", "per_channel_lambda", "mu"});
  m.pu.mu = required_number(pu, "mu", "model.pu");
  m.pu.lambda = optional_number(pu, "lambda", "model.pu");
  if (pu.contains("per_channel_lambda")) {
    const json& arr = pu.at("per_channel_lambda");
    if (!arr.is_array()) throw ConfigError("model.pu.per_channel_lambda: expected an array");
    for (const auto& x : arr) m.pu.per_channel_lambda.push_back(number(x, "model.pu.per_channel_lambda"));
  }
  if (m.pu.lambda.has_value() == pu.contains("per_channel_lambda"))
    throw ConfigError("model.pu: give exactly one of 'lambda' or 'per_channel_lambda'");

  if (!j.contains("su")) throw ConfigError("model: missing 'su'");
  const json& su = j.at("su");
  check_keys(su, "model.su", {"lambda", "mu", "access"});
  m.su.lambda = required_number(su, "lambda", "model.su");
  m.su.mu = optional_number(su, "mu", "model.su");
  if (su.contains("access")) {
    const json& a = su.at("access");
    check_keys(a, "model.su.access", {"d_access", "t_s"});
    m.su.access = AccessTiming{required_number(a, "d_access", "model.su.access"),
                               required_number(a, "t_s", "model.su.access")};
  }
  if (m.su.mu.has_value() == m.su.access.has_value())
    throw ConfigError("model.su: give exactly one of 'mu' or 'access'");
  return m;
}

inline json to_json(const ModelSpec& m) {
  json pu = json::object();
  if (m.pu.lambda) pu["lambda"] = *m.pu.lambda;
  else pu["per_channel_lambda"] = m.pu.per_channel_lambda;
  pu["mu"] = m.pu.mu;
  json su{{"lambda", m.su.lambda}};
  if (m.su.mu) su["mu"] = *m.su.mu;
  if (m.su.access) su["access"] = {{"d_access", m.su.access->d_access}, {"t_s", m.su.access->t_s}};
  return json{{"n_servers", m.n_servers}, {"pu", pu}, {"su", su}};
}

inline const char* topology_name(sim::Topology t) {
  return t == sim::Topology::Decoupled ? "decoupled" : "coupled";
}

inline RunConfig from_json(const json& j) {
  using namespace detail;
  check_keys(j, "config", {"model", "sensing", "imperfections", "truncation", "thresholds", "target",
                           "sweep", "simulation", "output"});
  RunConfig c;
  if (!j.contains("model")) throw ConfigError("config: missing 'model'");
  c.model = model_from_json(j.at("model"));

  if (j.contains("sensing")) {
    const json& s = j.at("sensing");
    check_keys(s, "sensing", {"delta_t", "t_period"});
    c.sensing = SensingConfig{required_number(s, "delta_t", "sensing"),
                              required_number(s, "t_period", "sensing")};
  }
  if (j.contains("imperfections")) {
    const json& s = j.at("imperfections");
    check_keys(s, "imperfections", {"p_d", "per_pu", "per_su"});
    c.imperfections = ImperfectionConfig{required_number(s, "p_d", "imperfections"),
                                         required_number(s, "per_pu", "imperfections"),
                                         required_number(s, "per_su", "imperfections")};
  }
  if (j.contains("truncation")) {
    const json& t = j.at("truncation");
    check_keys(t, "truncation", {"tail_tolerance", "cap", "residual_tolerance"});
    if (t.contains("tail_tolerance")) c.truncation.tail_tolerance = number(t.at("tail_tolerance"), "truncation.tail_tolerance");
    if (t.contains("cap")) c.truncation.cap = integer(t.at("cap"), "truncation.cap");
    if (t.contains("residual_tolerance"))
      c.truncation.residual_tolerance = number(t.at("residual_tolerance"), "truncation.residual_tolerance");
  }
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    check_keys(t, "thresholds", {"th_pu", "th_su", "th_pu_alpha", "th_su_alpha"});
    ThresholdSpec th;
    th.th_pu = optional_number(t, "th_pu", "thresholds");
    th.th_su = optional_number(t, "th_su", "thresholds");
    th.th_pu_alpha = optional_number(t, "th_pu_alpha", "thresholds");
    th.th_su_alpha = optional_number(t, "th_su_alpha", "thresholds");
    if (th.th_pu.has_value() == th.th_pu_alpha.has_value())
      throw ConfigError("thresholds: give exactly one of 'th_pu' or 'th_pu_alpha'");
    if (th.th_su.has_value() == th.th_su_alpha.has_value())
      throw ConfigError("thresholds: give exactly one of 'th_su' or 'th_su_alpha'");
    c.thresholds = th;
  }
  if (j.contains("target")) {
    const json& t = j.at("target");
    check_keys(t, "target", {"w_pu", "w_su"});
    c.target = TargetSpec{required_number(t, "w_pu", "target"), required_number(t, "w_su", "target")};
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, "sweep", {"rho_pu_from", "rho_pu_to", "points"});
    c.sweep = SweepSpec{required_number(s, "rho_pu_from", "sweep"), required_number(s, "rho_pu_to", "sweep"),
                        s.contains("points") ? integer(s.at("points"), "sweep.points") : 10};
    if (c.sweep->points < 1) throw ConfigError("sweep.points must be at least 1");
  }
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    check_keys(s, "simulation", {"enabled", "seed", "topology", "measured_departures", "warmup_departures",
                                 "replications", "event_budget", "emit_event_log", "coupled"});
    auto& sim = c.simulation;
    if (s.contains("enabled")) sim.enabled = boolean(s.at("enabled"), "simulation.enabled");
    if (s.contains("seed")) sim.seed = unsigned_integer(s.at("seed"), "simulation.seed");
    if (s.contains("topology")) {
      const json& t = s.at("topology");
      if (t == "decoupled") sim.topology = sim::Topology::Decoupled;
      else if (t == "coupled") sim.topology = sim::Topology::Coupled;
      else throw ConfigError("simulation.topology: expected \"decoupled\" or \"coupled\"");
    }
    if (s.contains("measured_departures"))
      sim.measured_departures = unsigned_integer(s.at("measured_departures"), "simulation.measured_departures");
    if (s.contains("warmup_departures"))
      sim.warmup_departures = unsigned_integer(s.at("warmup_departures"), "simulation.warmup_departures");
    if (s.contains("replications")) sim.replications = integer(s.at("replications"), "simulation.replications");
    if (s.contains("event_budget")) sim.event_budget = unsigned_integer(s.at("event_budget"), "simulation.event_budget");
    if (s.contains("emit_event_log")) sim.emit_event_log = boolean(s.at("emit_event_log"), "simulation.emit_event_log");
    if (s.contains("coupled")) {
      const json& cj = s.at("coupled");
      check_keys(cj, "simulation.coupled", {"su_stations", "compare_decoupled"});
      if (cj.contains("su_stations")) {
        const json& arr = cj.at("su_stations");
        if (!arr.is_array()) throw ConfigError("simulation.coupled.su_stations: expected an array");
        for (const auto& st : arr) {
          check_keys(st, "simulation.coupled.su_stations[]", {"lambda", "mu"});
          sim.coupled.su_stations.push_back({required_number(st, "lambda", "su_stations[]"),
                                             required_number(st, "mu", "su_stations[]")});
        }
      }
      if (cj.contains("compare_decoupled"))
        sim.coupled.compare_decoupled = boolean(cj.at("compare_decoupled"), "simulation.coupled.compare_decoupled");
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, "output", {"dir"});
    if (o.contains("dir")) {
      if (!o.at("dir").is_string()) throw ConfigError("output.dir: expected a string");
      c.output_dir = o.at("dir").get<std::string>();
    }
  }
  return c;
}

inline json to_json(const RunConfig& c) {
  json j{{"model", to_json(c.model)}};
  if (c.sensing) j["sensing"] = {{"delta_t", c.sensing->delta_t}, {"t_period", c.sensing->t_period}};
  if (c.imperfections)
    j["imperfections"] = {{"p_d", c.imperfections->p_d},
                          {"per_pu", c.imperfections->per_pu},
                          {"per_su", c.imperfections->per_su}};
  j["truncation"] = {{"tail_tolerance", c.truncation.tail_tolerance},
                     {"cap", c.truncation.cap},
                     {"residual_tolerance", c.truncation.residual_tolerance}};
  if (c.thresholds) {
    json t = json::object();
    if (c.thresholds->th_pu) t["th_pu"] = *c.thresholds->th_pu;
    if (c.thresholds->th_pu_alpha) t["th_pu_alpha"] = *c.thresholds->th_pu_alpha;
    if (c.thresholds->th_su) t["th_su"] = *c.thresholds->th_su;
    if (c.thresholds->th_su_alpha) t["th_su_alpha"] = *c.thresholds->th_su_alpha;
    j["thresholds"] = t;
  }
  if (c.target) j["target"] = {{"w_pu", c.target->w_pu}, {"w_su", c.target->w_su}};
  if (c.sweep)
    j["sweep"] = {{"rho_pu_from", c.sweep->rho_pu_from}, {"rho_pu_to", c.sweep->rho_pu_to}, {"points", c.sweep->points}};
  const auto& s = c.simulation;
  json sim{{"enabled", s.enabled},
           {"seed", s.seed},
           {"topology", topology_name(s.topology)},
           {"measured_departures", s.measured_departures}};
  if (s.warmup_departures) sim["warmup_departures"] = *s.warmup_departures;
  sim["replications"] = s.replications;
  sim["event_budget"] = s.event_budget;
  sim["emit_event_log"] = s.emit_event_log;
  json stations = json::array();
  for (const auto& st : s.coupled.su_stations) stations.push_back({{"lambda", st.lambda}, {"mu", st.mu}});
  sim["coupled"] = {{"su_stations", stations}, {"compare_decoupled", s.coupled.compare_decoupled}};
  j["simulation"] = sim;
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

inline RunConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

// ---- resolution to library types ---------------------------------------------

// Base model before any refinement transform.
inline NetworkModel base_model(const ModelSpec& m) {
  const double lambda_pu = m.pu.lambda ? *m.pu.lambda : aggregate_primary(m.pu.per_channel_lambda);
  if (!m.pu.lambda && static_cast<int>(m.pu.per_channel_lambda.size()) != m.n_servers)
    throw ConfigError("model.pu.per_channel_lambda must list one rate per server");
  const double mu_su = m.su.mu ? *m.su.mu : service_rate_from_access(*m.su.access);
  return NetworkModel(m.n_servers, ClassParams(lambda_pu, m.pu.mu), ClassParams(m.su.lambda, mu_su));
}

// Aggregation, then access timing, then sensing, then imperfections.
inline NetworkModel resolve_model(const RunConfig& c) {
  NetworkModel model = base_model(c.model);
  if (c.sensing) model = apply_sensing(model, *c.sensing);
  if (c.imperfections) model = apply_imperfections(model, *c.imperfections);
  return model;
}

// The same configuration with the PU load set to rho_pu (mu_pu held fixed).
inline RunConfig with_rho_pu(RunConfig c, double rho_pu) {
  c.model.pu.lambda = rho_pu * c.model.pu.mu;
  c.model.pu.per_channel_lambda.clear();
  return c;
}

inline std::vector<double> sweep_points(const SweepSpec& s) {
  std::vector<double> out;
  if (s.points == 1) return {s.rho_pu_from};
  for (int k = 0; k < s.points; ++k)
    out.push_back(k + 1 == s.points ? s.rho_pu_to
                                    : s.rho_pu_from + (s.rho_pu_to - s.rho_pu_from) * k / (s.points - 1));
  return out;
}

inline AutoTruncationOptions truncation_options(const RunConfig& c) {
  AutoTruncationOptions o;
  o.tail_tolerance = c.truncation.tail_tolerance;
  o.cap = c.truncation.cap;
  o.solver.residual_tolerance = c.truncation.residual_tolerance;
  return o;
}

inline sim::SimConfig sim_config(const RunConfig& c) {
  const auto& s = c.simulation;
  sim::SimConfig out;
  out.seed = s.seed;
  out.topology = s.topology;
  out.measured_departures = s.measured_departures;
  out.warmup_departures = s.warmup_departures ? *s.warmup_departures : s.measured_departures / 5;
  out.replications = s.replications;
  out.event_budget = s.event_budget;
  return out;
}

// Coupled topology derived from the resolved model: per-channel PU rates come
// from the config when listed, otherwise the aggregate is split evenly.
inline sim::CoupledSpec coupled_spec(const RunConfig& c, const NetworkModel& resolved) {
  sim::CoupledSpec spec;
  spec.mu_pu = resolved.pu().mu();
  if (!c.model.pu.per_channel_lambda.empty()) {
    spec.per_channel_pu_lambda = c.model.pu.per_channel_lambda;
  } else {
    spec.per_channel_pu_lambda.assign(static_cast<std::size_t>(resolved.n_servers()),
                                      resolved.pu().lambda() / resolved.n_servers());
  }
  if (c.simulation.coupled.su_stations.empty()) {
    spec.su_stations.push_back({resolved.su().lambda(), resolved.su().mu()});
  } else {
    spec.su_stations = c.simulation.coupled.su_stations;
  }
  return spec;
}

inline Thresholds resolve_thresholds(const ThresholdSpec& t, const RegionVertices& v) {
  auto in_unit = [](double a, const char* name) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError(std::string("thresholds.") + name + " must lie in [0, 1]");
    return a;
  };
  Thresholds th{};
  th.th_pu = t.th_pu ? *t.th_pu : in_unit(*t.th_pu_alpha, "th_pu_alpha") * v.a + (1.0 - *t.th_pu_alpha) * v.b;
  th.th_su = t.th_su ? *t.th_su : in_unit(*t.th_su_alpha, "th_su_alpha") * v.c + (1.0 - *t.th_su_alpha) * v.d;
  return th;
}

}  // namespace crnq::config
