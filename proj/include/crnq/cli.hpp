#pragma once

// Command-line front end. Each command computes everything first and then
// writes its files atomically into the output directory.
//
// Exit codes: 0 success (an infeasible synthesis is an answer, not a
// failure), 1 usage or parse error, 2 unstable model, 3 truncation cap
// exceeded, 4 simulation event budget exceeded.

#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crnq/config.hpp"
#include "crnq/conservation.hpp"
#include "crnq/ctmc.hpp"
#include "crnq/io.hpp"
#include "crnq/mmn.hpp"
#include "crnq/optimize.hpp"
#include "crnq/sim/replicate.hpp"
#include "crnq/synthesis.hpp"

namespace crnq::cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitUnstable = 2;
inline constexpr int kExitTruncation = 3;
inline constexpr int kExitSimBudget = 4;

inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Instability: return kExitUnstable;
    case ErrorCode::TruncationCap: return kExitTruncation;
    case ErrorCode::SimBudget: return kExitSimBudget;
    default: return kExitUsage;
  }
}

struct Options {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool no_sim = false;
  bool emit_event_log = false;
};

// Flags take precedence over file values.
inline void apply_overrides(config::RunConfig& cfg, const Options& opt) {
  if (opt.out_dir) cfg.output_dir = *opt.out_dir;
  if (opt.seed) cfg.simulation.seed = *opt.seed;
  if (opt.no_sim) cfg.simulation.enabled = false;
  if (opt.emit_event_log) cfg.simulation.emit_event_log = true;
}

inline double relative_error(double estimate, double reference) {
  return std::abs(estimate - reference) / std::abs(reference);
}

inline double nan_if_empty(const std::optional<double>& x) {
  return x ? *x : std::numeric_limits<double>::quiet_NaN();
}

// Smallest index whose cumulative probability reaches q.
inline int quantile_index(const std::vector<double>& pmf, double q) {
  double c = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    c += pmf[k];
    if (c >= q) return static_cast<int>(k);
  }
  return static_cast<int>(pmf.size()) - 1;
}

// ---- analysis shared by analyze and sweep ------------------------------------

struct PointAnalysis {
  NetworkModel model;
  JointPmf pmf;
  ClassDelays ctmc;
  std::optional<double> d_pu_mmn;
  std::optional<double> d_su_law;
  double weighted_sum_ctmc;
  double weighted_sum_law;
};

inline PointAnalysis analyze_point(const config::RunConfig& cfg) {
  const NetworkModel model = config::resolve_model(cfg);
  require_stable(model);
  JointPmf pmf = solve_with_auto_truncation(model, config::truncation_options(cfg));
  const ClassDelays d = delays_from_pmf(pmf);
  std::optional<double> d_pu_mmn;
  std::optional<double> d_su_law;
  if (model.pu().lambda() > 0.0) d_pu_mmn = mmn_total_delay(model.pu(), model.n_servers());
  if (model.su().lambda() > 0.0) d_su_law = secondary_delay_from_law(model);
  // rho_i D_i = L_i / mu_i by Little's law, which also covers empty classes.
  const double ws_ctmc = d.mean_q_pu / model.pu().mu() + d.mean_q_su / model.su().mu();
  return {model, std::move(pmf), d, d_pu_mmn, d_su_law, ws_ctmc, conservation_sum(model)};
}

inline json relative_or_null(const std::optional<double>& est, const std::optional<double>& ref) {
  if (!est || !ref || *ref == 0.0) return nullptr;
  return relative_error(*est, *ref);
}

inline json analysis_json(const PointAnalysis& a) {
  const auto m = marginals(a.pmf);
  const double ws_rel = a.weighted_sum_law > 0.0 ? relative_error(a.weighted_sum_ctmc, a.weighted_sum_law)
                                                 : std::abs(a.weighted_sum_ctmc);
  return json{
      {"model", io::to_json(a.model)},
      {"truncation", io::to_json(a.pmf.truncation())},
      {"achieved_tail_mass", a.pmf.achieved_tail_mass()},
      {"residual", a.pmf.residual()},
      {"delays",
       {{"ctmc",
         {{"d_pu", io::number_or_null(a.ctmc.d_pu)},
          {"d_su", io::number_or_null(a.ctmc.d_su)},
          {"mean_q_pu", a.ctmc.mean_q_pu},
          {"mean_q_su", a.ctmc.mean_q_su}}},
        {"conservation_law", {{"d_su", io::number_or_null(a.d_su_law)}}},
        {"mmn", {{"d_pu", io::number_or_null(a.d_pu_mmn)}}}}},
      {"weighted_sum", {{"ctmc", a.weighted_sum_ctmc}, {"conservation_law", a.weighted_sum_law}}},
      {"relative_errors",
       {{"weighted_sum_law_vs_ctmc", ws_rel},
        {"d_su_law_vs_ctmc", relative_or_null(a.d_su_law, a.ctmc.d_su)},
        {"d_pu_mmn_vs_ctmc", relative_or_null(a.d_pu_mmn, a.ctmc.d_pu)}}},
      {"quantile_999_index", {{"pu", quantile_index(m.pu, 0.999)}, {"su", quantile_index(m.su, 0.999)}}}};
}

// ---- commands -------------------------------------------------------------------

struct CommandResult {
  int exit_code = kExitOk;
  io::OutputSet files;
  std::vector<std::string> notes;
};

inline json report_header(const char* command, const config::RunConfig& cfg) {
  return json{{"command", command}, {"format", "crn-queues v1"}, {"config", config::to_json(cfg)}};
}

inline CommandResult cmd_analyze(const config::RunConfig& cfg) {
  CommandResult r;
  const PointAnalysis a = analyze_point(cfg);
  const auto m = marginals(a.pmf);
  json report = report_header("analyze", cfg);
  report.update(analysis_json(a));
  r.files.add("report.json", io::dump(report));
  r.files.add("joint_pmf.csv", io::joint_pmf_csv(a.pmf));
  r.files.add("joint_pmf.json", io::dump(io::to_json(a.pmf)));
  r.files.add("pu_marginal.csv", io::marginal_csv(m.pu, "i"));
  r.files.add("su_marginal.csv", io::marginal_csv(m.su, "j"));
  r.notes.push_back("truncation " + std::to_string(a.pmf.truncation().i_max) + " x " +
                    std::to_string(a.pmf.truncation().j_max) + ", tail mass " +
                    io::fmt(a.pmf.achieved_tail_mass()));
  return r;
}

inline sim::ReplicationOptions replication_options(const sim::SimConfig& s) {
  sim::ReplicationOptions o;
  o.require_ci = s.replications >= 2;
  return o;
}

inline CommandResult cmd_sweep(const config::RunConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep: the config has no 'sweep' section");
  CommandResult r;
  const bool with_sim = cfg.simulation.enabled;
  std::string csv = std::string(io::kCsvVersionLine) +
                    "\nrho_pu,status,d_pu_law,d_su_law,d_pu_ctmc,d_su_ctmc,weighted_sum_law,"
                    "weighted_sum_ctmc,weighted_sum_rel_err,d_pu_sim,d_pu_ci,d_su_sim,d_su_ci\n";
  json rows = json::array();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  for (double rho : config::sweep_points(*cfg.sweep)) {
    const config::RunConfig point = config::with_rho_pu(cfg, rho);
    std::string status = "ok";
    double d_pu_law = nan, d_su_law = nan, d_pu_ctmc = nan, d_su_ctmc = nan;
    double ws_law = nan, ws_ctmc = nan, ws_rel = nan;
    sim::Metric sim_pu, sim_su;
    json row{{"rho_pu", rho}};
    try {
      const PointAnalysis a = analyze_point(point);
      row.update(analysis_json(a));
      d_pu_law = nan_if_empty(a.d_pu_mmn);
      d_su_law = nan_if_empty(a.d_su_law);
      d_pu_ctmc = nan_if_empty(a.ctmc.d_pu);
      d_su_ctmc = nan_if_empty(a.ctmc.d_su);
      ws_law = a.weighted_sum_law;
      ws_ctmc = a.weighted_sum_ctmc;
      ws_rel = relative_error(ws_ctmc, ws_law);
      if (with_sim) {
        const auto scfg = config::sim_config(point);
        const auto est = sim::run_decoupled(a.model, scfg, replication_options(scfg));
        sim_pu = est.d_pu;
        sim_su = est.d_su;
        row["simulation"] = {{"d_pu", io::to_json(est.d_pu)},
                             {"d_su", io::to_json(est.d_su)},
                             {"little_law_ok", sim::little_law_check(est).ok}};
      }
    } catch (const Error& e) {
      status = e.code() == ErrorCode::Instability     ? "unstable"
               : e.code() == ErrorCode::TruncationCap ? "truncation_cap"
               : e.code() == ErrorCode::SimBudget     ? "sim_budget"
                                                      : "error";
      row["error"] = e.what();
      if (r.exit_code == kExitOk) r.exit_code = exit_code_for(e);
    }
    row["status"] = status;
    rows.push_back(std::move(row));
    csv += io::fmt(rho) + "," + status + "," + io::fmt(d_pu_law) + "," + io::fmt(d_su_law) + "," +
           io::fmt(d_pu_ctmc) + "," + io::fmt(d_su_ctmc) + "," + io::fmt(ws_law) + "," + io::fmt(ws_ctmc) +
           "," + io::fmt(ws_rel) + "," + io::fmt(sim_pu.mean) + "," + io::fmt(sim_pu.ci_halfwidth) + "," +
           io::fmt(sim_su.mean) + "," + io::fmt(sim_su.ci_halfwidth) + "\n";
  }

  json report = report_header("sweep", cfg);
  report["points"] = std::move(rows);
  const auto& pts = report["points"];
  if (pts.size() >= 2 && pts.front()["status"] == "ok" && pts.back()["status"] == "ok") {
    const auto& first = pts.front()["delays"]["ctmc"];
    const auto& last = pts.back()["delays"]["ctmc"];
    json ratios = json::object();
    if (first["d_pu"].is_number() && last["d_pu"].is_number())
      ratios["d_pu"] = last["d_pu"].get<double>() / first["d_pu"].get<double>();
    if (first["d_su"].is_number() && last["d_su"].is_number())
      ratios["d_su"] = last["d_su"].get<double>() / first["d_su"].get<double>();
    report["ctmc_end_to_end_ratio"] = std::move(ratios);
  }
  report["failed"] = r.exit_code != kExitOk;
  r.files.add("sweep.csv", csv);
  r.files.add("sweep.json", io::dump(report));
  if (r.exit_code != kExitOk) r.notes.push_back("one or more sweep points failed; see the status column");
  return r;
}

struct SynthesisOutcome {
  json body;
  RegionVertices vertices;
  FeasibleInterval interval;
};

inline SynthesisOutcome synthesize(const config::RunConfig& cfg) {
  const NetworkModel model = config::resolve_model(cfg);
  require_stable(model);
  if (!cfg.thresholds) throw ConfigError("the config has no 'thresholds' section");
  const RegionVertices v = region_vertices(model);
  const Thresholds th = config::resolve_thresholds(*cfg.thresholds, v);
  const FeasibleInterval iv = feasible_interval(v, th);

  json body{{"model", io::to_json(model)},
            {"vertices", io::to_json(v)},
            {"thresholds", {{"th_pu", th.th_pu}, {"th_su", th.th_su}}},
            {"interval", io::to_json(iv)},
            {"feasible", iv.feasible}};
  if (th.th_pu >= v.a && th.th_pu <= v.b) {
    body["frontier"] = io::to_json(frontier_point(v, th));
  } else {
    body["frontier"] = nullptr;
    body["frontier_note"] = th.th_pu < v.a ? "Th_PU below A: no mix meets the PU constraint"
                                           : "Th_PU above B: the PU constraint does not bind";
  }
  if (!iv.feasible) {
    if (th.th_su <= v.d) {
      body["suggestion"] = "relax th_su";
      body["suggestion_detail"] = "Th_SU must exceed D = " + io::fmt(v.d);
    } else {
      // The SU threshold is below the frontier: only a looser PU threshold helps.
      const double min_th_pu = v.b - (std::min(th.th_su, v.c) - v.d) * (v.b - v.a) / (v.c - v.d);
      body["suggestion"] = "relax th_pu";
      body["suggestion_detail"] = "Th_PU must exceed " + io::fmt(min_th_pu);
    }
  }
  if (cfg.target) {
    const auto t = unique_alpha_for_target(v, cfg.target->w_pu, cfg.target->w_su);
    body["target"] = {{"w_pu", cfg.target->w_pu},
                      {"w_su", cfg.target->w_su},
                      {"on_segment", t.on_segment},
                      {"alpha", io::number_or_null(t.alpha)},
                      {"alpha_from_pu", io::number_or_null(t.alpha_pu)},
                      {"alpha_from_su", io::number_or_null(t.alpha_su)}};
  }
  return {std::move(body), v, iv};
}

inline CommandResult cmd_synthesize(const config::RunConfig& cfg) {
  CommandResult r;
  auto s = synthesize(cfg);
  json report = report_header("synthesize", cfg);
  report.update(s.body);
  const Thresholds th{report["thresholds"]["th_pu"].get<double>(), report["thresholds"]["th_su"].get<double>()};
  r.files.add("synthesis.json", io::dump(report));
  r.files.add("region.csv", io::region_csv(region_corners(s.vertices, th)));
  r.notes.push_back(s.interval.feasible ? "feasible" : "infeasible");
  return r;
}

inline CommandResult cmd_optimize(const config::RunConfig& cfg) {
  CommandResult r;
  auto s = synthesize(cfg);
  json report = report_header("optimize", cfg);
  report.update(s.body);
  if (s.interval.feasible) {
    const auto k = coefficients(s.vertices);
    const auto mix = optimal_alpha(s.vertices, s.interval);
    const auto curve = cost_curve(s.vertices, s.interval, 512);
    double sample_min = curve.front().cost;
    for (const auto& c : curve) sample_min = std::min(sample_min, c.cost);
    const auto w = mixed_waiting(s.vertices, mix.alpha_min);
    report["coefficients"] = {{"c1", k.c1}, {"c2", k.c2}, {"c3", k.c3}};
    report["optimization"] = io::to_json(mix);
    report["optimization"]["w_pu"] = w.w_pu_mix;
    report["optimization"]["w_su"] = w.w_su_mix;
    report["cost_curve"] = {{"samples", curve.size()}, {"min_sample_cost", sample_min}};
    r.files.add("cost_curve.csv", io::cost_curve_csv(curve));
    r.notes.push_back("alpha_min " + io::fmt(mix.alpha_min) + " (" + io::to_string(mix.clamped) + ")");
  } else {
    report["optimization"] = nullptr;
    report["skipped"] = "thresholds are infeasible; there is no admissible alpha to optimize over";
    r.notes.push_back("infeasible thresholds, optimization skipped");
  }
  r.files.add("optimize.json", io::dump(report));
  return r;
}

inline json compare_metric(const sim::Metric& m, const std::optional<double>& reference) {
  if (!reference || std::isnan(m.mean)) return nullptr;
  json j{{"reference", *reference}, {"simulated", m.mean}, {"relative_difference", relative_error(m.mean, *reference)}};
  j["ci_multiples"] = std::isnan(m.ci_halfwidth) || m.ci_halfwidth == 0.0
                          ? json(nullptr)
                          : json(std::abs(m.mean - *reference) / m.ci_halfwidth);
  return j;
}

inline CommandResult cmd_simulate(const config::RunConfig& cfg) {
  CommandResult r;
  const NetworkModel model = config::resolve_model(cfg);
  require_stable(model, "simulation refused");
  const sim::SimConfig scfg = config::sim_config(cfg);
  const auto ropts = replication_options(scfg);
  const bool coupled = scfg.topology == sim::Topology::Coupled;

  std::optional<sim::CoupledSpec> spec;
  sim::SimEstimate est;
  if (coupled) {
    spec = config::coupled_spec(cfg, model);
    est = sim::run_coupled(*spec, scfg, ropts);
  } else {
    est = sim::run_decoupled(model, scfg, ropts);
  }

  json report = report_header("simulate", cfg);
  report["model"] = io::to_json(model);
  report["estimate"] = io::to_json(est);
  const auto little = sim::little_law_check(est);
  report["little_law"] = {{"gap_pu", io::number_or_null(little.gap_pu)},
                          {"tolerance_pu", io::number_or_null(little.tol_pu)},
                          {"gap_su", io::number_or_null(little.gap_su)},
                          {"tolerance_su", io::number_or_null(little.tol_su)},
                          {"ok", little.ok}};

  // Analytic references for the decoupled model.
  json analytic{{"model", "decoupled"}};
  std::optional<double> d_pu_mmn, d_su_law, d_pu_ctmc, d_su_ctmc;
  if (model.pu().lambda() > 0.0) d_pu_mmn = mmn_total_delay(model.pu(), model.n_servers());
  if (model.su().lambda() > 0.0) d_su_law = secondary_delay_from_law(model);
  try {
    const JointPmf pmf = solve_with_auto_truncation(model, config::truncation_options(cfg));
    const auto d = delays_from_pmf(pmf);
    d_pu_ctmc = d.d_pu;
    d_su_ctmc = d.d_su;
  } catch (const TruncationCapError& e) {
    analytic["ctmc_note"] = e.what();
  }
  analytic["d_pu_ctmc"] = compare_metric(est.d_pu, d_pu_ctmc);
  analytic["d_su_ctmc"] = compare_metric(est.d_su, d_su_ctmc);
  analytic["d_pu_mmn"] = compare_metric(est.d_pu, d_pu_mmn);
  analytic["d_su_conservation_law"] = compare_metric(est.d_su, d_su_law);
  report["analytic_comparison"] = std::move(analytic);

  if (coupled && cfg.simulation.coupled.compare_decoupled) {
    const NetworkModel aggregated(spec->n_channels(), ClassParams(est.lambda_pu, est.mu_pu),
                                  ClassParams(est.lambda_su, est.mu_su));
    sim::SimConfig dcfg = scfg;
    dcfg.topology = sim::Topology::Decoupled;
    const auto dec = sim::run_decoupled(aggregated, dcfg, ropts);
    report["decoupled_comparison"] = {
        {"d_pu", compare_metric(est.d_pu, dec.d_pu.mean)},
        {"d_su", compare_metric(est.d_su, dec.d_su.mean)},
        {"decoupled_estimate", io::to_json(dec)}};
  }

  if (cfg.simulation.emit_event_log) {
    std::vector<sim::EventRecord> log;
    if (coupled) sim::CoupledSimulator(*spec, scfg).run(0, &log);
    else sim::DecoupledSimulator(model, scfg).run(0, &log);
    r.files.add("event_log.csv", io::event_log_csv(log));
  }
  r.files.add("simulation.json", io::dump(report));
  r.notes.push_back(std::to_string(est.events_processed) + " events simulated");
  return r;
}

// ---- entry point -------------------------------------------------------------------

inline int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Performance analysis and synthesis for multi-channel cognitive-radio networks"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  std::string out_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", opt.config_path, "run configuration (JSON)")->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides simulation.seed)");
  app.add_flag("--no-sim", opt.no_sim, "skip simulation columns in sweeps");
  app.add_flag("--emit-event-log", opt.emit_event_log, "write the event log of replication 0");

  auto* analyze = app.add_subcommand("analyze", "stationary PMF and delay table");
  auto* sweep = app.add_subcommand("sweep", "delays across a range of PU loads");
  auto* synth = app.add_subcommand("synthesize", "achievability of waiting-time thresholds");
  auto* optim = app.add_subcommand("optimize", "minimum-norm priority mix");
  auto* simulate = app.add_subcommand("simulate", "discrete-event simulation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*out_opt) opt.out_dir = out_dir;
  if (*seed_opt) opt.seed = seed;

  try {
    config::RunConfig cfg = config::load(opt.config_path);
    apply_overrides(cfg, opt);
    CommandResult result;
    if (analyze->parsed()) result = cmd_analyze(cfg);
    else if (sweep->parsed()) result = cmd_sweep(cfg);
    else if (synth->parsed()) result = cmd_synthesize(cfg);
    else if (optim->parsed()) result = cmd_optimize(cfg);
    else if (simulate->parsed()) result = cmd_simulate(cfg);
    result.files.commit(cfg.output_dir);
    for (const auto& n : result.notes) out << n << "\n";
    for (const auto& [name, content] : result.files.files())
      out << "wrote " << (std::filesystem::path(cfg.output_dir) / name).string() << "\n";
    return result.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace crnq::cli
