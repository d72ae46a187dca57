#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crnq/cli.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path samples() {
  const char* env = std::getenv("CRNQ_SAMPLES");
  return env ? env : "samples/configs";
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "crnq");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = crnq::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("crnq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const json& j) {
    const auto p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  json base() const {
    return json::parse(R"({"model":{"n_servers":10,"pu":{"lambda":3000,"mu":5000},"su":{"lambda":40000,"mu":10000}}})");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"analyze"}).code, 1);
  EXPECT_EQ(run({"frobnicate", "--config", "x.json"}).code, 1);
  EXPECT_EQ(run({"analyze", "--config", (dir_ / "missing.json").string()}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, AnalyzeLightTraffic) {
  const auto r = run({"analyze", "--config", (samples() / "ltr.json").string(), "--out", (dir_ / "ltr").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir_ / "ltr" / "report.json"));
  EXPECT_LT(report["relative_errors"]["weighted_sum_law_vs_ctmc"].get<double>(), 0.005);
  EXPECT_LT(report["relative_errors"]["d_pu_mmn_vs_ctmc"].get<double>(), 1e-9);
  for (const char* f : {"joint_pmf.csv", "joint_pmf.json", "pu_marginal.csv", "su_marginal.csv"})
    EXPECT_TRUE(fs::exists(dir_ / "ltr" / f)) << f;
  EXPECT_EQ(slurp(dir_ / "ltr" / "su_marginal.csv").rfind("# crn-queues v1\nj,p\n", 0), 0u);
  // The echoed config reparses to the effective configuration.
  auto cfg = crnq::config::load(samples() / "ltr.json");
  cfg.output_dir = (dir_ / "ltr").string();
  EXPECT_EQ(crnq::config::from_json(report["config"]), cfg);
}

TEST_F(CliTest, HeavyTrafficHasHeavierSecondaryTail) {
  ASSERT_EQ(run({"analyze", "--config", (samples() / "ltr.json").string(), "--out", (dir_ / "l").string()}).code, 0);
  ASSERT_EQ(run({"analyze", "--config", (samples() / "htr.json").string(), "--out", (dir_ / "h").string()}).code, 0);
  const auto lo = json::parse(slurp(dir_ / "l" / "report.json"));
  const auto hi = json::parse(slurp(dir_ / "h" / "report.json"));
  EXPECT_GT(hi["quantile_999_index"]["su"].get<int>(), lo["quantile_999_index"]["su"].get<int>());
}

TEST_F(CliTest, UnstableExitsTwo) {
  auto j = base();
  j["model"]["pu"]["lambda"] = 40000;
  const auto p = write_config("unstable.json", j);
  for (const char* cmd : {"analyze", "synthesize", "simulate"}) {
    const auto r = run({cmd, "--config", p.string(), "--out", (dir_ / "u").string()});
    EXPECT_EQ(r.code, 2) << cmd;
    EXPECT_NE(r.err.find("rho_pu + rho_su < N"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(dir_ / "u"));
}

TEST_F(CliTest, TruncationCapExitsThree) {
  auto j = base();
  j["model"]["pu"]["lambda"] = 27000;
  j["truncation"] = {{"cap", 64}};
  const auto r = run({"analyze", "--config", write_config("cap.json", j).string(), "--out", (dir_ / "c").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("truncation cap exceeded"), std::string::npos);
}

TEST_F(CliTest, SimulationBudgetExitsFour) {
  auto j = base();
  j["simulation"] = {{"measured_departures", 5000}, {"replications", 2}, {"event_budget", 100}};
  const auto r = run({"simulate", "--config", write_config("b.json", j).string(), "--out", (dir_ / "b").string()});
  EXPECT_EQ(r.code, 4);
}

TEST_F(CliTest, SingleSweepPointMatchesAnalyze) {
  auto j = base();
  j["sweep"] = {{"rho_pu_from", 0.6}, {"rho_pu_to", 0.6}, {"points", 1}};
  const auto p = write_config("one.json", j);
  ASSERT_EQ(run({"sweep", "--config", p.string(), "--no-sim", "--out", (dir_ / "s").string()}).code, 0);
  ASSERT_EQ(run({"analyze", "--config", p.string(), "--out", (dir_ / "a").string()}).code, 0);
  const auto sweep = json::parse(slurp(dir_ / "s" / "sweep.json"));
  const auto analyze = json::parse(slurp(dir_ / "a" / "report.json"));
  EXPECT_EQ(sweep["points"][0]["delays"], analyze["delays"]);
  EXPECT_EQ(sweep["points"][0]["weighted_sum"], analyze["weighted_sum"]);
  EXPECT_TRUE(sweep["config"]["simulation"]["enabled"] == false);
}

TEST_F(CliTest, SweepFlagsUnstablePointAndContinues) {
  auto j = base();
  j["sweep"] = {{"rho_pu_from", 1.0}, {"rho_pu_to", 7.0}, {"points", 4}};
  const auto r = run({"sweep", "--config", write_config("sw.json", j).string(), "--no-sim", "--out",
                      (dir_ / "sw").string()});
  EXPECT_NE(r.code, 0);
  const auto csv = slurp(dir_ / "sw" / "sweep.csv");
  EXPECT_NE(csv.find("\n1,ok,"), std::string::npos);
  EXPECT_NE(csv.find("\n7,unstable,"), std::string::npos);
  EXPECT_NE(csv.find("\n5,ok,"), std::string::npos);
}

TEST_F(CliTest, SynthesizeFigureThresholds) {
  const auto r = run({"synthesize", "--config", (samples() / "thresholds.json").string(), "--out",
                      (dir_ / "t").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = json::parse(slurp(dir_ / "t" / "synthesis.json"));
  EXPECT_NEAR(s["interval"]["a1"].get<double>(), 0.1, 1e-12);
  EXPECT_NEAR(s["interval"]["a2"].get<double>(), 0.8, 1e-12);
  EXPECT_TRUE(s["feasible"].get<bool>());
  EXPECT_TRUE(s["frontier"]["eta"].is_number());
  EXPECT_TRUE(fs::exists(dir_ / "t" / "region.csv"));
}

TEST_F(CliTest, SynthesizeInfeasibleSuggestsRelaxingPrimary) {
  auto j = base();
  j["thresholds"] = {{"th_pu_alpha", 0.9}, {"th_su_alpha", 0.5}};
  const auto r = run({"synthesize", "--config", write_config("inf.json", j).string(), "--out", (dir_ / "i").string()});
  ASSERT_EQ(r.code, 0);
  const auto s = json::parse(slurp(dir_ / "i" / "synthesis.json"));
  EXPECT_FALSE(s["feasible"].get<bool>());
  EXPECT_EQ(s["suggestion"], "relax th_pu");
}

TEST_F(CliTest, SynthesizeLooseSecondaryThresholdHasNoExcessDelay) {
  auto j = base();
  j["thresholds"] = {{"th_pu_alpha", 0.5}, {"th_su_alpha", 1.0}};
  j["target"] = {{"w_pu", 1.0}, {"w_su", 1.0}};
  ASSERT_EQ(run({"synthesize", "--config", write_config("c.json", j).string(), "--out", (dir_ / "c").string()}).code, 0);
  const auto s = json::parse(slurp(dir_ / "c" / "synthesis.json"));
  EXPECT_EQ(s["frontier"]["excess_delay_pu"].get<double>(), 0.0);
  EXPECT_FALSE(s["target"]["on_segment"].get<bool>());
}

TEST_F(CliTest, OptimizeWritesCostCurve) {
  const auto r = run({"optimize", "--config", (samples() / "thresholds.json").string(), "--out",
                      (dir_ / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto o = json::parse(slurp(dir_ / "o" / "optimize.json"));
  const double best = o["optimization"]["cost_at_min"].get<double>();
  std::istringstream csv(slurp(dir_ / "o" / "cost_curve.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  EXPECT_EQ(line, "alpha,cost");
  int rows = 0;
  while (std::getline(csv, line)) {
    const double c = std::stod(line.substr(line.find(',') + 1));
    EXPECT_GE(c, best * (1 - 1e-12));
    ++rows;
  }
  EXPECT_EQ(rows, 512);
}

TEST_F(CliTest, OptimizeSymmetricNetworkMixesEvenly) {
  auto j = json::parse(R"({"model":{"n_servers":4,"pu":{"lambda":1.5,"mu":1},"su":{"lambda":1.5,"mu":1}},
                           "thresholds":{"th_pu_alpha":0.2,"th_su_alpha":0.9}})");
  ASSERT_EQ(run({"optimize", "--config", write_config("sym.json", j).string(), "--out", (dir_ / "y").string()}).code, 0);
  const auto o = json::parse(slurp(dir_ / "y" / "optimize.json"));
  EXPECT_NEAR(o["optimization"]["alpha_min"].get<double>(), 0.5, 1e-12);
  EXPECT_EQ(o["optimization"]["clamped"], "interior");
}

TEST_F(CliTest, OptimizeClampAndInfeasible) {
  auto j = json::parse(R"({"model":{"n_servers":4,"pu":{"lambda":1.5,"mu":1},"su":{"lambda":1.5,"mu":1}},
                           "thresholds":{"th_pu_alpha":0.7,"th_su_alpha":0.9}})");
  ASSERT_EQ(run({"optimize", "--config", write_config("cl.json", j).string(), "--out", (dir_ / "cl").string()}).code, 0);
  EXPECT_EQ(json::parse(slurp(dir_ / "cl" / "optimize.json"))["optimization"]["clamped"], "lower");
  j["thresholds"] = {{"th_pu_alpha", 0.9}, {"th_su_alpha", 0.2}};
  ASSERT_EQ(run({"optimize", "--config", write_config("if.json", j).string(), "--out", (dir_ / "if").string()}).code, 0);
  const auto o = json::parse(slurp(dir_ / "if" / "optimize.json"));
  EXPECT_TRUE(o["optimization"].is_null());
  EXPECT_TRUE(o["skipped"].is_string());
  EXPECT_FALSE(fs::exists(dir_ / "if" / "cost_curve.csv"));
}

TEST_F(CliTest, SimulateIsDeterministicAndSeedOverrides) {
  auto j = base();
  j["simulation"] = {{"measured_departures", 20000}, {"replications", 4}, {"seed", 5}};
  const auto p = write_config("sim.json", j);
  ASSERT_EQ(run({"simulate", "--config", p.string(), "--out", (dir_ / "a").string()}).code, 0);
  ASSERT_EQ(run({"simulate", "--config", p.string(), "--out", (dir_ / "a2").string()}).code, 0);
  ASSERT_EQ(run({"simulate", "--config", p.string(), "--seed", "6", "--out", (dir_ / "b").string()}).code, 0);
  auto strip_out = [](json r) {
    r["config"]["output"] = nullptr;
    return r.dump();
  };
  const auto a = json::parse(slurp(dir_ / "a" / "simulation.json"));
  const auto a2 = json::parse(slurp(dir_ / "a2" / "simulation.json"));
  const auto b = json::parse(slurp(dir_ / "b" / "simulation.json"));
  EXPECT_EQ(strip_out(a), strip_out(a2));
  EXPECT_EQ(b["config"]["simulation"]["seed"], 6);
  EXPECT_NE(a["estimate"]["d_su"], b["estimate"]["d_su"]);
  EXPECT_TRUE(a["little_law"]["ok"].get<bool>());
  const auto& cmp = a["analytic_comparison"]["d_su_conservation_law"];
  EXPECT_LE(cmp["ci_multiples"].get<double>(), 3.0);
}

TEST_F(CliTest, SimulateCoupledWithEventLog) {
  const auto r = run({"simulate", "--config", (samples() / "coupled.json").string(), "--emit-event-log", "--out",
                      (dir_ / "cp").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = json::parse(slurp(dir_ / "cp" / "simulation.json"));
  EXPECT_EQ(s["estimate"]["topology"], "coupled");
  EXPECT_TRUE(s["decoupled_comparison"]["d_su"]["relative_difference"].is_number());
  EXPECT_EQ(s["estimate"]["d_su_per_station"].size(), 2u);
  EXPECT_EQ(slurp(dir_ / "cp" / "event_log.csv")
                .rfind("# crn-queues v1\ntime,event,class,channel,pu_in_system,su_in_system,pu_busy,su_busy\n", 0),
            0u);
}
