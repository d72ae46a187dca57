#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "crnq/conservation.hpp"
#include "crnq/ctmc.hpp"
#include "crnq/io.hpp"
#include "crnq/mmn.hpp"
#include "crnq/sim/replicate.hpp"
#include "oracles.hpp"

using namespace crnq;
using namespace crnq::sim;

namespace {

NetworkModel ltr() { return {10, ClassParams(0.3e4, 0.5e4), ClassParams(4e4, 1e4)}; }

SimConfig small(std::uint64_t seed, std::uint64_t measured = 20'000, int reps = 10) {
  return make_sim_config(seed, measured, reps);
}

void expect_within_ci(const Metric& m, double reference, double k = 3.0) {
  ASSERT_FALSE(std::isnan(m.mean));
  EXPECT_LE(std::abs(m.mean - reference), k * m.ci_halfwidth)
      << "mean " << m.mean << " reference " << reference << " ci " << m.ci_halfwidth;
}

}  // namespace

TEST(Rng, SeedsAreDistinctPerStreamAndReplication) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 50; ++r)
    for (std::uint64_t s = 0; s < 8; ++s) seen.insert(derive_seed(42, r, s));
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
}

TEST(Rng, ExponentialMean) {
  RandomStream a(7), b(7);
  double sum = 0.0;
  for (int k = 0; k < 200'000; ++k) {
    const double x = a.exponential(4.0);
    ASSERT_EQ(x, b.exponential(4.0));
    ASSERT_GE(x, 0.0);
    sum += x;
  }
  EXPECT_NEAR(sum / 200'000, 0.25, 0.005);
}

TEST(EventQueue, OrdersByTimeThenInsertion) {
  EventQueue<int> q;
  q.push(2.0, 1);
  const auto cancelled = q.push(1.0, 2);
  q.push(1.5, 3);
  q.push(1.5, 4);
  q.cancel(cancelled);
  std::vector<int> order;
  while (auto e = q.pop()) order.push_back(e->payload);
  EXPECT_EQ(order, (std::vector<int>{3, 4, 1}));
  EXPECT_TRUE(q.empty());
}

TEST(SimConfig, Validation) {
  EXPECT_THROW(DecoupledSimulator(ltr(), make_sim_config(1, 50, 2)), DomainError);
  EXPECT_THROW(DecoupledSimulator(ltr(), make_sim_config(1, 1000, 0)), DomainError);
  EXPECT_THROW(DecoupledSimulator({2, ClassParams(2, 1), ClassParams(1, 1)}, small(1)), InstabilityError);
  EXPECT_THROW(run_decoupled(ltr(), small(1, 1000, 1)), DomainError);
  EXPECT_NO_THROW(run_decoupled(ltr(), small(1, 1000, 1), {false, 1}));
}

TEST(Decoupled, PrimaryAloneIsErlang) {
  const NetworkModel m(10, ClassParams(0.3e4, 0.5e4), ClassParams(0.0, 1e4));
  const auto est = run_decoupled(m, small(3));
  expect_within_ci(est.d_pu, mmn_total_delay(m.pu(), 10));
  EXPECT_TRUE(std::isnan(est.d_su.mean));
}

TEST(Decoupled, HeavyPrimaryAloneIsErlang) {
  const NetworkModel m(10, ClassParams(2.7e4, 0.5e4), ClassParams(0.0, 1e4));
  expect_within_ci(run_decoupled(m, small(4)).d_pu, mmn_total_delay(m.pu(), 10));
}

TEST(Decoupled, SingleServerConservation) {
  const ClassParams pu(0.3, 1.0), su(0.4, 2.0);
  const NetworkModel m(1, pu, su);
  const auto est = run_decoupled(m, small(5, 40'000));
  std::vector<double> sums;
  for (const auto& r : est.runs) sums.push_back(pu.rho() * (r.d_pu - 1.0) + su.rho() * (r.d_su - 0.5));
  const std::vector<ClassParams> cs{pu, su};
  expect_within_ci(summarize(sums, true), (pu.rho() + su.rho()) * kleinrock_weighted_sum(cs));
}

TEST(Decoupled, AgreesWithChainAtTwoLoads) {
  for (double rho1 : {0.6, 3.8}) {
    const NetworkModel m(10, ClassParams(rho1 * 0.5e4, 0.5e4), ClassParams(4e4, 1e4));
    const auto d = delays_from_pmf(solve_with_auto_truncation(m));
    const auto est = run_decoupled(m, small(6, 40'000));
    expect_within_ci(est.d_pu, *d.d_pu);
    expect_within_ci(est.d_su, *d.d_su);
  }
}

TEST(Decoupled, LittleLawHolds) {
  const auto est = run_decoupled(ltr(), small(8));
  EXPECT_TRUE(little_law_check(est).ok);
  for (const auto& r : est.runs) {
    EXPECT_NEAR(r.mean_q_pu, 0.3e4 * r.d_pu, 0.10 * r.mean_q_pu);
    EXPECT_NEAR(r.mean_q_su, 4e4 * r.d_su, 0.10 * r.mean_q_su);
  }
}

TEST(Decoupled, DelaysAtLeastServiceTime) {
  const auto est = run_decoupled(ltr(), small(9));
  EXPECT_GE(est.d_pu.mean, 1 / 0.5e4 - est.d_pu.ci_halfwidth);
  EXPECT_GE(est.d_su.mean, 1 / 1e4 - est.d_su.ci_halfwidth);
}

TEST(Decoupled, PrimaryTransparentToSecondaryLoad) {
  const NetworkModel alone(10, ClassParams(2.7e4, 0.5e4), ClassParams(0.0, 1e4));
  const NetworkModel shared(10, ClassParams(2.7e4, 0.5e4), ClassParams(4e4, 1e4));
  const auto a = run_decoupled(alone, small(10));
  const auto b = run_decoupled(shared, small(11));
  EXPECT_LE(std::abs(a.d_pu.mean - b.d_pu.mean), 3.0 * std::hypot(a.d_pu.ci_halfwidth, b.d_pu.ci_halfwidth));
}

TEST(Decoupled, DeterministicAcrossRunsAndWorkerCounts) {
  const auto a = io::dump(io::to_json(run_decoupled(ltr(), small(12, 5000, 4), {true, 1})));
  const auto b = io::dump(io::to_json(run_decoupled(ltr(), small(12, 5000, 4), {true, 1})));
  const auto c = io::dump(io::to_json(run_decoupled(ltr(), small(12, 5000, 4), {true, 3})));
  const auto d = io::dump(io::to_json(run_decoupled(ltr(), small(13, 5000, 4), {true, 1})));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_NE(a, d);
}

TEST(Decoupled, MoreReplicationsNarrowTheInterval) {
  const auto two = run_decoupled(ltr(), small(14, 5000, 2));
  const auto ten = run_decoupled(ltr(), small(14, 5000, 10));
  EXPECT_LT(ten.d_su.ci_halfwidth, two.d_su.ci_halfwidth);
}

TEST(Decoupled, EventBudgetOverflow) {
  SimConfig cfg = small(15, 5000, 2);
  cfg.event_budget = 1000;
  EXPECT_THROW(run_decoupled(ltr(), cfg), SimBudgetError);
}

// Every logged instant must show the server split of the chain's rate
// structure, and no server idles while a packet waits.
TEST(Decoupled, PreemptionAndWorkConservationAudit) {
  for (const auto& m : {ltr(), NetworkModel(3, ClassParams(2.0, 1.0), ClassParams(0.8, 1.5)),
                        NetworkModel(1, ClassParams(0.4, 1.0), ClassParams(0.5, 2.0))}) {
    const DecoupledSimulator sim(m, small(16, 3000, 1));
    std::vector<EventRecord> log;
    sim.run(0, &log);
    ASSERT_GT(log.size(), 3000u);
    const int n = m.n_servers();
    for (const auto& e : log) {
      ASSERT_EQ(e.pu_busy, std::min(e.pu_in_system, n)) << "t=" << e.time;
      ASSERT_EQ(e.su_busy, std::min(e.su_in_system, std::max(n - e.pu_in_system, 0))) << "t=" << e.time;
      ASSERT_EQ(e.idle_channels_with_waiting_su, 0);
    }
  }
}

TEST(Decoupled, EventLogReproducible) {
  const DecoupledSimulator sim(ltr(), small(17, 2000, 1));
  std::vector<EventRecord> a, b;
  const auto ra = sim.run(0, &a);
  const auto rb = sim.run(0, &b);
  EXPECT_EQ(io::event_log_csv(a), io::event_log_csv(b));
  EXPECT_EQ(ra.d_su, rb.d_su);
  EXPECT_EQ(ra.d_su, sim.run(0).d_su);
}

TEST(Coupled, SpecValidation) {
  EXPECT_THROW(validate(CoupledSpec{{}, 1.0, {{1.0, 1.0}}}), DomainError);
  EXPECT_THROW(validate(CoupledSpec{{0.5}, 1.0, {}}), DomainError);
  EXPECT_THROW(validate(CoupledSpec{{1.2, 0.1}, 1.0, {{0.1, 1.0}}}), InstabilityError);
  EXPECT_THROW(validate(CoupledSpec{{0.5, 0.5}, 1.0, {{1.1, 1.0}}}), InstabilityError);
}

TEST(Coupled, PrimaryChannelsAreIndependentMm1) {
  const CoupledSpec spec{{200, 300, 400, 500}, 1000, {{0.0, 1000}}};
  const auto est = run_coupled(spec, small(18));
  double num = 0.0, den = 0.0;
  for (double l : spec.per_channel_pu_lambda) {
    num += l / (spec.mu_pu - l);
    den += l;
  }
  expect_within_ci(est.d_pu, num / den);
}

TEST(Coupled, NoPrimaryTrafficIsPooledServers) {
  const CoupledSpec spec{{0, 0, 0, 0}, 1000, {{1500, 1000}, {1500, 1000}}};
  const auto est = run_coupled(spec, small(19));
  expect_within_ci(est.d_su, mmn_total_delay(ClassParams(3000, 1000), 4));
  ASSERT_EQ(est.d_su_per_station.size(), 2u);
}

TEST(Coupled, AuditAndWorkConservation) {
  const CoupledSpec spec{{300, 300, 300}, 1000, {{800, 1500}, {500, 1500}}};
  const CoupledSimulator sim(spec, small(20, 3000, 1));
  std::vector<EventRecord> log;
  sim.run(0, &log);
  for (const auto& e : log) {
    ASSERT_EQ(e.idle_channels_with_waiting_su, 0);
    ASSERT_LE(e.pu_busy + e.su_busy, 3);
    ASSERT_LE(e.pu_busy, e.pu_in_system);
    ASSERT_LE(e.su_busy, e.su_in_system);
  }
}

// With independent per-channel PU queues the number of PU-busy channels
// fluctuates less than in the pooled queue, so SUs fare better in the coupled
// network. The decoupled model errs on the pessimistic side, by a bounded margin.
TEST(Coupled, DecoupledModelBoundsSecondaryDelayUnderHeavyPrimaryTraffic) {
  const int n = 10;
  const double mu1 = 0.5e4, lambda1 = 2.7e4;
  const CoupledSpec spec{std::vector<double>(n, lambda1 / n), mu1, {{2e4, 1e4}}};
  const auto coupled = run_coupled(spec, small(21));
  const auto decoupled = run_decoupled({n, ClassParams(lambda1, mu1), ClassParams(2e4, 1e4)}, small(21));
  EXPECT_LT(coupled.d_su.mean + coupled.d_su.ci_halfwidth, decoupled.d_su.mean);
  EXPECT_LT((decoupled.d_su.mean - coupled.d_su.mean) / decoupled.d_su.mean, 0.35);
  EXPECT_TRUE(little_law_check(coupled).ok);
}

TEST(Coupled, Deterministic) {
  const CoupledSpec spec{{300, 300}, 1000, {{400, 1500}, {300, 1500}}};
  const auto a = io::dump(io::to_json(run_coupled(spec, small(22, 4000, 3))));
  const auto b = io::dump(io::to_json(run_coupled(spec, small(22, 4000, 3))));
  EXPECT_EQ(a, b);
}
