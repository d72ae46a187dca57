#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "crnq/error.hpp"
#include "crnq/model.hpp"
#include "crnq/sim/coupled.hpp"
#include "crnq/sim/decoupled.hpp"
#include "crnq/sim/types.hpp"

namespace crnq::sim {

// Mean and 95% Student-t half-width across replications. NaN entries (a
// class that saw no departures) make the whole metric undefined.
inline Metric summarize(const std::vector<double>& xs, bool with_ci) {
  Metric m;
  if (xs.empty()) return m;
  for (double x : xs)
    if (std::isnan(x)) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (!with_ci || xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  const double n = static_cast<double>(xs.size());
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  m.ci_halfwidth = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
  return m;
}

struct ReplicationOptions {
  bool require_ci = true;
  // 0 uses std::thread::hardware_concurrency().
  unsigned workers = 0;
};

// Runs replications 0..R-1 (replication r draws from streams seeded by
// derive_seed(cfg.seed, r, stream)), possibly in parallel, and reduces the
// results in replication order.
inline std::vector<RunResult> run_replications(const std::function<RunResult(std::uint64_t)>& runner,
                                               int replications, unsigned workers = 0) {
  std::vector<RunResult> results(static_cast<std::size_t>(replications));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(replications));
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(replications));

  auto work = [&](unsigned worker) {
    for (int r = static_cast<int>(worker); r < replications; r += static_cast<int>(workers)) {
      try {
        results[static_cast<std::size_t>(r)] = runner(static_cast<std::uint64_t>(r));
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

inline SimEstimate aggregate(std::vector<RunResult> runs, const SimConfig& cfg, double lambda_pu,
                             double mu_pu, double lambda_su, double mu_su, bool with_ci) {
  SimEstimate est;
  est.topology = cfg.topology;
  est.seed = cfg.seed;
  est.replications = static_cast<int>(runs.size());
  est.lambda_pu = lambda_pu;
  est.lambda_su = lambda_su;
  est.mu_pu = mu_pu;
  est.mu_su = mu_su;
  est.measured_departures = cfg.measured_departures;

  auto collect = [&](auto field) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(field(r));
    return summarize(xs, with_ci);
  };
  est.d_pu = collect([](const RunResult& r) { return r.d_pu; });
  est.d_su = collect([](const RunResult& r) { return r.d_su; });
  est.w_pu = collect([&](const RunResult& r) { return r.d_pu - 1.0 / mu_pu; });
  est.w_su = collect([&](const RunResult& r) { return r.d_su - 1.0 / mu_su; });
  est.mean_q_pu = collect([](const RunResult& r) { return r.mean_q_pu; });
  est.mean_q_su = collect([](const RunResult& r) { return r.mean_q_su; });
  if (!runs.empty()) {
    for (std::size_t s = 0; s < runs.front().d_su_per_station.size(); ++s)
      est.d_su_per_station.push_back(
          collect([s](const RunResult& r) { return r.d_su_per_station[s]; }));
  }
  for (const auto& r : runs) est.events_processed += r.events;
  est.runs = std::move(runs);
  return est;
}

template <class Runner>
SimEstimate replicate(const Runner& runner, const SimConfig& cfg, double lambda_pu, double mu_pu,
                      double lambda_su, double mu_su, const ReplicationOptions& opts = {}) {
  if (cfg.replications < 1) throw DomainError("replications must be at least 1");
  if (opts.require_ci && cfg.replications < 2)
    throw DomainError("confidence intervals need at least 2 replications");
  auto runs = run_replications([&](std::uint64_t r) { return runner(r); }, cfg.replications,
                               opts.workers);
  return aggregate(std::move(runs), cfg, lambda_pu, mu_pu, lambda_su, mu_su,
                   cfg.replications >= 2);
}

inline SimEstimate run_decoupled(const NetworkModel& model, const SimConfig& cfg,
                                 const ReplicationOptions& opts = {}) {
  const DecoupledSimulator sim(model, cfg);
  SimConfig tagged = cfg;
  tagged.topology = Topology::Decoupled;
  return replicate([&](std::uint64_t r) { return sim.run(r); }, tagged, model.pu().lambda(),
                   model.pu().mu(), model.su().lambda(), model.su().mu(), opts);
}

// SU service rate reported for the coupled topology is the arrival-weighted
// harmonic mean, so that w_su = d_su - 1/mu_su is the mean SU waiting time.
inline SimEstimate run_coupled(const CoupledSpec& spec, const SimConfig& cfg,
                               const ReplicationOptions& opts = {}) {
  const CoupledSimulator sim(spec, cfg);
  SimConfig tagged = cfg;
  tagged.topology = Topology::Coupled;
  double lambda_pu = 0.0;
  for (double l : spec.per_channel_pu_lambda) lambda_pu += l;
  double lambda_su = 0.0;
  double mean_service = 0.0;
  for (const auto& st : spec.su_stations) {
    lambda_su += st.lambda;
    mean_service += st.lambda / st.mu;
  }
  const double mu_su = lambda_su > 0.0 ? lambda_su / mean_service : spec.su_stations.front().mu;
  return replicate([&](std::uint64_t r) { return sim.run(r); }, tagged, lambda_pu, spec.mu_pu,
                   lambda_su, mu_su, opts);
}

// |L - lambda d| against the combined uncertainty of both sides, per class.
struct LittleCheck {
  double gap_pu;
  double gap_su;
  double tol_pu;
  double tol_su;
  bool ok;
};

inline LittleCheck little_law_check(const SimEstimate& est, double k = 3.0) {
  auto side = [&](const Metric& q, const Metric& d, double lambda, double& gap, double& tol) {
    if (lambda == 0.0) {
      gap = q.mean;
      tol = std::isnan(q.ci_halfwidth) ? 0.0 : k * q.ci_halfwidth;
      return gap <= tol;
    }
    gap = std::abs(q.mean - lambda * d.mean);
    tol = k * std::hypot(q.ci_halfwidth, lambda * d.ci_halfwidth);
    return gap <= tol;
  };
  LittleCheck c{};
  const bool a = side(est.mean_q_pu, est.d_pu, est.lambda_pu, c.gap_pu, c.tol_pu);
  const bool b = side(est.mean_q_su, est.d_su, est.lambda_su, c.gap_su, c.tol_su);
  c.ok = a && b;
  return c;
}

}  // namespace crnq::sim
