#pragma once

// Achievable-region synthesis: given waiting-time thresholds for both
// classes, decide which priority mixes alpha in (0, 1) meet them.
//
// alpha is the share of priority granted to the PU; the mixed operating
// point moves linearly from (B, D) at alpha = 0 to (A, C) at alpha = 1.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crnq/conservation.hpp"
#include "crnq/error.hpp"

namespace crnq {

struct Thresholds {
  double th_pu;
  double th_su;
};

struct FeasibleInterval {
  double a1;
  double a2;
  bool feasible;
  // a1 == a2: the open interval is empty only because of the strict bounds.
  bool boundary = false;
};

struct FrontierPoint {
  double eta;
  double slope_m_prime;
  std::optional<double> excess_delay_pu;
};

struct MixedWaiting {
  double w_pu_mix;
  double w_su_mix;
};

struct AlphaForTarget {
  bool on_segment;
  std::optional<double> alpha;
  std::optional<double> alpha_pu;
  std::optional<double> alpha_su;
};

inline void validate_thresholds(const Thresholds& th) {
  if (!(th.th_pu > 0.0) || !std::isfinite(th.th_pu) || !(th.th_su > 0.0) || !std::isfinite(th.th_su))
    throw DomainError("thresholds must be positive and finite");
}

inline MixedWaiting mixed_waiting(const RegionVertices& v, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  return {alpha * v.a + (1.0 - alpha) * v.b, alpha * v.c + (1.0 - alpha) * v.d};
}

// a1 = (B - Th_PU)/(B - A) bounds alpha from below, a2 = (Th_SU - D)/(C - D)
// from above. A threshold that binds nowhere clamps to the unit interval.
inline FeasibleInterval feasible_interval(const RegionVertices& v, const Thresholds& th) {
  validate_vertices(v);
  validate_thresholds(th);
  const double a1 = std::max((v.b - th.th_pu) / (v.b - v.a), 0.0);
  const double a2 = std::min((th.th_su - v.d) / (v.c - v.d), 1.0);
  return {a1, a2, a1 < a2, a1 == a2};
}

inline AlphaForTarget unique_alpha_for_target(const RegionVertices& v, double w_pu, double w_su,
                                              double rel_tolerance = 1e-9) {
  const bool flat_pu = v.a == v.b;
  const bool flat_su = v.c == v.d;
  if (flat_pu && flat_su) throw DegenerateRegionError("degenerate region: A = B and C = D");

  AlphaForTarget out{false, std::nullopt, std::nullopt, std::nullopt};
  if (!flat_pu) out.alpha_pu = (v.b - w_pu) / (v.b - v.a);
  if (!flat_su) out.alpha_su = (w_su - v.d) / (v.c - v.d);

  const double alpha = out.alpha_pu ? *out.alpha_pu : *out.alpha_su;
  auto close = [&](double predicted, double target) {
    const double scale = std::max({std::abs(target), std::abs(v.a), std::abs(v.b), std::abs(v.c),
                                   std::abs(v.d)});
    return std::abs(predicted - target) <= rel_tolerance * scale;
  };
  const double pu_hat = alpha * v.a + (1.0 - alpha) * v.b;
  const double su_hat = alpha * v.c + (1.0 - alpha) * v.d;
  const bool in_range = alpha >= -rel_tolerance && alpha <= 1.0 + rel_tolerance;
  if (in_range && close(pu_hat, w_pu) && close(su_hat, w_su)) {
    out.on_segment = true;
    out.alpha = std::clamp(alpha, 0.0, 1.0);
  }
  return out;
}

// Best SU waiting time reachable on the boundary when the PU constraint binds:
// eta = m' (B - Th_PU) + D with m' = (C - D)/(B - A).
inline FrontierPoint frontier_point(const RegionVertices& v, const Thresholds& th) {
  validate_vertices(v);
  validate_thresholds(th);
  if (th.th_pu < v.a)
    throw DomainError("Th_PU below A: no mix can satisfy the PU constraint");
  if (th.th_pu > v.b)
    throw DomainError("Th_PU above B: the PU constraint does not bind");
  const double m_prime = (v.c - v.d) / (v.b - v.a);
  const double eta = m_prime * (v.b - th.th_pu) + v.d;
  FrontierPoint fp{eta, m_prime, std::nullopt};
  if (th.th_su >= v.c)
    fp.excess_delay_pu = 0.0;
  else if (th.th_su > eta)
    fp.excess_delay_pu = (v.c - th.th_su) / m_prime;
  return fp;
}

// Plot-ready corners of the region: the two absolute-priority vertices, the
// threshold crossings of the mixing segment, the frontier point, and the
// threshold lines clipped to the vertex bounding box.
inline std::vector<std::pair<std::string, MixedWaiting>> region_corners(const RegionVertices& v,
                                                                        const Thresholds& th) {
  validate_vertices(v);
  validate_thresholds(th);
  std::vector<std::pair<std::string, MixedWaiting>> out;
  out.emplace_back("pu_priority_vertex", MixedWaiting{v.a, v.c});
  out.emplace_back("su_priority_vertex", MixedWaiting{v.b, v.d});
  const auto iv = feasible_interval(v, th);
  if (iv.a1 >= 0.0 && iv.a1 <= 1.0) out.emplace_back("pu_threshold_crossing", mixed_waiting(v, iv.a1));
  if (iv.a2 >= 0.0 && iv.a2 <= 1.0) out.emplace_back("su_threshold_crossing", mixed_waiting(v, iv.a2));
  if (th.th_pu >= v.a && th.th_pu <= v.b) {
    const auto fp = frontier_point(v, th);
    out.emplace_back("frontier_point", MixedWaiting{th.th_pu, fp.eta});
  }
  const double lo_pu = std::min(v.a, v.b), hi_pu = std::max(v.a, v.b);
  const double lo_su = std::min(v.c, v.d), hi_su = std::max(v.c, v.d);
  out.emplace_back("th_pu_line_low", MixedWaiting{th.th_pu, lo_su});
  out.emplace_back("th_pu_line_high", MixedWaiting{th.th_pu, hi_su});
  out.emplace_back("th_su_line_low", MixedWaiting{lo_pu, th.th_su});
  out.emplace_back("th_su_line_high", MixedWaiting{hi_pu, th.th_su});
  return out;
}

}  // namespace crnq
