#pragma once

#include <cmath>
#include <vector>

#include "crnq/conservation.hpp"
#include "crnq/error.hpp"
#include "crnq/synthesis.hpp"

namespace crnq {

// F(alpha)^2 = c1 alpha^2 - c2 alpha + c3.
struct CostCoefficients {
  double c1;
  double c2;
  double c3;
};

enum class Clamp { Lower, Upper, Interior };

struct OptimalMix {
  double alpha_min;
  double beta_unconstrained;
  double cost_at_min;
  Clamp clamped;
};

// Euclidean length of the mixed waiting-time vector.
inline double cost(const RegionVertices& v, double alpha) {
  const auto w = mixed_waiting(v, alpha);
  return std::hypot(w.w_pu_mix, w.w_su_mix);
}

inline CostCoefficients coefficients(const RegionVertices& v) {
  validate_vertices(v);
  const double db = v.b - v.a;
  const double dc = v.c - v.d;
  return {db * db + dc * dc, 2.0 * (v.b * db - v.d * dc), v.b * v.b + v.d * v.d};
}

inline double unconstrained_minimizer(const CostCoefficients& k) {
  if (!(k.c1 > 0.0)) throw DegenerateRegionError("cost is not strictly convex (c1 <= 0)");
  return k.c2 / (2.0 * k.c1);
}

// Projection of beta onto [a1, a2]. beta exactly on an end counts as Interior.
inline OptimalMix optimal_alpha(const RegionVertices& v, const FeasibleInterval& interval) {
  if (!interval.feasible)
    throw InfeasibleError("thresholds are infeasible; relax Th_PU or Th_SU before optimizing");
  const double beta = unconstrained_minimizer(coefficients(v));
  double alpha = beta;
  Clamp clamped = Clamp::Interior;
  if (beta < interval.a1) {
    alpha = interval.a1;
    clamped = Clamp::Lower;
  } else if (beta > interval.a2) {
    alpha = interval.a2;
    clamped = Clamp::Upper;
  }
  return {alpha, beta, cost(v, alpha), clamped};
}

struct CostSample {
  double alpha;
  double cost;
};

// Uniform samples of F over [a1, a2], endpoints included.
inline std::vector<CostSample> cost_curve(const RegionVertices& v, const FeasibleInterval& interval,
                                          int samples = 512) {
  if (samples < 2) throw DomainError("cost curve needs at least two samples");
  std::vector<CostSample> out;
  out.reserve(static_cast<std::size_t>(samples));
  const double lo = std::max(interval.a1, 0.0);
  const double hi = std::min(interval.a2, 1.0);
  for (int k = 0; k < samples; ++k) {
    const double alpha = k + 1 == samples ? hi : lo + (hi - lo) * k / (samples - 1);
    out.push_back({alpha, cost(v, alpha)});
  }
  return out;
}

}  // namespace crnq
