#pragma once

// Two-dimensional CTMC over (i, j) = (PU packets, SU packets) in system.
//
//   (i, j) -> (i, j+1)  at lambda_su
//   (i, j) -> (i+1, j)  at lambda_pu
//   (i, j) -> (i, j-1)  at mu_su * min(j, max(N - i, 0))
//   (i, j) -> (i-1, j)  at mu_pu * min(i, N)
//
// The infinite lattice is truncated to [0, i_max] x [0, j_max] by dropping
// arrivals that would leave it (reflecting truncation), which keeps the
// truncated generator a proper CTMC. States are indexed row-major, i then j.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "crnq/error.hpp"
#include "crnq/model.hpp"

namespace crnq {

struct TruncationSpec {
  int i_max = 0;
  int j_max = 0;
  double tail_tolerance = 1e-12;

  bool operator==(const TruncationSpec&) const = default;
};

struct Transition {
  int i;
  int j;
  double rate;
};

enum class SolverMethod {
  // Block elimination over SU levels; falls back to SparseLu if the residual
  // is not met.
  LevelReduction,
  SparseLu,
};

struct SolverOptions {
  double residual_tolerance = 1e-10;
  // Iterative-refinement passes allowed after the sparse factorization.
  int max_refinements = 8;
  SolverMethod method = SolverMethod::LevelReduction;
};

class JointPmf {
 public:
  JointPmf(NetworkModel model, TruncationSpec truncation, std::vector<double> probabilities,
           double residual)
      : model_(model),
        truncation_(truncation),
        probabilities_(std::move(probabilities)),
        residual_(residual) {
    achieved_tail_mass_ = boundary_mass_pu() + boundary_mass_su();
  }

  const NetworkModel& model() const noexcept { return model_; }
  const TruncationSpec& truncation() const noexcept { return truncation_; }
  int rows() const noexcept { return truncation_.i_max + 1; }
  int cols() const noexcept { return truncation_.j_max + 1; }

  double at(int i, int j) const {
    return probabilities_[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) +
                          static_cast<std::size_t>(j)];
  }
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }

  // Mass on the last PU row and the last SU column, the proxy for the mass
  // the truncation cut off.
  double boundary_mass_pu() const {
    double m = 0.0;
    for (int j = 0; j < cols(); ++j) m += at(truncation_.i_max, j);
    return m;
  }
  double boundary_mass_su() const {
    double m = 0.0;
    for (int i = 0; i < rows(); ++i) m += at(i, truncation_.j_max);
    return m;
  }
  double achieved_tail_mass() const noexcept { return achieved_tail_mass_; }
  // Max-norm of pi * Q on the truncated generator, in probability per second.
  double residual() const noexcept { return residual_; }

  double total() const {
    double s = 0.0;
    for (double p : probabilities_) s += p;
    return s;
  }

 private:
  NetworkModel model_;
  TruncationSpec truncation_;
  std::vector<double> probabilities_;
  double residual_;
  double achieved_tail_mass_ = 0.0;
};

inline std::vector<Transition> transition_rates(int i, int j, const NetworkModel& model) {
  if (i < 0 || j < 0) throw DomainError("CTMC states are non-negative");
  const int n = model.n_servers();
  std::vector<Transition> out;
  out.reserve(4);
  auto push = [&](int ti, int tj, double rate) {
    if (rate > 0.0) out.push_back({ti, tj, rate});
  };
  push(i, j + 1, model.su().lambda());
  push(i + 1, j, model.pu().lambda());
  if (j > 0) push(i, j - 1, model.su().mu() * std::min(j, std::max(n - i, 0)));
  if (i > 0) push(i - 1, j, model.pu().mu() * std::min(i, n));
  return out;
}

namespace detail {

inline std::size_t state_index(int i, int j, int j_max) {
  return static_cast<std::size_t>(i) * static_cast<std::size_t>(j_max + 1) +
         static_cast<std::size_t>(j);
}

// Transposed generator Q^T of the truncated chain, so that Q^T pi = 0.
inline Eigen::SparseMatrix<double> transposed_generator(const NetworkModel& model,
                                                        const TruncationSpec& trunc) {
  const std::size_t n_states =
      static_cast<std::size_t>(trunc.i_max + 1) * static_cast<std::size_t>(trunc.j_max + 1);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n_states * 5);
  for (int i = 0; i <= trunc.i_max; ++i) {
    for (int j = 0; j <= trunc.j_max; ++j) {
      const auto s = static_cast<Eigen::Index>(state_index(i, j, trunc.j_max));
      double out_rate = 0.0;
      for (const auto& t : transition_rates(i, j, model)) {
        if (t.i > trunc.i_max || t.j > trunc.j_max) continue;
        const auto target = static_cast<Eigen::Index>(state_index(t.i, t.j, trunc.j_max));
        triplets.emplace_back(target, s, t.rate);
        out_rate += t.rate;
      }
      triplets.emplace_back(s, s, -out_rate);
    }
  }
  Eigen::SparseMatrix<double> qt(static_cast<Eigen::Index>(n_states),
                                 static_cast<Eigen::Index>(n_states));
  qt.setFromTriplets(triplets.begin(), triplets.end());
  return qt;
}

inline double max_abs(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace detail

inline void validate_truncation(const NetworkModel& model, const TruncationSpec& trunc) {
  if (trunc.i_max < model.n_servers() || trunc.j_max < model.n_servers())
    throw DomainError("truncation bounds must be at least N on both axes");
  if (!(trunc.tail_tolerance > 0.0 && trunc.tail_tolerance <= 1e-3))
    throw DomainError("tail tolerance must lie in (0, 1e-3]");
}

namespace detail {

inline Eigen::VectorXd solve_sparse_lu(const Eigen::SparseMatrix<double>& qt, int max_refinements,
                                       double residual_tolerance) {
  const Eigen::Index n = qt.rows();
  Eigen::SparseMatrix<double> a = qt;
  for (Eigen::Index col = 0; col < a.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, col); it; ++it)
      if (it.row() == 0) it.valueRef() = 0.0;
  {
    std::vector<Eigen::Triplet<double>> ones;
    ones.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index col = 0; col < n; ++col) ones.emplace_back(0, col, 1.0);
    Eigen::SparseMatrix<double> norm_row(n, n);
    norm_row.setFromTriplets(ones.begin(), ones.end());
    a += norm_row;
  }
  a.prune(0.0);
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw NonConvergenceError(std::numeric_limits<double>::infinity());

  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(0) = 1.0;
  Eigen::VectorXd pi = lu.solve(b);
  double residual = max_abs(qt * pi);
  for (int pass = 0; pass < max_refinements && residual > residual_tolerance; ++pass) {
    const Eigen::VectorXd r = b - a * pi;
    pi += lu.solve(r);
    residual = max_abs(qt * pi);
  }
  return pi;
}

// Linear level reduction with SU count j as the level and PU count i as the
// phase. Going down from the top level, U_j = A1(j) + R_j A2(j+1) with
// R_j = lambda_su (-U_{j+1})^{-1}; then pi_0 U_0 = 0 and pi_{j+1} = pi_j R_j.
// Every R_j is entrywise non-negative, so no cancellation occurs.
inline Eigen::VectorXd solve_level_reduction(const NetworkModel& model,
                                             const TruncationSpec& trunc) {
  const int n = model.n_servers();
  const int m = trunc.i_max + 1;
  const int levels = trunc.j_max + 1;
  const double lambda_pu = model.pu().lambda();
  const double mu_pu = model.pu().mu();
  const double lambda_su = model.su().lambda();
  const double mu_su = model.su().mu();

  auto su_service = [&](int i, int j) { return mu_su * std::min(j, std::max(n - i, 0)); };

  // Within-level block: PU moves off the diagonal, total exit rate on it.
  auto local_block = [&](int j) {
    Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      double out = 0.0;
      if (i + 1 < m && lambda_pu > 0.0) {
        a1(i, i + 1) = lambda_pu;
        out += lambda_pu;
      }
      if (i > 0) {
        const double r = mu_pu * std::min(i, n);
        a1(i, i - 1) = r;
        out += r;
      }
      if (j + 1 < levels) out += lambda_su;
      if (j > 0) out += su_service(i, j);
      a1(i, i) = -out;
    }
    return a1;
  };

  std::vector<Eigen::MatrixXd> r(static_cast<std::size_t>(std::max(levels - 1, 0)));
  Eigen::MatrixXd u = local_block(levels - 1);
  for (int j = levels - 2; j >= 0; --j) {
    Eigen::MatrixXd neg_inv = (-u).partialPivLu().inverse();
    Eigen::MatrixXd rj = lambda_su * neg_inv;
    // Exact zeros stay zero; clip round-off of the wrong sign.
    rj = rj.cwiseMax(0.0);
    u = local_block(j);
    for (int i = 0; i < m; ++i) u.col(i) += rj.col(i) * su_service(i, j + 1);
    r[static_cast<std::size_t>(j)] = std::move(rj);
  }

  // pi_0 U_0 = 0 with sum(pi_0) = 1 as the first equation.
  Eigen::MatrixXd system = u.transpose();
  system.row(0).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(0) = 1.0;
  Eigen::RowVectorXd level = system.fullPivLu().solve(rhs).transpose().cwiseMax(0.0);

  Eigen::VectorXd pi(static_cast<Eigen::Index>(m) * levels);
  for (int j = 0; j < levels; ++j) {
    for (int i = 0; i < m; ++i)
      pi(static_cast<Eigen::Index>(state_index(i, j, trunc.j_max))) = level(i);
    if (j + 1 < levels) level = level * r[static_cast<std::size_t>(j)];
  }
  return pi;
}

}  // namespace detail

// Stationary law of the truncated chain, normalized, with the balance
// residual max-norm checked against the tolerance.
inline JointPmf stationary_distribution(const NetworkModel& model, const TruncationSpec& trunc,
                                        const SolverOptions& options = {}) {
  require_stable(model);
  validate_truncation(model, trunc);

  const Eigen::SparseMatrix<double> qt = detail::transposed_generator(model, trunc);
  auto finish = [&](Eigen::VectorXd pi) {
    // Round-off can leave entries at -1e-300 or so in the far tail.
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    return std::pair{pi, detail::max_abs(qt * pi)};
  };

  Eigen::VectorXd pi;
  double residual = std::numeric_limits<double>::infinity();
  if (options.method == SolverMethod::LevelReduction) {
    std::tie(pi, residual) = finish(detail::solve_level_reduction(model, trunc));
  }
  if (!(residual <= options.residual_tolerance)) {
    std::tie(pi, residual) = finish(
        detail::solve_sparse_lu(qt, options.max_refinements, options.residual_tolerance));
  }
  if (!(residual <= options.residual_tolerance)) throw NonConvergenceError(residual);

  return JointPmf(model, trunc, std::vector<double>(pi.data(), pi.data() + pi.size()), residual);
}

struct AutoTruncationOptions {
  double tail_tolerance = 1e-12;
  int cap = 16384;
  SolverOptions solver{};
};

// Doubles whichever axis still carries too much boundary mass and re-solves,
// returning the first solution whose boundary mass on each axis is below half
// the tolerance.
inline JointPmf solve_with_auto_truncation(const NetworkModel& model,
                                           const AutoTruncationOptions& options = {}) {
  require_stable(model);
  if (!(options.tail_tolerance > 0.0 && options.tail_tolerance <= 1e-3))
    throw DomainError("tail tolerance must lie in (0, 1e-3]");
  const int start = std::max(model.n_servers(), 4);
  TruncationSpec trunc{start, start, options.tail_tolerance};
  const double per_axis = options.tail_tolerance / 2.0;
  for (;;) {
    JointPmf pmf = stationary_distribution(model, trunc, options.solver);
    const bool grow_i = pmf.boundary_mass_pu() >= per_axis;
    const bool grow_j = pmf.boundary_mass_su() >= per_axis;
    if (!grow_i && !grow_j) return pmf;
    if ((grow_i && trunc.i_max >= options.cap) || (grow_j && trunc.j_max >= options.cap))
      throw TruncationCapError(pmf.achieved_tail_mass(), options.cap);
    if (grow_i) trunc.i_max = std::min(2 * trunc.i_max, options.cap);
    if (grow_j) trunc.j_max = std::min(2 * trunc.j_max, options.cap);
  }
}

inline TruncationSpec choose_truncation(const NetworkModel& model, double tail_tolerance,
                                        int cap = 16384) {
  return solve_with_auto_truncation(model, {tail_tolerance, cap, {}}).truncation();
}

struct Marginals {
  std::vector<double> pu;
  std::vector<double> su;
};

inline Marginals marginals(const JointPmf& pmf) {
  Marginals m{std::vector<double>(static_cast<std::size_t>(pmf.rows()), 0.0),
              std::vector<double>(static_cast<std::size_t>(pmf.cols()), 0.0)};
  for (int i = 0; i < pmf.rows(); ++i)
    for (int j = 0; j < pmf.cols(); ++j) {
      const double p = pmf.at(i, j);
      m.pu[static_cast<std::size_t>(i)] += p;
      m.su[static_cast<std::size_t>(j)] += p;
    }
  return m;
}

inline double mean_of(const std::vector<double>& pmf) {
  double m = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) m += static_cast<double>(k) * pmf[k];
  return m;
}

struct ClassDelays {
  std::optional<double> d_pu;
  std::optional<double> d_su;
  double mean_q_pu = 0.0;
  double mean_q_su = 0.0;
};

// Little's law per class; a class with no arrivals has no defined delay.
inline ClassDelays delays_from_pmf(const JointPmf& pmf) {
  const auto m = marginals(pmf);
  ClassDelays out;
  out.mean_q_pu = mean_of(m.pu);
  out.mean_q_su = mean_of(m.su);
  const auto& model = pmf.model();
  if (model.pu().lambda() > 0.0) out.d_pu = out.mean_q_pu / model.pu().lambda();
  if (model.su().lambda() > 0.0) out.d_su = out.mean_q_su / model.su().lambda();
  return out;
}

// Per-state balance defect (inflow - outflow) of the truncated chain.
inline std::vector<double> balance_defects(const JointPmf& pmf) {
  const auto qt = detail::transposed_generator(pmf.model(), pmf.truncation());
  const Eigen::Map<const Eigen::VectorXd> pi(pmf.probabilities().data(),
                                             static_cast<Eigen::Index>(pmf.probabilities().size()));
  const Eigen::VectorXd r = qt * pi;
  return {r.data(), r.data() + r.size()};
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = std::max(p.size(), q.size());
  double tv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k < p.size() ? p[k] : 0.0;
    const double b = k < q.size() ? q[k] : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

}  // namespace crnq
