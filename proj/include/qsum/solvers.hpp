#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsum/errors.hpp"
#include "qsum/problem.hpp"
#include "qsum/projections.hpp"
#include "qsum/rng.hpp"
#include "qsum/stepsize.hpp"
#include "qsum/types.hpp"

namespace qsum {

// Component visit order across cycles. Shuffle redraws a permutation per
// cycle from the run seed; Shift starts cycle k at component k mod m.
enum class Reorder { Fixed, Shuffle, Shift };

enum class RunStatus { TargetReached, MaxIterations, Stalled };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::TargetReached: return "target_reached";
    case RunStatus::MaxIterations: return "max_iterations";
    default: return "stalled";
  }
}

struct StopCriteria {
  long max_iterations = 1000;
  // Stop once f(x_k) - f* <= target_gap. Needs problem.optimal_value.
  std::optional<double> target_gap;
  // Stop after this many iterations without improving the best value.
  std::optional<long> stall_window;
};

// Record j describes iterate x_j together with the step that produced it:
// stepsize_used is v_{j-1} (0 at j=0), subgradient_evals is cumulative,
// active_index is the randomized pick omega_{j-1} where applicable.
struct IterationRecord {
  long k = 0;
  Vec x;
  double f_value = 0.0;
  double stepsize_used = 0.0;
  long subgradient_evals = 0;
  std::optional<double> dist_to_known_solution;
  std::optional<int> active_index;
};

struct RunResult {
  std::vector<IterationRecord> trajectory;
  double best_value = std::numeric_limits<double>::infinity();
  Vec best_point;
  RunStatus status = RunStatus::MaxIterations;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;

  const IterationRecord& final_record() const { return trajectory.back(); }
  long total_subgradient_evals() const {
    return trajectory.empty() ? 0 : trajectory.back().subgradient_evals;
  }
};

struct CycleResult {
  Vec x;
  long evals = 0;  // subgradient evaluations == non-skipped steps
};

namespace detail {

inline Vec checked_unit_subgradient(const SumProblem& p, int i, const Vec& z) {
  const auto& c = p.components[static_cast<std::size_t>(i)];
  Vec g = c.unit_quasi_subgradient(z);
  check_dims(g, z.size(), "unit_quasi_subgradient");
  if (!all_finite(g))
    throw ContractViolation("component " + std::to_string(i) +
                            " returned a non-finite quasi-subgradient");
  const double n = g.norm();
  if (std::abs(n - 1.0) > 1e-9)
    throw ContractViolation("component " + std::to_string(i) +
                            " returned a quasi-subgradient with norm " +
                            std::to_string(n) + "; unit norm required");
  return g;
}

inline void check_start(const SumProblem& p, const Vec& x0) {
  validate_problem(p);
  check_dims(x0, p.dimension, "starting point");
  if (!all_finite(x0))
    throw std::invalid_argument("starting point has NaN/Inf entries");
}

inline void check_rule_support(const SumProblem& p, const StepsizeRule& rule,
                               const StopCriteria& stop) {
  if (needs_optimal_value(rule) && !p.optimal_value)
    throw ConfigError(
        "dynamic stepsize rule requires problem.optimal_value");
  if (stop.target_gap && !p.optimal_value)
    throw ConfigError("target_gap stopping requires problem.optimal_value");
}

}  // namespace detail

// One full pass of the skip-aware cyclic method: z starts at x_k; each
// component whose value exceeds its own optimum by more than tol_opt
// contributes one projected unit-quasi-subgradient step of length v_k.
// `order` overrides the visit order (values must be a permutation of
// 0..m-1; not re-validated here).
inline CycleResult incsgm_cycle(const SumProblem& problem, const Vec& x_k,
                                double v_k, double tol_opt = 1e-9,
                                const std::vector<int>* order = nullptr) {
  check_dims(x_k, problem.dimension, "incsgm_cycle");
  if (!(v_k > 0.0))
    throw std::invalid_argument("incsgm_cycle: stepsize must be positive");
  if (tol_opt < 0.0)
    throw std::invalid_argument("incsgm_cycle: tol_opt must be >= 0");

  Vec z = x_k;
  long evals = 0;
  const int m = problem.component_count();
  for (int slot = 0; slot < m; ++slot) {
    const int i = order ? (*order)[static_cast<std::size_t>(slot)] : slot;
    const auto& c = problem.components[static_cast<std::size_t>(i)];
    const double fi = component_value(problem, i, z);
    if (at_component_optimum(c, fi, tol_opt)) continue;
    const Vec g = detail::checked_unit_subgradient(problem, i, z);
    ++evals;
    z = problem.projector(z - v_k * g);
  }
  return CycleResult{std::move(z), evals};
}

// Subgradient choice for the classical (non-skipping) cyclic pass.
// Returns any subgradient; a zero vector is allowed where 0 is a valid
// subgradient.
using SubgradientSelector = std::function<Vec(int, const Vec&)>;

// One pass of the classical cyclic subgradient method: every component
// steps, including components already at their minimum. Kept as the foil
// for the skip rule; with an adversarial selector this provably stalls
// where the skip-aware cycle converges.
//
// When the problem carries a known solution, each selector output is
// spot-checked against it: whenever f_i(x*) < f_i(z), any valid
// quasi-subgradient points away from the better point, <g, x* - z> <= 0.
inline Vec classical_incremental_cycle(const SumProblem& problem,
                                       const Vec& x_k, double v_k,
                                       const SubgradientSelector& selector) {
  check_dims(x_k, problem.dimension, "classical_incremental_cycle");
  if (!(v_k > 0.0))
    throw std::invalid_argument(
        "classical_incremental_cycle: stepsize must be positive");
  if (!selector)
    throw std::invalid_argument(
        "classical_incremental_cycle: missing subgradient selector");

  Vec z = x_k;
  for (int i = 0; i < problem.component_count(); ++i) {
    Vec g = selector(i, z);
    check_dims(g, z.size(), "subgradient selector");
    if (!all_finite(g))
      throw ContractViolation("selector returned a non-finite subgradient");
    if (problem.known_solution) {
      const Vec& xs = *problem.known_solution;
      const double fz = component_value(problem, i, z);
      const double fs = problem.components[static_cast<std::size_t>(i)].value(xs);
      const double slack = 1e-9 * (1.0 + (xs - z).norm());
      if (fs < fz - 1e-9 && g.dot(xs - z) > slack)
        throw ContractViolation(
            "selector output for component " + std::to_string(i) +
            " points toward the known better point; not a quasi-subgradient");
    }
    z = problem.projector(z - v_k * g);
  }
  return z;
}

struct RandStepResult {
  Vec x;
  int picked = -1;  // -1 when every component already sits at its optimum
  long evals = 0;
  bool already_optimal = false;
};

namespace detail {

inline RandStepResult randsgm_step_given(const SumProblem& problem,
                                         const Vec& x,
                                         const std::vector<double>& comps,
                                         double v, double tol_opt,
                                         SplitMix64& rng) {
  std::vector<int> violated;
  violated.reserve(comps.size());
  for (int i = 0; i < problem.component_count(); ++i)
    if (!at_component_optimum(problem.components[static_cast<std::size_t>(i)],
                              comps[static_cast<std::size_t>(i)], tol_opt))
      violated.push_back(i);
  if (violated.empty()) return RandStepResult{x, -1, 0, true};

  const int w = violated[static_cast<std::size_t>(
      rng.below(static_cast<std::uint64_t>(violated.size())))];
  const Vec g = checked_unit_subgradient(problem, w, x);
  Vec next = problem.projector(x - v * g);
  return RandStepResult{std::move(next), w, 1, false};
}

}  // namespace detail

// One step of the randomized variant: draw omega uniformly from the
// components still above their own optimum (by more than tol_opt), take
// one projected unit step there. If none are violated the point is
// returned unchanged and flagged already_optimal.
inline RandStepResult randsgm_step(const SumProblem& problem, const Vec& x,
                                   double v, double tol_opt, SplitMix64& rng) {
  check_dims(x, problem.dimension, "randsgm_step");
  if (!(v > 0.0))
    throw std::invalid_argument("randsgm_step: stepsize must be positive");
  if (tol_opt < 0.0)
    throw std::invalid_argument("randsgm_step: tol_opt must be >= 0");
  const std::vector<double> comps = component_values(problem, x);
  return detail::randsgm_step_given(problem, x, comps, v, tol_opt, rng);
}

namespace detail {

class RunRecorder {
 public:
  RunRecorder(const SumProblem& p, const Vec& x0, std::uint64_t seed)
      : problem_(p), start_(std::chrono::steady_clock::now()) {
    result_.seed = seed;
    result_.best_point = x0;
  }

  // Appends the record for iterate x at index k and keeps the incumbent.
  double observe(long k, const Vec& x, const std::vector<double>& comps,
                 double stepsize_used, long evals_total,
                 std::optional<int> active) {
    const double f = std::accumulate(comps.begin(), comps.end(), 0.0);
    IterationRecord rec;
    rec.k = k;
    rec.x = x;
    rec.f_value = f;
    rec.stepsize_used = stepsize_used;
    rec.subgradient_evals = evals_total;
    if (problem_.known_solution)
      rec.dist_to_known_solution = (x - *problem_.known_solution).norm();
    rec.active_index = active;
    result_.trajectory.push_back(std::move(rec));
    if (f < result_.best_value - improvement_slack()) last_improve_ = k;
    if (f < result_.best_value) {
      result_.best_value = f;
      result_.best_point = x;
    }
    return f;
  }

  bool stalled(long k, const StopCriteria& stop) const {
    return stop.stall_window && k - last_improve_ >= *stop.stall_window;
  }

  RunResult finish(RunStatus status) {
    result_.status = status;
    result_.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    return std::move(result_);
  }

 private:
  double improvement_slack() const {
    return result_.trajectory.empty()
               ? 0.0
               : 1e-12 * (1.0 + std::abs(result_.best_value));
  }

  const SumProblem& problem_;
  std::chrono::steady_clock::time_point start_;
  RunResult result_;
  long last_improve_ = 0;
};

inline bool all_components_optimal(const SumProblem& p,
                                   const std::vector<double>& comps,
                                   double tol_opt) {
  for (int i = 0; i < p.component_count(); ++i)
    if (!at_component_optimum(p.components[static_cast<std::size_t>(i)],
                              comps[static_cast<std::size_t>(i)], tol_opt))
      return false;
  return true;
}

inline OptimumMeta meta_for_rule(const SumProblem& p,
                                 const StepsizeRule& rule) {
  if (needs_optimal_value(rule)) return meta_of(p);
  // Constant/diminishing rules never read p, L_max; don't demand a
  // shared Hoelder order for them.
  return OptimumMeta{1.0, 1.0, p.component_count()};
}

}  // namespace detail

// Runs the skip-aware cyclic method from x0 (projected onto the feasible
// set first). Stops at the first satisfied criterion: target_gap, every
// component within tol_opt of its own optimum, stall window exceeded, or
// max_iterations. `seed` only matters for Reorder::Shuffle.
inline RunResult incsgm_run(const SumProblem& problem, const Vec& x0,
                            const StepsizeRule& rule, const StopCriteria& stop,
                            double tol_opt = 1e-9,
                            Reorder reorder = Reorder::Fixed,
                            std::uint64_t seed = 0) {
  detail::check_start(problem, x0);
  detail::check_rule_support(problem, rule, stop);
  if (tol_opt < 0.0)
    throw std::invalid_argument("incsgm_run: tol_opt must be >= 0");
  const OptimumMeta meta = detail::meta_for_rule(problem, rule);
  const int m = problem.component_count();

  Vec x = problem.projector(x0);
  detail::RunRecorder rec(problem, x, seed);
  SplitMix64 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);

  double last_v = 0.0;
  long evals_total = 0;
  for (long k = 0;; ++k) {
    const std::vector<double> comps = component_values(problem, x);
    const double f = rec.observe(k, x, comps, last_v, evals_total, std::nullopt);
    if (stop.target_gap && f - *problem.optimal_value <= *stop.target_gap)
      return rec.finish(RunStatus::TargetReached);
    if (detail::all_components_optimal(problem, comps, tol_opt))
      return rec.finish(RunStatus::TargetReached);
    if (rec.stalled(k, stop)) return rec.finish(RunStatus::Stalled);
    if (k >= stop.max_iterations) return rec.finish(RunStatus::MaxIterations);

    const double v = next_stepsize(rule, k, f, meta);
    if (v == 0.0) return rec.finish(RunStatus::TargetReached);

    if (reorder == Reorder::Shuffle) {
      for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(i + 1)]);
    } else if (reorder == Reorder::Shift) {
      for (int i = 0; i < m; ++i)
        order[static_cast<std::size_t>(i)] =
            static_cast<int>((k + i) % static_cast<long>(m));
    }
    CycleResult cr = incsgm_cycle(problem, x, v, tol_opt, &order);
    x = std::move(cr.x);
    evals_total += cr.evals;
    last_v = v;
  }
}

// Classical non-skipping cyclic method, for baseline comparisons.
inline RunResult classical_incremental_run(const SumProblem& problem,
                                           const Vec& x0,
                                           const StepsizeRule& rule,
                                           const StopCriteria& stop,
                                           const SubgradientSelector& selector) {
  detail::check_start(problem, x0);
  detail::check_rule_support(problem, rule, stop);
  const OptimumMeta meta = detail::meta_for_rule(problem, rule);

  Vec x = problem.projector(x0);
  detail::RunRecorder rec(problem, x, 0);
  double last_v = 0.0;
  for (long k = 0;; ++k) {
    const std::vector<double> comps = component_values(problem, x);
    const double f = rec.observe(k, x, comps, last_v, k, std::nullopt);
    if (stop.target_gap && f - *problem.optimal_value <= *stop.target_gap)
      return rec.finish(RunStatus::TargetReached);
    if (rec.stalled(k, stop)) return rec.finish(RunStatus::Stalled);
    if (k >= stop.max_iterations) return rec.finish(RunStatus::MaxIterations);
    const double v = next_stepsize(rule, k, f, meta);
    if (v == 0.0) return rec.finish(RunStatus::TargetReached);
    x = classical_incremental_cycle(problem, x, v, selector);
    last_v = v;
  }
}

// Runs the randomized single-component method. Each iteration draws one
// still-violated component uniformly (fresh stream from `seed`) and takes
// one projected unit step there.
inline RunResult randsgm_run(const SumProblem& problem, const Vec& x0,
                             const StepsizeRule& rule, const StopCriteria& stop,
                             std::uint64_t seed, double tol_opt = 1e-9) {
  detail::check_start(problem, x0);
  detail::check_rule_support(problem, rule, stop);
  if (tol_opt < 0.0)
    throw std::invalid_argument("randsgm_run: tol_opt must be >= 0");
  const OptimumMeta meta = detail::meta_for_rule(problem, rule);

  Vec x = problem.projector(x0);
  detail::RunRecorder rec(problem, x, seed);
  SplitMix64 rng(seed);
  double last_v = 0.0;
  long evals_total = 0;
  std::optional<int> last_pick;
  for (long k = 0;; ++k) {
    const std::vector<double> comps = component_values(problem, x);
    const double f = rec.observe(k, x, comps, last_v, evals_total, last_pick);
    if (stop.target_gap && f - *problem.optimal_value <= *stop.target_gap)
      return rec.finish(RunStatus::TargetReached);
    if (detail::all_components_optimal(problem, comps, tol_opt))
      return rec.finish(RunStatus::TargetReached);
    if (rec.stalled(k, stop)) return rec.finish(RunStatus::Stalled);
    if (k >= stop.max_iterations) return rec.finish(RunStatus::MaxIterations);

    const double v = next_stepsize(rule, k, f, meta);
    if (v == 0.0) return rec.finish(RunStatus::TargetReached);
    RandStepResult st = detail::randsgm_step_given(problem, x, comps, v,
                                                   tol_opt, rng);
    x = std::move(st.x);
    evals_total += st.evals;
    last_v = v;
    last_pick = st.picked;
  }
}

// Cyclic single-component method for zero-target component systems
// (f_i^* = 0 for every i): inspect component k mod m, and if its value
// exceeds tol_opt take one projected step of length
// gamma_k * (f_i(x_k) / L_i)^(1/p_i). Stops once every component value is
// within tol_opt of zero.
inline RunResult sgpm_run(const SumProblem& problem, const Vec& x0,
                          const GammaSchedule& gamma, const StopCriteria& stop,
                          double tol_opt = 1e-9) {
  detail::check_start(problem, x0);
  if (tol_opt < 0.0)
    throw std::invalid_argument("sgpm_run: tol_opt must be >= 0");
  for (const auto& c : problem.components)
    if (c.optimal_value != 0.0)
      throw ConfigError(
          "sgpm_run requires every component optimum to be exactly 0; "
          "reformulate targets first");
  if (stop.target_gap && !problem.optimal_value)
    throw ConfigError("target_gap stopping requires problem.optimal_value");

  const int m = problem.component_count();
  Vec x = problem.projector(x0);
  detail::RunRecorder rec(problem, x, 0);
  double last_v = 0.0;
  long evals_total = 0;
  std::optional<int> last_stepped;
  for (long k = 0;; ++k) {
    const std::vector<double> comps = component_values(problem, x);
    const double f = rec.observe(k, x, comps, last_v, evals_total, last_stepped);
    if (stop.target_gap && f - *problem.optimal_value <= *stop.target_gap)
      return rec.finish(RunStatus::TargetReached);
    if (detail::all_components_optimal(problem, comps, tol_opt))
      return rec.finish(RunStatus::TargetReached);
    if (rec.stalled(k, stop)) return rec.finish(RunStatus::Stalled);
    if (k >= stop.max_iterations) return rec.finish(RunStatus::MaxIterations);

    const int i = static_cast<int>(k % static_cast<long>(m));
    const double fi = comps[static_cast<std::size_t>(i)];
    if (fi > tol_opt) {
      const auto& h = problem.components[static_cast<std::size_t>(i)].hoelder;
      const double g = detail::checked_gamma(gamma, k);
      const double v = g * std::pow(fi / h.L, 1.0 / h.p);
      const Vec d = detail::checked_unit_subgradient(problem, i, x);
      x = problem.projector(x - v * d);
      ++evals_total;
      last_v = v;
      last_stepped = i;
    } else {
      last_v = 0.0;
      last_stepped.reset();
    }
  }
}

// Right-hand side of the per-cycle contraction estimate for the cyclic
// method: ||x_k - x*||^2 - 2 v C_{p,m} (f(x_k) - f*)^(1/p) + m^2 v^2.
inline double incremental_step_bound(const Vec& x_k, double v_k,
                                     const OptimumMeta& meta, double f_xk,
                                     double f_star, const Vec& x_star) {
  const double gap = std::max(0.0, f_xk - f_star);
  const double md = static_cast<double>(meta.m);
  return (x_k - x_star).squaredNorm() -
         2.0 * v_k * c_pm(meta) * std::pow(gap, 1.0 / meta.p) +
         md * md * v_k * v_k;
}

// Same shape for the expected randomized step:
// ||x_k - x*||^2 - 2 v (R_{p,m}/m) (f(x_k) - f*)^(1/p) + v^2.
inline double randomized_step_bound(const Vec& x_k, double v_k,
                                    const OptimumMeta& meta, double f_xk,
                                    double f_star, const Vec& x_star) {
  const double gap = std::max(0.0, f_xk - f_star);
  return (x_k - x_star).squaredNorm() -
         2.0 * v_k * (r_pm(meta) / static_cast<double>(meta.m)) *
             std::pow(gap, 1.0 / meta.p) +
         v_k * v_k;
}

// True iff one observed cycle respects the contraction estimate, with a
// relative slack for float noise.
inline bool check_basic_inequality(const Vec& x_k, const Vec& x_next,
                                   double v_k, const OptimumMeta& meta,
                                   double f_xk, double f_star,
                                   const Vec& x_star) {
  const double lhs = (x_next - x_star).squaredNorm();
  const double rhs =
      incremental_step_bound(x_k, v_k, meta, f_xk, f_star, x_star);
  return lhs <= rhs + 1e-7 * (1.0 + (x_k - x_star).squaredNorm());
}

}  // namespace qsum
