#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsum/errors.hpp"
#include "qsum/problem.hpp"
#include "qsum/projections.hpp"
#include "qsum/rng.hpp"
#include "qsum/solvers.hpp"
#include "qsum/types.hpp"

namespace qsum {

// --- Worked 1-D instances -------------------------------------------------

// f1 = max{x,0}, f2 = max{-x,0}; sum |x|, minimized at 0, both components
// share that minimizer. Canonical unit directions +1 / -1 everywhere
// (at a component's minimum the normal cone is the whole line, so the
// canonical pick is still valid).
inline SumProblem make_example3() {
  SumProblem p;
  p.dimension = 1;
  p.projector = Projector::whole_space();
  ComponentFunction f1;
  f1.value = [](const Vec& x) { return std::max(x[0], 0.0); };
  f1.unit_quasi_subgradient = [](const Vec&) {
    Vec g(1);
    g[0] = 1.0;
    return g;
  };
  f1.optimal_value = 0.0;
  f1.hoelder = HoelderParams{1.0, 1.0};
  ComponentFunction f2;
  f2.value = [](const Vec& x) { return std::max(-x[0], 0.0); };
  f2.unit_quasi_subgradient = [](const Vec&) {
    Vec g(1);
    g[0] = -1.0;
    return g;
  };
  f2.optimal_value = 0.0;
  f2.hoelder = HoelderParams{1.0, 1.0};
  p.components = {std::move(f1), std::move(f2)};
  p.optimal_value = 0.0;
  Vec star(1);
  star[0] = 0.0;
  p.known_solution = star;
  p.assumption1_holds = true;
  return p;
}

// The selector that defeats the non-skipping cyclic method on
// make_example3(): +1 for the first component, -1 for the second,
// everywhere. Both are valid quasi-subgradient picks (at each component's
// minimum the normal cone is the whole line), yet the two steps cancel
// exactly, so x_{k+1} = x_k for any stepsize.
inline SubgradientSelector example3_adversarial_selector() {
  return [](int i, const Vec&) {
    Vec g(1);
    g[0] = (i == 0) ? 1.0 : -1.0;
    return g;
  };
}

// f1 = max{x+2,0} (modulus 1), f2 = max{-2x+2,0} (modulus 2); the sum is
// minimized at x = 1 with value 3, but the components' own minima are
// attained on disjoint sets, so no common minimizer exists.
inline SumProblem make_example4() {
  SumProblem p;
  p.dimension = 1;
  p.projector = Projector::whole_space();
  ComponentFunction f1;
  f1.value = [](const Vec& x) { return std::max(x[0] + 2.0, 0.0); };
  f1.unit_quasi_subgradient = [](const Vec&) {
    Vec g(1);
    g[0] = 1.0;
    return g;
  };
  f1.optimal_value = 0.0;
  f1.hoelder = HoelderParams{1.0, 1.0};
  ComponentFunction f2;
  f2.value = [](const Vec& x) { return std::max(-2.0 * x[0] + 2.0, 0.0); };
  f2.unit_quasi_subgradient = [](const Vec&) {
    Vec g(1);
    g[0] = -1.0;
    return g;
  };
  f2.optimal_value = 0.0;
  f2.hoelder = HoelderParams{1.0, 2.0};
  p.components = {std::move(f1), std::move(f2)};
  p.optimal_value = 3.0;
  Vec star(1);
  star[0] = 1.0;
  p.known_solution = star;
  p.assumption1_holds = false;
  return p;
}

// --- Convex feasibility as a sum problem ------------------------------------

// One convex constraint h(x) <= 0, exposed through its residual and a
// unit quasi-subgradient of max{h, 0}.
struct FeasibilityConstraint {
  std::function<double(const Vec&)> residual;
  std::function<Vec(const Vec&)> unit_quasi_subgradient;
  HoelderParams hoelder;
};

inline FeasibilityConstraint halfspace_constraint(Halfspace h) {
  const double norm = h.a.norm();
  if (norm == 0.0)
    throw std::invalid_argument("halfspace_constraint: zero normal");
  FeasibilityConstraint c;
  Vec a = h.a;
  const double b = h.b;
  c.residual = [a, b](const Vec& x) { return b - a.dot(x); };
  Vec g = -a / norm;
  c.unit_quasi_subgradient = [g](const Vec&) { return g; };
  c.hoelder = HoelderParams{1.0, norm};
  return c;
}

// Builds min sum_i max{h_i(x), 0} over X. Caller asserts the system has a
// feasible point inside X; the components then share every such point as
// a common minimizer with value 0.
inline SumProblem make_feasibility_problem(
    std::vector<FeasibilityConstraint> constraints, Projector X,
    Eigen::Index dimension) {
  if (constraints.empty())
    throw std::invalid_argument("make_feasibility_problem: no constraints");
  SumProblem p;
  p.dimension = dimension;
  p.projector = std::move(X);
  p.components.reserve(constraints.size());
  for (auto& c : constraints) {
    ComponentFunction f;
    auto residual = std::move(c.residual);
    f.value = [residual](const Vec& x) {
      return std::max(residual(x), 0.0);
    };
    f.unit_quasi_subgradient = std::move(c.unit_quasi_subgradient);
    f.optimal_value = 0.0;
    f.hoelder = c.hoelder;
    p.components.push_back(std::move(f));
  }
  p.optimal_value = 0.0;
  p.assumption1_holds = true;
  return p;
}

inline SumProblem make_feasibility_problem(const std::vector<Halfspace>& system,
                                           Projector X,
                                           Eigen::Index dimension) {
  std::vector<FeasibilityConstraint> cons;
  cons.reserve(system.size());
  for (const auto& h : system) cons.push_back(halfspace_constraint(h));
  return make_feasibility_problem(std::move(cons), std::move(X), dimension);
}

// Random halfspace system whose solution set contains a ball of the given
// margin around a known center. Unit normals; each offset leaves between
// margin and margin+1 of slack at the center.
struct RandomFeasibility {
  SumProblem problem;
  std::vector<Halfspace> solution_halfspaces;
  Vec center;
  double margin = 0.0;
};

namespace detail {
inline Vec random_unit(SplitMix64& rng, Eigen::Index n) {
  Vec u(n);
  double nn = 0.0;
  while (nn < 1e-12) {
    for (Eigen::Index j = 0; j < n; ++j) u[j] = rng.normal();
    nn = u.norm();
  }
  return u / nn;
}
}  // namespace detail

inline RandomFeasibility make_random_feasibility(Eigen::Index n, int m,
                                                 std::uint64_t seed,
                                                 double margin = 1.0) {
  if (n < 1 || m < 1)
    throw std::invalid_argument("make_random_feasibility: need n,m >= 1");
  if (!(margin > 0.0))
    throw std::invalid_argument("make_random_feasibility: margin must be > 0");
  SplitMix64 rng(seed);
  Vec center(n);
  for (Eigen::Index j = 0; j < n; ++j) center[j] = rng.uniform(-1.0, 1.0);

  std::vector<Halfspace> system;
  system.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Halfspace h;
    h.a = detail::random_unit(rng, n);
    h.b = h.a.dot(center) - (margin + rng.uniform());
    system.push_back(std::move(h));
  }

  RandomFeasibility out;
  out.problem =
      make_feasibility_problem(system, Projector::whole_space(), n);
  out.problem.known_solution = center;
  out.solution_halfspaces = std::move(system);
  out.center = center;
  out.margin = margin;
  return out;
}

// Exact membership in the generated solution set (no tolerance).
inline bool in_solution_set(const RandomFeasibility& rf, const Vec& x) {
  for (const auto& h : rf.solution_halfspaces)
    if (h.a.dot(x) < h.b) return false;
  return true;
}

inline Vec start_at_distance(const RandomFeasibility& rf, double dist,
                             std::uint64_t seed) {
  SplitMix64 rng(seed);
  return rf.center + dist * detail::random_unit(rng, rf.center.size());
}

// --- Operations-allocation benchmark ---------------------------------------
//
// m service units over n resource types. Unit i produces at Cobb-Douglas
// rate p_i(x) = a_{i,0} * prod_j x_j^{a_{i,j}} (exponents sum to 1) at
// affine cost c_i(x) = c_{i,0} + sum_j c_{i,j} x_j; its efficiency is the
// ratio R_i = p_i / c_i. Allocations satisfy x >= 0 and B x >= p_rhs.

constexpr double kDomainFloor = 1e-8;

struct MCDPEInstance {
  int m = 0, n = 0, s = 0;
  Eigen::MatrixXd a;  // m x (n+1): column 0 scale, columns 1..n exponents
  Eigen::MatrixXd c;  // m x (n+1): column 0 intercept, columns 1..n slopes
  Eigen::MatrixXd B;  // s x n
  Vec p_rhs;          // s
  std::uint64_t seed = 0;
};

inline void validate_instance(const MCDPEInstance& inst) {
  if (inst.m < 1 || inst.n < 1 || inst.s < 1)
    throw std::invalid_argument("MCDPEInstance: need m,n,s >= 1");
  if (inst.a.rows() != inst.m || inst.a.cols() != inst.n + 1)
    throw std::invalid_argument("MCDPEInstance: a must be m x (n+1)");
  if (inst.c.rows() != inst.m || inst.c.cols() != inst.n + 1)
    throw std::invalid_argument("MCDPEInstance: c must be m x (n+1)");
  if (inst.B.rows() != inst.s || inst.B.cols() != inst.n)
    throw std::invalid_argument("MCDPEInstance: B must be s x n");
  if (inst.p_rhs.size() != inst.s)
    throw std::invalid_argument("MCDPEInstance: p_rhs must have length s");
  for (int i = 0; i < inst.m; ++i) {
    const double sum = inst.a.row(i).tail(inst.n).sum();
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument(
          "MCDPEInstance: exponent row " + std::to_string(i) +
          " sums to " + std::to_string(sum) + ", expected 1");
  }
  if ((inst.a.array() < -1e-12).any() || (inst.c.array() < -1e-12).any() ||
      (inst.B.array() < -1e-12).any())
    throw std::invalid_argument("MCDPEInstance: negative coefficients");
}

inline MCDPEInstance generate_mcdpe(int m, int n, int s, std::uint64_t seed) {
  if (m < 1 || n < 1 || s < 1)
    throw std::invalid_argument("generate_mcdpe: need m,n,s >= 1");
  SplitMix64 rng(seed);
  MCDPEInstance inst;
  inst.m = m;
  inst.n = n;
  inst.s = s;
  inst.seed = seed;
  inst.a.resize(m, n + 1);
  inst.c.resize(m, n + 1);
  for (int i = 0; i < m; ++i) {
    inst.a(i, 0) = rng.uniform(0.0, 10.0);
    double sum = 0.0;
    for (int j = 1; j <= n; ++j) {
      inst.a(i, j) = rng.uniform();
      sum += inst.a(i, j);
    }
    if (sum < 1e-12) {
      for (int j = 1; j <= n; ++j) inst.a(i, j) = 1.0 / n;
    } else {
      for (int j = 1; j <= n; ++j) inst.a(i, j) /= sum;
    }
    for (int j = 0; j <= n; ++j) inst.c(i, j) = rng.uniform();
  }
  inst.B.resize(s, n);
  for (int t = 0; t < s; ++t)
    for (int j = 0; j < n; ++j) inst.B(t, j) = rng.uniform();
  inst.p_rhs.resize(s);
  for (int t = 0; t < s; ++t) inst.p_rhs[t] = rng.uniform(0.0, n / 2.0);
  return inst;
}

namespace detail {
inline void check_ratio_args(const MCDPEInstance& inst, int i, const Vec& x) {
  if (i < 0 || i >= inst.m)
    throw std::invalid_argument("ratio: component index out of range");
  check_dims(x, inst.n, "ratio");
  if (!all_finite(x))
    throw std::invalid_argument("ratio: point has NaN/Inf entries");
  if ((x.array() <= 0.0).any())
    throw std::domain_error(
        "ratio: Cobb-Douglas rates need strictly positive coordinates");
}

inline double cobb_douglas_rate(const MCDPEInstance& inst, int i,
                                const Vec& x) {
  const double a0 = inst.a(i, 0);
  if (a0 == 0.0) return 0.0;
  double lg = 0.0;
  for (int j = 0; j < inst.n; ++j)
    lg += inst.a(i, j + 1) * std::log(x[j]);
  return a0 * std::exp(lg);
}

inline double affine_cost(const MCDPEInstance& inst, int i, const Vec& x) {
  double c = inst.c(i, 0);
  for (int j = 0; j < inst.n; ++j) c += inst.c(i, j + 1) * x[j];
  return c;
}
}  // namespace detail

// Efficiency ratio R_i(x) = p_i(x) / c_i(x) on {x > 0}.
inline double mcdpe_ratio(const MCDPEInstance& inst, int i, const Vec& x) {
  detail::check_ratio_args(inst, i, x);
  const double rate = detail::cobb_douglas_rate(inst, i, x);
  const double cost = detail::affine_cost(inst, i, x);
  if (!(cost > 0.0))
    throw NumericError("ratio: nonpositive cost for component " +
                       std::to_string(i));
  const double r = rate / cost;
  if (!std::isfinite(r))
    throw NumericError("ratio: non-finite value for component " +
                       std::to_string(i));
  return r;
}

inline double sum_ratios(const MCDPEInstance& inst, const Vec& x) {
  double s = 0.0;
  for (int i = 0; i < inst.m; ++i) s += mcdpe_ratio(inst, i, x);
  return s;
}

// Unit quasi-subgradient shared by every sublevel-based transform of
// -R_i (the direct form -R_i and the shortfall form max{r - R_i, 0}
// alike): the steering direction d = grad p_i - R_i(x) grad c_i points
// where the ratio grows, so -d/||d|| is normal to the strict sublevel
// set. Throws DegenerateDirection where d vanishes (ratio-stationary
// point, e.g. the scale-invariant ridge when c_{i,0} = 0).
inline Vec ratio_quasi_subgradient(const MCDPEInstance& inst, int i,
                                   const Vec& x) {
  detail::check_ratio_args(inst, i, x);
  const double rate = detail::cobb_douglas_rate(inst, i, x);
  const double cost = detail::affine_cost(inst, i, x);
  if (!(cost > 0.0))
    throw NumericError("ratio_quasi_subgradient: nonpositive cost");
  const double lambda = rate / cost;
  Vec d(inst.n);
  double scale = 0.0;
  for (int j = 0; j < inst.n; ++j) {
    const double dp = rate * inst.a(i, j + 1) / x[j];
    const double dc = inst.c(i, j + 1);
    d[j] = dp - lambda * dc;
    scale += std::abs(dp) + std::abs(lambda * dc);
  }
  const double dn = d.norm();
  if (dn <= 1e-12 * std::max(1.0, scale))
    throw DegenerateDirection(
        "ratio_quasi_subgradient: steering direction vanished for component " +
        std::to_string(i) + "; point is ratio-stationary");
  return -d / dn;
}

// Feasible allocations {x : x >= floor, B x >= p_rhs}. The floor keeps
// iterates strictly inside the Cobb-Douglas domain.
inline Projector mcdpe_projector(const MCDPEInstance& inst,
                                 double floor = kDomainFloor) {
  PolyhedronSpec spec;
  spec.floor = floor;
  spec.halfspaces.reserve(static_cast<std::size_t>(inst.s));
  for (int t = 0; t < inst.s; ++t) {
    Halfspace h;
    h.a = inst.B.row(t).transpose();
    h.b = inst.p_rhs[t];
    if (h.a.squaredNorm() == 0.0) {
      if (h.b > 0.0)
        throw InfeasibleSetError(
            "mcdpe_projector: zero demand row with positive requirement");
      continue;  // vacuous row
    }
    spec.halfspaces.push_back(std::move(h));
  }
  return Projector::polyhedron(std::move(spec));
}

// Projected quasi-subgradient ascent on one ratio with the standard
// diminishing stepsize; returns the best value seen. A valid lower bound
// on sup R_i over the feasible set (it is R_i at some feasible point).
inline double estimate_component_maximum(const MCDPEInstance& inst, int i,
                                         long budget = 200,
                                         const Projector* feasible = nullptr,
                                         const Vec* start = nullptr) {
  if (budget < 0)
    throw std::invalid_argument("estimate_component_maximum: negative budget");
  Projector def = feasible ? Projector::whole_space() : mcdpe_projector(inst);
  const Projector& X = feasible ? *feasible : def;
  Vec x = X(start ? *start : Vec(Vec::Ones(inst.n)));
  double best = mcdpe_ratio(inst, i, x);
  for (long k = 0; k < budget; ++k) {
    Vec g;
    try {
      g = ratio_quasi_subgradient(inst, i, x);
    } catch (const DegenerateDirection&) {
      break;  // stationary for the ratio; no ascent direction left
    }
    const double v = 3.0 / (1.0 + 0.1 * static_cast<double>(k));
    x = X(x - v * g);
    best = std::max(best, mcdpe_ratio(inst, i, x));
  }
  return best;
}

// Per-component Hoelder moduli (order 1) estimated as the max
// finite-difference ratio over sampled feasible pairs. A sampled max is a
// lower estimate of the true modulus; box_hi controls the sampled region.
inline std::vector<double> estimate_ratio_moduli(const MCDPEInstance& inst,
                                                 int samples,
                                                 std::uint64_t seed,
                                                 double box_hi = 5.0) {
  if (samples < 2)
    throw std::invalid_argument("estimate_ratio_moduli: need samples >= 2");
  const Projector X = mcdpe_projector(inst);
  SplitMix64 rng(seed);
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) {
    Vec u(inst.n);
    for (int j = 0; j < inst.n; ++j)
      u[j] = rng.uniform(kDomainFloor, box_hi);
    pts.push_back(X(u));
  }
  std::vector<double> moduli(static_cast<std::size_t>(inst.m), 0.0);
  std::vector<double> vals(pts.size());
  for (int i = 0; i < inst.m; ++i) {
    for (std::size_t k = 0; k < pts.size(); ++k)
      vals[k] = mcdpe_ratio(inst, i, pts[k]);
    double L = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      for (std::size_t l = k + 1; l < pts.size(); ++l) {
        const double dist = (pts[k] - pts[l]).norm();
        if (dist > 1e-12)
          L = std::max(L, std::abs(vals[k] - vals[l]) / dist);
      }
    // A constant ratio satisfies the condition for every modulus; keep a
    // tiny positive one so stepsize constants stay defined.
    moduli[static_cast<std::size_t>(i)] = std::max(L, 1e-9);
  }
  return moduli;
}

// Shortfall form: components max{targets_i - R_i(x), 0} with zero
// optima. targets_attainable is the caller's assertion that some feasible
// allocation meets every target simultaneously; only then do the shared
// metadata fields claim a common minimizer with sum value 0.
inline SumProblem sor_to_sum_problem(const MCDPEInstance& inst,
                                     const std::vector<double>& targets,
                                     const std::vector<double>& moduli,
                                     double order = 1.0,
                                     bool targets_attainable = true) {
  validate_instance(inst);
  if (targets.size() != static_cast<std::size_t>(inst.m))
    throw std::invalid_argument("sor_to_sum_problem: need one target per unit");
  if (moduli.size() != static_cast<std::size_t>(inst.m))
    throw std::invalid_argument("sor_to_sum_problem: need one modulus per unit");
  for (double L : moduli)
    if (!(L > 0.0))
      throw ConfigError("sor_to_sum_problem: moduli must be positive");
  if (!(order > 0.0) || order > 1.0)
    throw ConfigError("sor_to_sum_problem: order must lie in (0,1]");

  SumProblem p;
  p.dimension = inst.n;
  p.projector = mcdpe_projector(inst);
  p.components.reserve(static_cast<std::size_t>(inst.m));
  for (int i = 0; i < inst.m; ++i) {
    ComponentFunction f;
    const double target = targets[static_cast<std::size_t>(i)];
    f.value = [inst, i, target](const Vec& x) {
      return std::max(target - mcdpe_ratio(inst, i, x), 0.0);
    };
    f.unit_quasi_subgradient = [inst, i](const Vec& x) {
      return ratio_quasi_subgradient(inst, i, x);
    };
    f.optimal_value = 0.0;
    f.hoelder = HoelderParams{order, moduli[static_cast<std::size_t>(i)]};
    p.components.push_back(std::move(f));
  }
  p.assumption1_holds = targets_attainable;
  if (targets_attainable) p.optimal_value = 0.0;
  return p;
}

// Direct form: components -R_i(x) with per-component optima -targets_i
// (targets are per-unit efficiency bounds, typically estimated). No
// common-minimizer claim and no known sum optimum.
inline SumProblem sor_direct_problem(const MCDPEInstance& inst,
                                     const std::vector<double>& targets,
                                     const std::vector<double>& moduli,
                                     double order = 1.0) {
  validate_instance(inst);
  if (targets.size() != static_cast<std::size_t>(inst.m))
    throw std::invalid_argument("sor_direct_problem: need one target per unit");
  if (moduli.size() != static_cast<std::size_t>(inst.m))
    throw std::invalid_argument("sor_direct_problem: need one modulus per unit");
  for (double L : moduli)
    if (!(L > 0.0))
      throw ConfigError("sor_direct_problem: moduli must be positive");
  if (!(order > 0.0) || order > 1.0)
    throw ConfigError("sor_direct_problem: order must lie in (0,1]");

  SumProblem p;
  p.dimension = inst.n;
  p.projector = mcdpe_projector(inst);
  p.components.reserve(static_cast<std::size_t>(inst.m));
  for (int i = 0; i < inst.m; ++i) {
    ComponentFunction f;
    f.value = [inst, i](const Vec& x) { return -mcdpe_ratio(inst, i, x); };
    f.unit_quasi_subgradient = [inst, i](const Vec& x) {
      return ratio_quasi_subgradient(inst, i, x);
    };
    f.optimal_value = -targets[static_cast<std::size_t>(i)];
    f.hoelder = HoelderParams{order, moduli[static_cast<std::size_t>(i)]};
    p.components.push_back(std::move(f));
  }
  p.assumption1_holds = false;
  return p;
}

// --- Instance serialization -------------------------------------------------

inline nlohmann::json mcdpe_to_json(const MCDPEInstance& inst) {
  validate_instance(inst);
  auto flatten = [](const Eigen::MatrixXd& M) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(M.size()));
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      for (Eigen::Index col = 0; col < M.cols(); ++col)
        out.push_back(M(r, col));
    return out;
  };
  nlohmann::json j;
  j["m"] = inst.m;
  j["n"] = inst.n;
  j["s"] = inst.s;
  j["a"] = flatten(inst.a);
  j["c"] = flatten(inst.c);
  j["B"] = flatten(inst.B);
  j["p_rhs"] = std::vector<double>(inst.p_rhs.data(),
                                   inst.p_rhs.data() + inst.p_rhs.size());
  j["seed"] = inst.seed;
  return j;
}

inline MCDPEInstance mcdpe_from_json(const nlohmann::json& j) {
  MCDPEInstance inst;
  try {
    inst.m = j.at("m").get<int>();
    inst.n = j.at("n").get<int>();
    inst.s = j.at("s").get<int>();
    inst.seed = j.at("seed").get<std::uint64_t>();
    const auto a = j.at("a").get<std::vector<double>>();
    const auto c = j.at("c").get<std::vector<double>>();
    const auto B = j.at("B").get<std::vector<double>>();
    const auto p = j.at("p_rhs").get<std::vector<double>>();
    if (inst.m < 1 || inst.n < 1 || inst.s < 1)
      throw std::invalid_argument("mcdpe_from_json: need m,n,s >= 1");
    const auto unflatten = [](const std::vector<double>& v, int rows,
                              int cols, const char* name) {
      if (v.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw std::invalid_argument(std::string("mcdpe_from_json: field ") +
                                    name + " has wrong length");
      Eigen::MatrixXd M(rows, cols);
      std::size_t idx = 0;
      for (int r = 0; r < rows; ++r)
        for (int col = 0; col < cols; ++col) M(r, col) = v[idx++];
      return M;
    };
    inst.a = unflatten(a, inst.m, inst.n + 1, "a");
    inst.c = unflatten(c, inst.m, inst.n + 1, "c");
    inst.B = unflatten(B, inst.s, inst.n, "B");
    if (p.size() != static_cast<std::size_t>(inst.s))
      throw std::invalid_argument("mcdpe_from_json: field p_rhs has wrong length");
    inst.p_rhs = Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("mcdpe_from_json: ") + e.what());
  }
  validate_instance(inst);
  return inst;
}

inline void save_mcdpe(const std::string& path, const MCDPEInstance& inst) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_mcdpe: cannot open " + path);
  out << mcdpe_to_json(inst).dump(2) << "\n";
  if (!out)
    throw std::runtime_error("save_mcdpe: write failed for " + path);
}

inline MCDPEInstance load_mcdpe(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_mcdpe: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("load_mcdpe: parse error: ") +
                                e.what());
  }
  return mcdpe_from_json(j);
}

}  // namespace qsum
