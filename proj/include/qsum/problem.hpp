#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsum/errors.hpp"
#include "qsum/projections.hpp"
#include "qsum/types.hpp"

namespace qsum {

// Hoelder continuity data: |f(y) - f(x)| <= L * ||y - x||^p on the
// feasible set, with p in (0,1] for the guarantees used here.
struct HoelderParams {
  double p = 1.0;
  double L = 1.0;
};

// One quasi-convex component, exposed purely through oracles.
//
// unit_quasi_subgradient(x) must return a UNIT vector in the normal cone
// of the strict sublevel set {y : f(y) < f(x)} at x. Where that cone is
// the whole space (x minimizes f), the oracle still returns one fixed
// canonical direction so runs replay identically.
struct ComponentFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> unit_quasi_subgradient;
  double optimal_value = 0.0;  // f_i^* over the feasible set
  HoelderParams hoelder;
};

// Finite sum f = sum_i f_i minimized over the set carried by projector.
struct SumProblem {
  std::vector<ComponentFunction> components;
  Projector projector = Projector::whole_space();
  Eigen::Index dimension = 0;
  std::optional<double> optimal_value;  // f^*, when known
  std::optional<Vec> known_solution;    // a point of the solution set
  // True iff every component attains its own minimum at a common
  // feasible point. Caller-asserted; several guarantees need it.
  bool assumption1_holds = false;

  int component_count() const { return static_cast<int>(components.size()); }
};

inline void validate_problem(const SumProblem& p) {
  if (p.components.empty())
    throw std::invalid_argument("SumProblem: no components");
  if (p.dimension <= 0)
    throw std::invalid_argument("SumProblem: dimension must be positive");
  for (std::size_t i = 0; i < p.components.size(); ++i) {
    const auto& c = p.components[i];
    if (!c.value || !c.unit_quasi_subgradient)
      throw std::invalid_argument("SumProblem: component " + std::to_string(i) +
                                  " has a missing oracle");
    if (!(c.hoelder.p > 0.0) || !(c.hoelder.L > 0.0))
      throw std::invalid_argument("SumProblem: component " + std::to_string(i) +
                                  " has nonpositive Hoelder parameters");
  }
  if (p.assumption1_holds && p.optimal_value) {
    double sum = 0.0;
    for (const auto& c : p.components) sum += c.optimal_value;
    if (std::abs(sum - *p.optimal_value) > 1e-9)
      throw std::invalid_argument(
          "SumProblem: assumption1_holds but optimal_value differs from the "
          "sum of component optima by " +
          std::to_string(std::abs(sum - *p.optimal_value)));
  }
  if (p.known_solution && p.known_solution->size() != p.dimension)
    throw std::invalid_argument("SumProblem: known_solution dimension mismatch");
}

inline double component_value(const SumProblem& p, int i, const Vec& x) {
  const double v = p.components[static_cast<std::size_t>(i)].value(x);
  if (!std::isfinite(v))
    throw NumericError("component " + std::to_string(i) +
                       " returned a non-finite value");
  return v;
}

inline std::vector<double> component_values(const SumProblem& p, const Vec& x) {
  check_dims(x, p.dimension, "component_values");
  std::vector<double> vals(p.components.size());
  for (int i = 0; i < p.component_count(); ++i)
    vals[static_cast<std::size_t>(i)] = component_value(p, i, x);
  return vals;
}

inline double evaluate_sum(const SumProblem& p, const Vec& x) {
  check_dims(x, p.dimension, "evaluate_sum");
  double sum = 0.0;
  for (int i = 0; i < p.component_count(); ++i) sum += component_value(p, i, x);
  return sum;
}

inline bool at_component_optimum(const ComponentFunction& c, double value,
                                 double tol) {
  return value <= c.optimal_value + tol;
}

inline double max_hoelder_modulus(const SumProblem& p) {
  if (p.components.empty())
    throw std::invalid_argument("max_hoelder_modulus: no components");
  double L = p.components.front().hoelder.L;
  for (const auto& c : p.components) L = std::max(L, c.hoelder.L);
  return L;
}

// Shared data the stepsize constants depend on. Requires a common
// Hoelder order across components.
struct OptimumMeta {
  double p = 1.0;
  double L_max = 1.0;
  int m = 1;
};

inline OptimumMeta meta_of(const SumProblem& p) {
  validate_problem(p);
  const double order = p.components.front().hoelder.p;
  for (const auto& c : p.components)
    if (std::abs(c.hoelder.p - order) > 0.0)
      throw ConfigError(
          "meta_of: components carry different Hoelder orders; the shared "
          "stepsize constants are undefined");
  return OptimumMeta{order, max_hoelder_modulus(p), p.component_count()};
}

}  // namespace qsum
