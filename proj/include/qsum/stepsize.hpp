#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>

#include "qsum/errors.hpp"
#include "qsum/problem.hpp"

namespace qsum {

// Scaling constant for the cyclic method:
//   C_{p,m} = L_max^{-1/p} * min{1, (2m)^{1-1/p}}.
inline double c_pm(double p, int m, double L_max) {
  if (!(p > 0.0)) throw std::invalid_argument("c_pm: p must be positive");
  if (m < 1) throw std::invalid_argument("c_pm: m must be >= 1");
  if (!(L_max > 0.0)) throw std::invalid_argument("c_pm: L_max must be positive");
  return std::pow(L_max, -1.0 / p) *
         std::min(1.0, std::pow(2.0 * m, 1.0 - 1.0 / p));
}

// Scaling constant for the randomized method:
//   R_{p,m} = L_max^{-1/p} * min{1, m^{1-1/p}}.
inline double r_pm(double p, int m, double L_max) {
  if (!(p > 0.0)) throw std::invalid_argument("r_pm: p must be positive");
  if (m < 1) throw std::invalid_argument("r_pm: m must be >= 1");
  if (!(L_max > 0.0)) throw std::invalid_argument("r_pm: L_max must be positive");
  return std::pow(L_max, -1.0 / p) * std::min(1.0, std::pow(m, 1.0 - 1.0 / p));
}

inline double c_pm(const OptimumMeta& meta) {
  return c_pm(meta.p, meta.m, meta.L_max);
}
inline double r_pm(const OptimumMeta& meta) {
  return r_pm(meta.p, meta.m, meta.L_max);
}

using GammaSchedule = std::function<double(long)>;

inline GammaSchedule constant_gamma(double g) {
  return [g](long) { return g; };
}

struct ConstantStep {
  double v = 1.5;
};

struct DiminishingStep {
  std::function<double(long)> schedule;

  // v / (1 + 0.1 k): slow enough to keep early steps useful, summable
  // nowhere, vanishing in the limit.
  static DiminishingStep standard(double v) {
    if (!(v > 0.0))
      throw std::invalid_argument("DiminishingStep: v must be positive");
    return DiminishingStep{[v](long k) { return v / (1.0 + 0.1 * static_cast<double>(k)); }};
  }
};

// v_k = gamma_k * (C_{p,m} / m^2) * (f(x_k) - f*)^{1/p}
struct DynamicStepI {
  GammaSchedule gamma = constant_gamma(1.0);
  double f_star = 0.0;
};

// v_k = gamma_k * (R_{p,m} / m) * (f(x_k) - f*)^{1/p}
struct DynamicStepII {
  GammaSchedule gamma = constant_gamma(1.0);
  double f_star = 0.0;
};

using StepsizeRule =
    std::variant<ConstantStep, DiminishingStep, DynamicStepI, DynamicStepII>;

inline bool needs_optimal_value(const StepsizeRule& rule) {
  return std::holds_alternative<DynamicStepI>(rule) ||
         std::holds_alternative<DynamicStepII>(rule);
}

namespace detail {
inline double checked_gamma(const GammaSchedule& gamma, long k) {
  if (!gamma) throw ConfigError("dynamic stepsize: missing gamma schedule");
  const double g = gamma(k);
  if (!(g > 0.0) || !(g < 2.0))
    throw ContractViolation("gamma schedule returned " + std::to_string(g) +
                            " at k=" + std::to_string(k) +
                            "; relaxation must stay inside (0,2)");
  return g;
}
}  // namespace detail

// Stepsize for iteration k at current sum value f_xk. Dynamic rules
// return 0 once f_xk <= f*: the target is met and stepping must stop.
inline double next_stepsize(const StepsizeRule& rule, long k, double f_xk,
                            const OptimumMeta& meta) {
  if (k < 0) throw std::invalid_argument("next_stepsize: negative iteration");
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, ConstantStep>) {
          if (!(r.v > 0.0))
            throw std::invalid_argument("ConstantStep: v must be positive");
          return r.v;
        } else if constexpr (std::is_same_v<R, DiminishingStep>) {
          if (!r.schedule)
            throw ConfigError("DiminishingStep: missing schedule");
          const double v = r.schedule(k);
          if (!(v > 0.0))
            throw ContractViolation("DiminishingStep: schedule returned " +
                                    std::to_string(v) + " at k=" +
                                    std::to_string(k));
          return v;
        } else if constexpr (std::is_same_v<R, DynamicStepI>) {
          const double gap = f_xk - r.f_star;
          if (gap <= 0.0) return 0.0;
          const double g = detail::checked_gamma(r.gamma, k);
          return g * (c_pm(meta) / (static_cast<double>(meta.m) * meta.m)) *
                 std::pow(gap, 1.0 / meta.p);
        } else {
          const double gap = f_xk - r.f_star;
          if (gap <= 0.0) return 0.0;
          const double g = detail::checked_gamma(r.gamma, k);
          return g * (r_pm(meta) / static_cast<double>(meta.m)) *
                 std::pow(gap, 1.0 / meta.p);
        }
      },
      rule);
}

// Worst-case residual value the cyclic method settles at under a
// constant stepsize v: f* + (m^2 v / (2 C_{p,m}))^p.
inline double incremental_error_bound(double v, const OptimumMeta& meta) {
  if (!(v > 0.0))
    throw std::invalid_argument("incremental_error_bound: v must be positive");
  const double md = static_cast<double>(meta.m);
  return std::pow(md * md * v / (2.0 * c_pm(meta)), meta.p);
}

// Randomized counterpart: f* + (m v / (2 R_{p,m}))^p.
inline double randomized_error_bound(double v, const OptimumMeta& meta) {
  if (!(v > 0.0))
    throw std::invalid_argument("randomized_error_bound: v must be positive");
  const double md = static_cast<double>(meta.m);
  return std::pow(md * v / (2.0 * r_pm(meta)), meta.p);
}

inline const char* stepsize_rule_name(const StepsizeRule& rule) {
  if (std::holds_alternative<ConstantStep>(rule)) return "constant";
  if (std::holds_alternative<DiminishingStep>(rule)) return "diminishing";
  if (std::holds_alternative<DynamicStepI>(rule)) return "dynamic1";
  return "dynamic2";
}

}  // namespace qsum
