#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qsum/errors.hpp"
#include "qsum/types.hpp"

namespace qsum {

// Closed halfspace {x : <a,x> >= b}.
struct Halfspace {
  Vec a;
  double b = 0.0;

  // Euclidean distance to the halfspace (0 when satisfied).
  double violation(const Vec& x) const {
    return std::max(0.0, (b - a.dot(x)) / a.norm());
  }
};

inline void check_dims(const Vec& x, Eigen::Index n, const char* what) {
  if (x.size() != n)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(x.size()) + " vs " +
                                std::to_string(n) + ")");
}

inline Vec project_halfspace(const Vec& x, const Halfspace& h) {
  check_dims(h.a, x.size(), "project_halfspace");
  const double nn = h.a.squaredNorm();
  if (nn == 0.0)
    throw std::invalid_argument("project_halfspace: zero normal vector");
  const double slack = h.b - h.a.dot(x);
  if (slack <= 0.0) return x;
  return x + (slack / nn) * h.a;
}

inline Vec project_box(const Vec& x, const Vec& lo, const Vec& hi) {
  check_dims(lo, x.size(), "project_box");
  check_dims(hi, x.size(), "project_box");
  if ((lo.array() > hi.array()).any())
    throw std::invalid_argument("project_box: lo exceeds hi");
  return x.cwiseMax(lo).cwiseMin(hi);
}

inline Vec project_floor(const Vec& x, double floor) {
  return x.cwiseMax(floor);
}

inline Vec project_nonneg(const Vec& x) { return project_floor(x, 0.0); }

enum class ProjectionStatus { Converged, MaxSweeps };

// Intersection of halfspaces, optionally with a uniform lower bound on
// every coordinate ({x : x_j >= *floor}).
struct PolyhedronSpec {
  std::vector<Halfspace> halfspaces;
  std::optional<double> floor;
  double tol = 1e-10;
  long max_sweeps = 10000;
};

inline double polyhedron_violation(const Vec& x, const PolyhedronSpec& spec) {
  double v = 0.0;
  if (spec.floor)
    v = std::max(v, *spec.floor - x.minCoeff());
  for (const auto& h : spec.halfspaces) v = std::max(v, h.violation(x));
  return v;
}

// Dykstra's cyclic projection with per-piece correction vectors. Unlike
// plain alternating projection this converges to the exact nearest point
// of the intersection, not merely some feasible point.
//
// Termination needs three conditions at once: worst violation, sweep
// displacement, and the change in every correction vector all below tol.
// The iterate alone is not enough: Dykstra has pinned phases where z sits
// still while corrections march linearly until a clamp releases. During
// such a phase the march is exactly affine, so the release sweep can be
// computed and skipped to directly; a march that can never release
// certifies an empty intersection (the dual is diverging). Exhausting
// max_sweeps returns the best iterate seen and reports MaxSweeps through
// *status.
inline Vec project_polyhedron(const Vec& x, const PolyhedronSpec& spec,
                              ProjectionStatus* status = nullptr) {
  for (const auto& h : spec.halfspaces) {
    check_dims(h.a, x.size(), "project_polyhedron");
    if (h.a.squaredNorm() == 0.0)
      throw std::invalid_argument("project_polyhedron: zero normal vector");
  }
  if (spec.tol <= 0.0)
    throw std::invalid_argument("project_polyhedron: tol must be positive");
  if (spec.max_sweeps < 1)
    throw std::invalid_argument("project_polyhedron: max_sweeps must be >= 1");

  const std::size_t npieces = spec.halfspaces.size() + (spec.floor ? 1 : 0);
  if (status) *status = ProjectionStatus::Converged;
  if (npieces == 0) return x;

  std::vector<Vec> corr(npieces, Vec::Zero(x.size()));
  std::vector<Vec> prev_corr = corr;
  std::vector<Vec> input(npieces, Vec::Zero(x.size()));
  std::vector<Vec> prev_input = input;
  Vec z = x;
  Vec best = x;
  double best_viol = polyhedron_violation(x, spec);
  int pin_streak = 0;

  for (long sweep = 0; sweep < spec.max_sweeps; ++sweep) {
    const Vec z_before = z;
    prev_corr = corr;
    std::swap(prev_input, input);
    std::size_t piece = 0;
    if (spec.floor) {
      input[piece] = z;
      const Vec y = z + corr[piece];
      const Vec pz = project_floor(y, *spec.floor);
      corr[piece] = y - pz;
      z = pz;
      ++piece;
    }
    for (const auto& h : spec.halfspaces) {
      input[piece] = z;
      const Vec y = z + corr[piece];
      const Vec pz = project_halfspace(y, h);
      corr[piece] = y - pz;
      z = pz;
      ++piece;
    }

    const double viol = polyhedron_violation(z, spec);
    if (viol < best_viol) {
      best_viol = viol;
      best = z;
    }

    const double moved = (z - z_before).norm();
    double corr_delta = 0.0;
    for (std::size_t i = 0; i < npieces; ++i)
      corr_delta = std::max(corr_delta, (corr[i] - prev_corr[i]).norm());
    if (viol <= spec.tol && moved <= spec.tol && corr_delta <= spec.tol)
      return z;

    const double pin_eps = 1e-13 * (1.0 + z.norm());
    bool pinned = sweep > 0 && moved <= pin_eps;
    for (std::size_t i = 0; i < npieces && pinned; ++i)
      pinned = (input[i] - prev_input[i]).norm() <= pin_eps;
    pin_streak = pinned ? pin_streak + 1 : 0;
    if (pin_streak < 2) continue;

    // Two identical sweeps: every held correction now changes by a fixed
    // amount per sweep. For each held clamp, count the sweeps until the
    // entry value it will see crosses the threshold and the hold lets go.
    // A hold is anything with a nonzero correction, even if its next entry
    // is already across (release in one sweep).
    double release = std::numeric_limits<double>::infinity();
    std::size_t pc = 0;
    if (spec.floor) {
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (corr[pc][j] == 0.0) continue;
        const double q = input[pc][j] + corr[pc][j];  // next sweep's entry
        if (q >= *spec.floor) {
          release = 1.0;
          continue;
        }
        const double vel = input[pc][j] - *spec.floor;
        if (vel > 0.0)
          release =
              std::min(release, 1.0 + std::ceil((*spec.floor - q) / vel));
      }
      ++pc;
    }
    for (const auto& h : spec.halfspaces) {
      if (corr[pc].squaredNorm() != 0.0) {
        const double u = h.a.dot(input[pc] + corr[pc]) - h.b;
        if (u >= 0.0) {
          release = 1.0;
        } else {
          const double vel = h.a.dot(input[pc]) - h.b;
          if (vel > 0.0)
            release = std::min(release, 1.0 + std::ceil(-u / vel));
        }
      }
      ++pc;
    }

    if (!std::isfinite(release)) {
      // Every hold marches deeper forever: the pin is permanent and the
      // violated piece can never be met.
      if (viol > std::max(100.0 * spec.tol, 1e-9))
        throw InfeasibleSetError(
            "project_polyhedron: corrections diverge with violation " +
            std::to_string(viol) + "; intersection is empty");
      // Sets touch within the noise band; nothing certifies optimality.
      if (status) *status = ProjectionStatus::MaxSweeps;
      return z;
    }

    // Skip straight to the sweep before the first release; that sweep then
    // runs normally and unclamps with exact bookkeeping.
    const long remaining = spec.max_sweeps - sweep - 1;
    const double skip = std::min(release - 1.0, static_cast<double>(remaining));
    const long jump = skip > 0.0 ? static_cast<long>(skip) : 0;
    if (jump > 0) {
      for (std::size_t i = 0; i < npieces; ++i)
        corr[i] += static_cast<double>(jump) * (corr[i] - prev_corr[i]);
      sweep += jump;
      pin_streak = 0;
    }
  }
  if (status) *status = ProjectionStatus::MaxSweeps;
  return best;
}

// Metric projector onto a closed convex set, selected at construction.
// Call sites treat it as a plain function Vec -> Vec.
class Projector {
 public:
  static Projector whole_space() { return Projector(WholeSpace{}); }
  static Projector orthant(double floor = 0.0) {
    return Projector(OrthantSet{floor});
  }
  static Projector box(Vec lo, Vec hi) {
    if (lo.size() != hi.size() || (lo.array() > hi.array()).any())
      throw std::invalid_argument("Projector::box: invalid bounds");
    return Projector(BoxSet{std::move(lo), std::move(hi)});
  }
  static Projector halfspace(Halfspace h) {
    if (h.a.squaredNorm() == 0.0)
      throw std::invalid_argument("Projector::halfspace: zero normal");
    return Projector(SingleHalfspace{std::move(h)});
  }
  static Projector polyhedron(PolyhedronSpec spec) {
    return Projector(std::move(spec));
  }

  Vec operator()(const Vec& x) const { return project(x, nullptr); }

  Vec project(const Vec& x, ProjectionStatus* status) const {
    if (status) *status = ProjectionStatus::Converged;
    if (!all_finite(x))
      throw std::invalid_argument("Projector: point has NaN/Inf entries");
    return std::visit(
        [&](const auto& s) -> Vec { return apply(s, x, status); }, set_);
  }

  bool contains(const Vec& x, double tol = 1e-9) const {
    return std::visit([&](const auto& s) { return inside(s, x, tol); }, set_);
  }

 private:
  struct WholeSpace {};
  struct OrthantSet {
    double floor;
  };
  struct BoxSet {
    Vec lo, hi;
  };
  struct SingleHalfspace {
    Halfspace h;
  };

  using SetSpec = std::variant<WholeSpace, OrthantSet, BoxSet, SingleHalfspace,
                               PolyhedronSpec>;

  explicit Projector(SetSpec s) : set_(std::move(s)) {}

  static Vec apply(const WholeSpace&, const Vec& x, ProjectionStatus*) {
    return x;
  }
  static Vec apply(const OrthantSet& s, const Vec& x, ProjectionStatus*) {
    return project_floor(x, s.floor);
  }
  static Vec apply(const BoxSet& s, const Vec& x, ProjectionStatus*) {
    return project_box(x, s.lo, s.hi);
  }
  static Vec apply(const SingleHalfspace& s, const Vec& x, ProjectionStatus*) {
    return project_halfspace(x, s.h);
  }
  static Vec apply(const PolyhedronSpec& s, const Vec& x,
                   ProjectionStatus* status) {
    return project_polyhedron(x, s, status);
  }

  static bool inside(const WholeSpace&, const Vec&, double) { return true; }
  static bool inside(const OrthantSet& s, const Vec& x, double tol) {
    return x.minCoeff() >= s.floor - tol;
  }
  static bool inside(const BoxSet& s, const Vec& x, double tol) {
    return (x.array() >= s.lo.array() - tol).all() &&
           (x.array() <= s.hi.array() + tol).all();
  }
  static bool inside(const SingleHalfspace& s, const Vec& x, double tol) {
    return s.h.violation(x) <= tol;
  }
  static bool inside(const PolyhedronSpec& s, const Vec& x, double tol) {
    return polyhedron_violation(x, s) <= tol;
  }

  SetSpec set_;
};

}  // namespace qsum
