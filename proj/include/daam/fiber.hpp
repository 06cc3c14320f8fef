#pragma once

// Allocation fibers F_w = f^{-1}(w). In thrust coordinates u = v .* |v| a fiber
// is the affine set {u0 + N t}, and the saturation limits form a box, so every
// fiber is charted by the nullspace coordinates t.

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "daam/model.hpp"

namespace daam {

struct FiberChart {
  Eigen::VectorXd target;      ///< w
  Eigen::VectorXd particular;  ///< minimum-norm u0 with A u0 = w
  Eigen::MatrixXd nullspace;   ///< N, orthonormal columns spanning ker A
  Eigen::VectorXd bounds;      ///< |u_i| <= bounds(i)
  Eigen::MatrixXd alloc;       ///< A, kept for the box-intersection test

  Eigen::Index dim() const { return nullspace.cols(); }

  Eigen::VectorXd thrust_at(const Eigen::VectorXd& t) const {
    return particular + nullspace * t;
  }
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Chart-space region where the fiber lies inside the closed saturation box.
/// For one-dimensional fibers `intervals` is exact (at most one interval,
/// since the region is convex). For higher dimensions only the bounding box of
/// the feasible polytope is populated; use is_feasible as the membership
/// predicate.
struct FeasibleRegion {
  std::vector<Interval> intervals;
  Eigen::VectorXd box_lower;
  Eigen::VectorXd box_upper;
  bool empty = true;
};

/// Per-component extremes of A u over the saturation box.
struct AchievableRange {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool contains(const Eigen::VectorXd& w, double tol = 1e-12) const;
};

AchievableRange achievable_range(const Model& model);

/// Minimum-norm particular solution plus an orthonormal kernel basis, both from
/// one SVD of A. Each basis column has its first nonzero entry positive.
FiberChart build_chart(const Model& model, const Eigen::VectorXd& w);

/// Spins at chart coordinate t.
Eigen::VectorXd chart_point(const FiberChart& chart, const Eigen::VectorXd& t);

FeasibleRegion feasible_t_region(const FiberChart& chart);

/// True when every |u_i(t)| <= bounds(i) * (1 + rel_tol).
bool is_feasible(const FiberChart& chart, const Eigen::VectorXd& t,
                 double rel_tol = 0.0);

/// Closed-form chart of the three-rotor, two-force family
///   f1 = a1 u1 + a2 u2 + a3 u3,   f2 = c1 u1 - c2 u2
/// parameterized by t = u3.
struct ThreeByTwoParams {
  std::array<double, 3> a{1.0, 1.0, 1.0};
  std::array<double, 2> c{1.0, 1.0};
};

/// Spins on the (w1, w2) fiber at t = u3; throws Error(domain_error) when
/// c2 = 0 or a1 + a2 c1 / c2 = 0.
Eigen::Vector3d analytic_fiber_3x2(const ThreeByTwoParams& params, double w1,
                                   double w2, double t);

}  // namespace daam
