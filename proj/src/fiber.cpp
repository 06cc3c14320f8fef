#include "daam/fiber.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace daam {

namespace {

// Zonotope {A u : |u_i| <= c_i} membership by its facet inequalities: every
// facet normal is orthogonal to m-1 generators.
bool zonotope_contains(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                       const Eigen::VectorXd& w) {
  const auto m = a.rows();
  const auto n = a.cols();
  constexpr double kRelTol = 1e-12;
  auto support = [&](const Eigen::VectorXd& d) {
    return ((a.transpose() * d).cwiseAbs().array() * c.array()).sum();
  };
  if (m == 1) {
    const Eigen::VectorXd d = Eigen::VectorXd::Ones(1);
    const double h = support(d);
    return std::abs(w(0)) <= h * (1.0 + kRelTol) + kRelTol;
  }
  std::vector<bool> pick(static_cast<std::size_t>(n), false);
  std::fill(pick.begin(), pick.begin() + (m - 1), true);
  Eigen::MatrixXd sub(m, m - 1);
  do {
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (pick[static_cast<std::size_t>(i)]) sub.col(col++) = a.col(i);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(m - 2) <= kRankTolerance * sv(0)) continue;
    const Eigen::VectorXd d = svd.matrixU().col(m - 1);
    const double h = support(d);
    if (std::abs(d.dot(w)) > h * (1.0 + kRelTol) + kRelTol) return false;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return true;
}

// Shrinks the box to the hull of the polytope {t : |u0 + N t| <= c} by
// enumerating its vertices (k tight constraints each). Skipped when the
// enumeration would be too large.
void tighten_to_vertices(const FiberChart& chart, FeasibleRegion& region) {
  const auto k = chart.dim();
  const auto n = chart.particular.size();
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = chart.nullspace.row(i).transpose();
    if (row.norm() <= 1e-14) continue;
    normals.push_back(row);
    rhs.push_back(chart.bounds(i) - chart.particular(i));
    normals.push_back(-row);
    rhs.push_back(chart.bounds(i) + chart.particular(i));
  }
  const auto rows = static_cast<Eigen::Index>(normals.size());
  double combos = 1.0;
  for (Eigen::Index j = 0; j < k; ++j) combos = combos * static_cast<double>(rows - j) / static_cast<double>(j + 1);
  if (rows < k || combos > 1e6) return;

  const double scale = 1.0 + chart.bounds.maxCoeff();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  std::vector<bool> pick(static_cast<std::size_t>(rows), false);
  std::fill(pick.begin(), pick.begin() + k, true);
  Eigen::MatrixXd sys(k, k);
  Eigen::VectorXd b(k);
  do {
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (!pick[static_cast<std::size_t>(j)]) continue;
      sys.row(r) = normals[j].transpose();
      b(r++) = rhs[j];
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    if (lu.rank() < k) continue;
    const Eigen::VectorXd t = lu.solve(b);
    bool inside = true;
    for (Eigen::Index j = 0; j < rows && inside; ++j)
      inside = normals[j].dot(t) <= rhs[j] + 1e-9 * scale;
    if (!inside) continue;
    lo = lo.cwiseMin(t);
    hi = hi.cwiseMax(t);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  if (!(lo.array() <= hi.array()).all()) return;
  region.box_lower = lo.cwiseMax(region.box_lower);
  region.box_upper = hi.cwiseMin(region.box_upper);
}

void check_force_size(const Model& model, const Eigen::VectorXd& w) {
  if (w.size() != model.task_dim())
    throw Error(ErrorCode::dimension_mismatch,
                "force vector has " + std::to_string(w.size()) +
                    " entries, model has task_dim " +
                    std::to_string(model.task_dim()));
}

}  // namespace

bool AchievableRange::contains(const Eigen::VectorXd& w, double tol) const {
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double slack = tol * (1.0 + std::abs(upper(j)));
    if (w(j) < lower(j) - slack || w(j) > upper(j) + slack) return false;
  }
  return true;
}

AchievableRange achievable_range(const Model& model) {
  // max of +-(A u)_j over the box is attained at u_i = +-c_i sign(A_ji).
  const Eigen::VectorXd c = model.thrust_bounds();
  AchievableRange range;
  range.upper = model.alloc_matrix().cwiseAbs() * c;
  range.lower = -range.upper;
  return range;
}

FiberChart build_chart(const Model& model, const Eigen::VectorXd& w) {
  check_force_size(model, w);
  const auto& a = model.alloc_matrix();
  const auto m = a.rows();
  const auto n = a.cols();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);

  FiberChart chart;
  chart.target = w;
  chart.alloc = a;
  chart.bounds = model.thrust_bounds();
  chart.particular = svd.matrixV().leftCols(m) *
                     (svd.matrixU().transpose() * w)
                         .cwiseQuotient(svd.singularValues());
  chart.nullspace = svd.matrixV().rightCols(n - m);
  for (Eigen::Index j = 0; j < chart.nullspace.cols(); ++j) {
    auto col = chart.nullspace.col(j);
    const double scale = col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(col(i)) > 1e-12 * scale) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
  }
  return chart;
}

Eigen::VectorXd chart_point(const FiberChart& chart, const Eigen::VectorXd& t) {
  return thrust_to_spin(chart.thrust_at(t));
}

bool is_feasible(const FiberChart& chart, const Eigen::VectorXd& t,
                 double rel_tol) {
  const Eigen::VectorXd u = chart.thrust_at(t);
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (std::abs(u(i)) > chart.bounds(i) * (1.0 + rel_tol)) return false;
  return true;
}

FeasibleRegion feasible_t_region(const FiberChart& chart) {
  const auto k = chart.dim();
  const auto n = chart.particular.size();
  const auto& c = chart.bounds;
  const auto& u0 = chart.particular;
  const auto& basis = chart.nullspace;
  FeasibleRegion region;

  if (k == 1) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    const double col_scale = basis.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = basis(i, 0);
      if (std::abs(p) <= 1e-14 * col_scale) {
        if (std::abs(u0(i)) > c(i) * (1.0 + 1e-12)) return region;
        continue;
      }
      const double t1 = (-c(i) - u0(i)) / p;
      const double t2 = (c(i) - u0(i)) / p;
      lo = std::max(lo, std::min(t1, t2));
      hi = std::min(hi, std::max(t1, t2));
    }
    if (lo > hi) {
      // Single-point fibers (w on the boundary of the reachable set) can come
      // out inverted by rounding.
      const double scale = 1.0 + std::max(std::abs(lo), std::abs(hi));
      if (lo - hi > 1e-12 * scale) return region;
      const double mid = 0.5 * (lo + hi);
      lo = hi = mid;
    }
    region.intervals.push_back({lo, hi});
    region.box_lower = Eigen::VectorXd::Constant(1, lo);
    region.box_upper = Eigen::VectorXd::Constant(1, hi);
    region.empty = false;
    return region;
  }

  if (!zonotope_contains(chart.alloc, c, chart.target)) return region;
  // t = N^T u on the fiber, so |t_j| <= sum_i |N_ij| c_i.
  const Eigen::VectorXd half = basis.cwiseAbs().transpose() * c;
  region.box_lower = -half;
  region.box_upper = half;
  region.empty = false;
  tighten_to_vertices(chart, region);
  return region;
}

Eigen::Vector3d analytic_fiber_3x2(const ThreeByTwoParams& params, double w1,
                                   double w2, double t) {
  const auto& [a1, a2, a3] = params.a;
  const auto& [c1, c2] = params.c;
  if (c2 == 0.0)
    throw Error(ErrorCode::domain_error, "analytic_fiber_3x2: c2 must be nonzero");
  const double denom = a1 + a2 * c1 / c2;
  if (std::abs(denom) <= 1e-14 * (std::abs(a1) + std::abs(a2 * c1 / c2)))
    throw Error(ErrorCode::domain_error,
                "analytic_fiber_3x2: a1 + a2 c1 / c2 vanishes");
  const double u1 = (w1 - a3 * t + (a2 / c2) * w2) / denom;
  const double u2 = (c1 * u1 - w2) / c2;
  return thrust_to_spin(Eigen::Vector3d(u1, u2, t));
}

}  // namespace daam
