#include "daam/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "daam/fiber.hpp"

namespace daam {

namespace {

constexpr int kFiberSamples = 50;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller on the portable uniform draw.
double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::MatrixXd random_orthogonal(Eigen::Index m, std::mt19937_64& rng) {
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) g(i, j) = gaussian(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
}

std::optional<double> congruent_cost(const Model& model, const Eigen::VectorXd& v,
                                     const Eigen::MatrixXd& t) {
  const TaskMatrix<double> d = daam_matrix(model, v);
  TaskMatrix<double> dt = t * d * t.transpose();
  dt = (0.5 * (dt + dt.transpose())).eval();
  const Eigen::LDLT<TaskMatrix<double>> ldlt(dt);
  const auto ld = detail::log_det_from<double>(ldlt);
  if (ld.singular) return std::nullopt;
  return -0.5 * ld.value;
}

// Singular when det D' is at the floor or D' has numerical rank below m. The
// rank test keeps exactly singular D from turning regular through rounding in
// T D T^T.
bool congruent_singular(const Model& model, const Eigen::VectorXd& v, const Eigen::MatrixXd& t) {
  if (!congruent_cost(model, v, t)) return true;
  const Eigen::MatrixXd dt = t * daam_matrix(model, v) * t.transpose();
  return numerical_rank(dt) < model.task_dim();
}

// Regular points of the fiber: evenly spaced for one-dimensional fibers,
// seeded uniform samples of the chart box otherwise.
std::vector<Eigen::VectorXd> fiber_samples(const Model& model, const Eigen::VectorXd& w,
                                           std::uint64_t seed) {
  const FiberChart chart = build_chart(model, w);
  const FeasibleRegion region = feasible_t_region(chart);
  std::vector<Eigen::VectorXd> out;
  if (region.empty) return out;
  auto take = [&](const Eigen::VectorXd& t) {
    const Eigen::VectorXd v = chart_point(chart, t);
    if (cost(model, v)) out.push_back(v);
  };
  if (chart.dim() == 1) {
    const auto& iv = region.intervals.front();
    for (int j = 0; j < 4 * kFiberSamples && static_cast<int>(out.size()) < kFiberSamples; ++j) {
      const double a = (j + 0.5) / kFiberSamples;
      if (a >= 1.0) break;
      take(Eigen::VectorXd::Constant(1, iv.lower + (iv.upper - iv.lower) * a));
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  const Eigen::VectorXd span = region.box_upper - region.box_lower;
  for (int attempt = 0; attempt < 10000 && static_cast<int>(out.size()) < kFiberSamples; ++attempt) {
    Eigen::VectorXd t(chart.dim());
    for (Eigen::Index d = 0; d < t.size(); ++d)
      t(d) = region.box_lower(d) + span(d) * uniform01(rng);
    if (is_feasible(chart, t)) take(t);
  }
  return out;
}

}  // namespace

TaskTransform::TaskTransform(TransformKind kind, Eigen::MatrixXd matrix)
    : kind_(kind), matrix_(std::move(matrix)) {}

TaskTransform TaskTransform::coordinate_change(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols() || c.rows() == 0)
    throw Error(ErrorCode::dimension_mismatch, "coordinate change must be square");
  if (!c.allFinite()) throw Error(ErrorCode::validation_error, "coordinate change must be finite");
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(c);
  const double det = lu.determinant();
  if (!(std::abs(det) > 1e-12))
    throw Error(ErrorCode::validation_error, "coordinate change: |det C| must exceed 1e-12");
  TaskTransform out(TransformKind::coordinate_change, c);
  out.congruence_ = lu.inverse().transpose();
  out.expected_shift_ = std::log(std::abs(det));
  return out;
}

TaskTransform TaskTransform::inner_product(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorCode::dimension_mismatch, "inner product must be square");
  if (!m.allFinite()) throw Error(ErrorCode::validation_error, "inner product must be finite");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorCode::validation_error, "inner product: M must be symmetric to 1e-12");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd lambda = eig.eigenvalues();
  if (!(lambda.minCoeff() > 1e-12))
    throw Error(ErrorCode::validation_error, "inner product: eigenvalues of M must exceed 1e-12");
  TaskTransform out(TransformKind::inner_product, m);
  out.congruence_ = eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
                    eig.eigenvectors().transpose();
  out.expected_shift_ = 0.5 * lambda.array().log().sum();
  return out;
}

TaskTransform random_transform(TransformKind kind, Eigen::Index m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd q = random_orthogonal(m, rng);
  Eigen::VectorXd s(m);
  if (kind == TransformKind::coordinate_change) {
    for (Eigen::Index j = 0; j < m; ++j) s(j) = std::exp(std::log(3.0) * (2.0 * uniform01(rng) - 1.0));
    const Eigen::MatrixXd r = random_orthogonal(m, rng);
    return TaskTransform::coordinate_change(q * s.asDiagonal() * r);
  }
  for (Eigen::Index j = 0; j < m; ++j) s(j) = std::exp(std::log(10.0) * (2.0 * uniform01(rng) - 1.0));
  Eigen::MatrixXd mm = q * s.asDiagonal() * q.transpose();
  mm = (0.5 * (mm + mm.transpose())).eval();
  return TaskTransform::inner_product(mm);
}

double transformed_cost(const Model& model, const Eigen::VectorXd& v,
                        const TaskTransform& transform) {
  if (transform.congruence().rows() != model.task_dim())
    throw Error(ErrorCode::dimension_mismatch, "transform size differs from task_dim");
  const auto c = congruent_cost(model, v, transform.congruence());
  if (!c) throw Error(ErrorCode::singular_daam, "transformed_cost: DAAM matrix is singular");
  return *c;
}

double hausdorff_u(const std::vector<Minimizer>& a, const std::vector<Minimizer>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto directed = [](const std::vector<Minimizer>& x, const std::vector<Minimizer>& y) {
    double worst = 0.0;
    for (const auto& p : x) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& q : y) nearest = std::min(nearest, (p.thrusts - q.thrusts).norm());
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

ArgminInvarianceReport verify_argmin_invariance(const Model& model, const Eigen::VectorXd& w,
                                                const TaskTransform& transform,
                                                const SolveOptions& opts) {
  ArgminInvarianceReport report;
  report.expected_shift = transform.expected_shift();
  report.original = solve_on_fiber(model, w, opts).minimizers;
  SolveContext ctx;
  ctx.congruence = transform.congruence();
  report.transformed = solve_on_fiber(model, w, opts, ctx).minimizers;
  report.argmin_distance = hausdorff_u(report.original, report.transformed);
  report.argmin_match = report.original.size() == report.transformed.size() &&
                        report.argmin_distance <= 1e-6;

  const auto points = fiber_samples(model, w, opts.seed);
  report.samples = static_cast<int>(points.size());
  report.shift_min = std::numeric_limits<double>::infinity();
  report.shift_max = -std::numeric_limits<double>::infinity();
  for (const auto& v : points) {
    const double shift = transformed_cost(model, v, transform) - *cost(model, v);
    report.shift_min = std::min(report.shift_min, shift);
    report.shift_max = std::max(report.shift_max, shift);
    report.shift_error = std::max(report.shift_error, std::abs(shift - report.expected_shift));
  }
  report.shift_spread = points.empty() ? 0.0 : report.shift_max - report.shift_min;
  report.passed = report.argmin_match && !points.empty() && report.shift_spread <= 1e-10;

  if (transform.kind() == TransformKind::coordinate_change) {
    const Eigen::MatrixXd& c = transform.matrix();
    const Model mapped(c * model.alloc_matrix(), model.rotors(), model.name());
    ArgminInvarianceReport::AllocRoute route;
    try {
      const auto mins = solve_on_fiber(mapped, c * w, opts).minimizers;
      route.argmin_distance = hausdorff_u(report.original, mins);
    } catch (const Error&) {
      route.argmin_distance = std::numeric_limits<double>::infinity();
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (const auto& v : points) {
      const double shift = *cost(mapped, v) - *cost(model, v);
      lo = std::min(lo, shift);
      hi = std::max(hi, shift);
      sum += shift;
    }
    if (!points.empty()) {
      route.shift = sum / static_cast<double>(points.size());
      route.shift_spread = hi - lo;
    }
    report.alloc_route = route;
  }
  return report;
}

SingularSetReport verify_singular_set_invariance(const Model& model,
                                                 const TaskTransform& transform, int samples,
                                                 std::uint64_t seed) {
  if (transform.congruence().rows() != model.task_dim())
    throw Error(ErrorCode::dimension_mismatch, "transform size differs from task_dim");
  SingularSetReport report;
  std::mt19937_64 rng(seed);
  const Eigen::VectorXd crit = model.critical_spins();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(model.task_dim(), model.task_dim());
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(model.num_rotors());
    if (s > 0)
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = crit(i) * (2.0 * uniform01(rng) - 1.0);
    if (s % 4 == 1) {
      // Keep only m - 1 spinning rotors: authority loss by rank.
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
      for (Eigen::Index i = 0; i < v.size(); ++i) idx[i] = i;
      for (std::size_t k = idx.size() - 1; k > 0; --k)
        std::swap(idx[k], idx[static_cast<std::size_t>(rng() % (k + 1))]);
      for (std::size_t k = static_cast<std::size_t>(model.task_dim()) - 1; k < idx.size(); ++k)
        v(idx[k]) = 0.0;
    }
    const bool before = congruent_singular(model, v, identity);
    const bool after = congruent_singular(model, v, transform.congruence());
    ++report.samples;
    if (before) ++report.singular;
    if (before != after) ++report.mismatches;
  }
  report.passed = report.mismatches == 0;
  return report;
}

}  // namespace daam
