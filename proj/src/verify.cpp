#include "daam/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "daam/fiber.hpp"
#include "daam/invariance.hpp"
#include "daam/optimizer.hpp"

namespace daam {

namespace {

constexpr int kGradPoints = 100;
constexpr int kClosedFormPoints = 10000;
constexpr int kTransformsPerKind = 20;
constexpr int kOracleInstances = 10;
constexpr int kOracleDensity = 2001;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::VectorXd random_spins(const Model& model, std::mt19937_64& rng, double fraction) {
  const Eigen::VectorXd crit = model.critical_spins();
  Eigen::VectorXd v(model.num_rotors());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = fraction * crit(i) * (2.0 * uniform01(rng) - 1.0);
  return v;
}

// Feasible demand drawn from a shrunken achievable range.
Eigen::VectorXd random_demand(const Model& model, std::mt19937_64& rng) {
  const auto range = achievable_range(model);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::VectorXd w(model.task_dim());
    for (Eigen::Index j = 0; j < w.size(); ++j)
      w(j) = 0.8 * range.upper(j) * (2.0 * uniform01(rng) - 1.0);
    if (!feasible_t_region(build_chart(model, w)).empty) return w;
  }
  return Eigen::VectorXd::Zero(model.task_dim());
}

Check make(std::string suite, std::string name, double observed, double tolerance,
           std::string note = {}) {
  Check c{std::move(suite), std::move(name), observed, tolerance, false, std::move(note)};
  c.passed = observed <= tolerance;
  return c;
}

void gradcheck(const Model& model, const VerifyOptions& opts, std::vector<Check>& out) {
  std::mt19937_64 rng(opts.seed);
  const auto wide = model.cast<long double>();
  const long double h = 1e-6L;
  auto analytic = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd g = grad_cost(model, v);
    if (opts.corrupt_gradient) g = 1.01 * g.array() + 1e-3;
    return g;
  };

  double worst = 0.0;
  int used = 0;
  while (used < kGradPoints) {
    const Eigen::VectorXd v = random_spins(model, rng, 0.95);
    if (!cost(model, v)) continue;
    const Eigen::VectorXd g = analytic(v);
    Vector<long double> fd(v.size());
    bool ok = true;
    for (Eigen::Index i = 0; i < v.size() && ok; ++i) {
      Vector<long double> vp = v.cast<long double>(), vm = vp;
      vp(i) += h;
      vm(i) -= h;
      const auto cp = cost(wide, vp);
      const auto cm = cost(wide, vm);
      if (!cp || !cm) ok = false;
      else fd(i) = (*cp - *cm) / (2 * h);
    }
    if (!ok) continue;
    const Eigen::VectorXd fdd = fd.cast<double>();
    const double scale = std::max(fdd.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    worst = std::max(worst, (g - fdd).cwiseAbs().maxCoeff() / scale);
    ++used;
  }
  out.push_back(make("gradcheck", "finite_difference_relative_error", worst, 1e-6,
                     std::to_string(kGradPoints) + " points, central step 1e-6"));

  double zero_origin = 0.0;
  double zero_threshold = 0.0;
  for (int s = 0; s < kGradPoints; ++s) {
    Eigen::VectorXd v = random_spins(model, rng, 0.95);
    const auto i = static_cast<Eigen::Index>(s % v.size());
    v(i) = 0.0;
    if (cost(model, v)) zero_origin = std::max(zero_origin, std::abs(analytic(v)(i)));
    v(i) = (s % 2 ? -1.0 : 1.0) * gradient_sign_threshold(model.rotor(i));
    if (cost(model, v)) zero_threshold = std::max(zero_threshold, std::abs(analytic(v)(i)));
  }
  out.push_back(make("gradcheck", "component_zero_at_zero_spin", zero_origin, 1e-9));
  out.push_back(make("gradcheck", "component_zero_at_sign_threshold", zero_threshold, 1e-9));
}

void closed_form(const Model& model, const VerifyOptions& opts, std::vector<Check>& out) {
  std::mt19937_64 rng(opts.seed + 1);
  double worst = 0.0;
  for (int s = 0; s < kClosedFormPoints; ++s) {
    const Eigen::VectorXd v = random_spins(model, rng, 1.0);
    const double direct = daam_matrix(model, v).determinant();
    const double expanded = cauchy_binet_det(model, v);
    const double scale = std::max(std::abs(expanded), std::numeric_limits<double>::min());
    if (expanded == 0.0 && direct == 0.0) continue;
    worst = std::max(worst, std::abs(direct - expanded) / scale);
  }
  out.push_back(make("closed_form", "det_relative_error", worst, 1e-12,
                     std::to_string(kClosedFormPoints) + " points"));
}

void invariance(const Model& model, const VerifyOptions& opts, std::vector<Check>& out) {
  std::mt19937_64 rng(opts.seed + 2);
  SolveOptions solve;
  solve.seed = opts.seed;
  for (auto kind : {TransformKind::coordinate_change, TransformKind::inner_product}) {
    const std::string tag =
        kind == TransformKind::coordinate_change ? "coordinate_change" : "inner_product";
    double spread = 0.0, shift_error = 0.0, argmin = 0.0;
    int count_mismatch = 0, singular_mismatch = 0;
    for (int k = 0; k < kTransformsPerKind; ++k) {
      const auto transform = random_transform(kind, model.task_dim(), opts.seed * 1000 + k);
      const Eigen::VectorXd w = random_demand(model, rng);
      const auto report = verify_argmin_invariance(model, w, transform, solve);
      spread = std::max(spread, report.shift_spread);
      shift_error = std::max(shift_error, report.shift_error);
      argmin = std::max(argmin, report.argmin_distance);
      if (report.original.size() != report.transformed.size()) ++count_mismatch;
      singular_mismatch +=
          verify_singular_set_invariance(model, transform, 200, opts.seed + k).mismatches;
    }
    out.push_back(make("invariance", tag + ".shift_spread", spread, 1e-10));
    out.push_back(make("invariance", tag + ".shift_value_error", shift_error, 1e-9));
    out.push_back(make("invariance", tag + ".argmin_distance", argmin, 1e-6));
    out.push_back(make("invariance", tag + ".argmin_count_mismatches", count_mismatch, 0.0));
    out.push_back(make("invariance", tag + ".singular_set_mismatches", singular_mismatch, 0.0));
  }
}

void oracle_and_kkt(const Model& model, const VerifyOptions& opts, bool oracle, bool kkt,
                    std::vector<Check>& out) {
  std::mt19937_64 rng(opts.seed + 3);
  SolveOptions solve;
  solve.seed = opts.seed;
  const bool brute_ok = model.num_rotors() - model.task_dim() <= 2;
  double dominance = -std::numeric_limits<double>::infinity();
  double residual = 0.0, componentwise = 0.0;
  int interior = 0;
  for (int k = 0; k < kOracleInstances; ++k) {
    const Eigen::VectorXd w = random_demand(model, rng);
    const auto mins = minimize_on_fiber(model, w, solve);
    if (oracle && brute_ok) {
      const auto brute = brute_force_on_fiber(model, w, kOracleDensity);
      dominance = std::max(dominance, mins.front().cost - brute.cost);
    }
    if (kkt) {
      for (const auto& mz : mins) {
        if (!mz.on_boundary.empty()) continue;
        const auto report = kkt_check(model, mz.spins);
        residual = std::max(residual, report.residual / (1.0 + report.gradient_norm));
        if (std::isfinite(report.componentwise_error))
          componentwise = std::max(componentwise, report.componentwise_error);
        ++interior;
      }
    }
  }
  if (oracle) {
    if (brute_ok)
      out.push_back(make("oracle", "refined_minus_grid_best", dominance, 1e-9,
                         std::to_string(kOracleInstances) + " demands, grid density " +
                             std::to_string(kOracleDensity)));
    else
      out.push_back(make("oracle", "skipped", 0.0, 0.0, "fiber dimension above 2"));
  }
  if (kkt) {
    out.push_back(make("kkt", "relative_stationarity_residual", residual, 1e-7,
                       std::to_string(interior) + " interior minimizers"));
    out.push_back(make("kkt", "componentwise_identity_error", componentwise, 1e-8));
  }
}

}  // namespace

std::vector<std::string> verify_suite_names() {
  return {"gradcheck", "closed_form", "invariance", "oracle", "kkt"};
}

double cauchy_binet_det(const Model& model, const Eigen::VectorXd& v) {
  const auto& a = model.alloc_matrix();
  const auto m = a.rows();
  const auto n = a.cols();
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = sac(model.rotor(i), v(i));
    g(i) = v(i) * v(i) * s * s;
  }
  std::vector<bool> pick(static_cast<std::size_t>(n), false);
  std::fill(pick.begin(), pick.begin() + m, true);
  Eigen::MatrixXd sub(m, m);
  double sum = 0.0;
  do {
    double weight = 1.0;
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pick[static_cast<std::size_t>(i)]) continue;
      sub.col(col++) = a.col(i);
      weight *= g(i);
    }
    const double minor = sub.determinant();
    sum += weight * minor * minor;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return std::pow(4.0, static_cast<double>(m)) * sum;
}

std::vector<Check> run_verify(const Model& model, const VerifyOptions& opts) {
  const auto known = verify_suite_names();
  std::vector<std::string> suites = opts.suites.empty() ? known : opts.suites;
  for (const auto& s : suites)
    if (std::find(known.begin(), known.end(), s) == known.end())
      throw Error(ErrorCode::usage_error, "unknown verify suite '" + s + "'");
  auto wants = [&](const char* s) {
    return std::find(suites.begin(), suites.end(), s) != suites.end();
  };
  std::vector<Check> out;
  if (wants("gradcheck")) gradcheck(model, opts, out);
  if (wants("closed_form")) closed_form(model, opts, out);
  if (wants("invariance")) invariance(model, opts, out);
  if (wants("oracle") || wants("kkt")) oracle_and_kkt(model, opts, wants("oracle"), wants("kkt"), out);
  return out;
}

}  // namespace daam
