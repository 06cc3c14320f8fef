#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "daam/fiber.hpp"
#include "support.hpp"

using daam::Model;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double fiber_error(const Model& model, const VectorXd& v, const VectorXd& w) {
  return (model.alloc_matrix() * daam::spin_to_thrust(v) - w).norm() / (1.0 + w.norm());
}

// Random demand inside the reachable set: the image of a random feasible u.
VectorXd reachable_demand(const Model& model, oracle::Rng& rng, double fraction = 1.0) {
  VectorXd u(model.num_rotors());
  const VectorXd c = model.thrust_bounds();
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.uniform(-fraction, fraction) * c(i);
  return model.alloc_matrix() * u;
}

}  // namespace

TEST_CASE("chart structure") {
  for (const auto& name : daam::io::preset_names()) {
    CAPTURE(name);
    const Model model = oracle::preset(name);
    oracle::Rng rng(4);
    const VectorXd w = reachable_demand(model, rng);
    const auto chart = daam::build_chart(model, w);
    const auto n = model.num_rotors();
    const auto m = model.task_dim();
    REQUIRE(chart.dim() == n - m);
    CHECK((model.alloc_matrix() * chart.particular - w).norm() <= 1e-12 * (1 + w.norm()));
    CHECK((chart.nullspace.transpose() * chart.nullspace - MatrixXd::Identity(n - m, n - m))
              .cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((model.alloc_matrix() * chart.nullspace).cwiseAbs().maxCoeff() <= 1e-12);
    // minimum norm: orthogonal to the kernel
    CHECK((chart.nullspace.transpose() * chart.particular).norm() <= 1e-12 * (1 + chart.particular.norm()));
    for (Eigen::Index j = 0; j < chart.dim(); ++j) {
      const VectorXd col = chart.nullspace.col(j);
      Eigen::Index first = 0;
      while (std::abs(col(first)) <= 1e-12) ++first;
      CHECK(col(first) > 0.0);
    }
  }
}

TEST_CASE("chart of the two-rotor illustration at zero demand") {
  const Model model = oracle::preset("visual_2x1");
  const auto chart = daam::build_chart(model, VectorXd::Zero(1));
  CHECK(chart.particular.norm() == 0.0);
  const VectorXd expect = VectorXd{{1.5, -1.0}}.normalized();
  CHECK((chart.nullspace.col(0) - expect).norm() <= 1e-14);
}

TEST_CASE("chart contains the thrusts of any feasible preimage") {
  const Model model = oracle::preset("case3x2");
  const VectorXd w = daam::allocate(model, VectorXd::Ones(3));
  const auto chart = daam::build_chart(model, w);
  // least squares in t for u = (1,1,1)
  const VectorXd t = chart.nullspace.transpose() * (VectorXd::Ones(3) - chart.particular);
  CHECK((chart.thrust_at(t) - VectorXd::Ones(3)).norm() <= 1e-12);
  CHECK((daam::chart_point(chart, VectorXd::Zero(1)) - daam::thrust_to_spin(chart.particular)).norm() == 0.0);
}

TEST_CASE("fiber membership over random demands and chart points") {
  for (const auto& name : daam::io::preset_names()) {
    CAPTURE(name);
    const Model model = oracle::preset(name);
    oracle::Rng rng(77);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const VectorXd w = reachable_demand(model, rng);
      const auto chart = daam::build_chart(model, w);
      VectorXd t(chart.dim());
      for (auto& x : t) x = rng.uniform(-30, 30);
      worst = std::max(worst, fiber_error(model, daam::chart_point(chart, t), w));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("one-dimensional feasible intervals") {
  SUBCASE("zero demand on the balanced baseline is symmetric") {
    const Model model = oracle::preset("caseA_balanced");
    const auto region = daam::feasible_t_region(daam::build_chart(model, VectorXd::Zero(1)));
    REQUIRE(region.intervals.size() == 1);
    CHECK(region.intervals[0].lower == doctest::Approx(-region.intervals[0].upper).epsilon(1e-14));
    // the box |u_i| <= 10 along (1,-1)/sqrt2 ends at t = 10 sqrt2
    CHECK(region.intervals[0].upper == doctest::Approx(10.0 * std::sqrt(2.0)).epsilon(1e-13));
  }
  SUBCASE("endpoints activate a saturation constraint") {
    for (const auto& name : daam::io::preset_names()) {
      const Model model = oracle::preset(name);
      if (model.num_rotors() - model.task_dim() != 1) continue;
      CAPTURE(name);
      oracle::Rng rng(31);
      for (int k = 0; k < 200; ++k) {
        const VectorXd w = reachable_demand(model, rng);
        const auto chart = daam::build_chart(model, w);
        const auto region = daam::feasible_t_region(chart);
        REQUIRE(region.intervals.size() == 1);
        for (const double t : {region.intervals[0].lower, region.intervals[0].upper}) {
          const VectorXd u = chart.thrust_at(VectorXd::Constant(1, t));
          const VectorXd slack = (u.cwiseAbs() - chart.bounds).cwiseQuotient(chart.bounds);
          CHECK(std::abs(slack.maxCoeff()) <= 1e-10);
        }
        // just inside is feasible, just outside is not
        const auto& iv = region.intervals[0];
        const double eps = 1e-6 * (1 + iv.upper - iv.lower);
        if (iv.upper - iv.lower > 4 * eps) {
          CHECK(daam::is_feasible(chart, VectorXd::Constant(1, iv.lower + eps)));
          CHECK(daam::is_feasible(chart, VectorXd::Constant(1, iv.upper - eps)));
        }
        CHECK_FALSE(daam::is_feasible(chart, VectorXd::Constant(1, iv.upper + eps)));
        CHECK_FALSE(daam::is_feasible(chart, VectorXd::Constant(1, iv.lower - eps)));
      }
    }
  }
  SUBCASE("demand beyond the reachable force gives an empty region") {
    const Model model = oracle::preset("caseA_balanced");
    const auto range = daam::achievable_range(model);
    CHECK(range.upper(0) == doctest::Approx(20.0));
    const VectorXd w = range.upper * 1.001;
    CHECK_FALSE(range.contains(w));
    const auto region = daam::feasible_t_region(daam::build_chart(model, w));
    CHECK(region.empty);
    CHECK(region.intervals.empty());
  }
}

TEST_CASE("two-dimensional regions: zonotope membership and vertex box") {
  MatrixXd a(1, 3);
  a << 1.0, 2.0, 0.5;
  const Model model(a, {{1, 0.1, 1}, {1, 0.2, 1}, {1, 0.1, 2}});
  oracle::Rng rng(12);
  for (int k = 0; k < 50; ++k) {
    const VectorXd w = reachable_demand(model, rng);
    const auto chart = daam::build_chart(model, w);
    const auto region = daam::feasible_t_region(chart);
    REQUIRE_FALSE(region.empty);
    // Random feasible u on the fiber lands inside the box.
    for (int s = 0; s < 200; ++s) {
      VectorXd t(2);
      t << rng.uniform(-40, 40), rng.uniform(-40, 40);
      if (!daam::is_feasible(chart, t)) continue;
      CHECK((t.array() >= region.box_lower.array() - 1e-9).all());
      CHECK((t.array() <= region.box_upper.array() + 1e-9).all());
    }
    // Each box face is touched by the polytope: a feasible point attains it.
    double best_hi = -1e300, best_lo = 1e300;
    for (int s = 0; s < 20000; ++s) {
      VectorXd t(2);
      t << rng.uniform(region.box_lower(0), region.box_upper(0)),
          rng.uniform(region.box_lower(1), region.box_upper(1));
      if (!daam::is_feasible(chart, t)) continue;
      best_hi = std::max(best_hi, t(0));
      best_lo = std::min(best_lo, t(0));
    }
    const double width = region.box_upper(0) - region.box_lower(0);
    CHECK(region.box_upper(0) - best_hi <= 0.05 * width + 1e-12);
    CHECK(best_lo - region.box_lower(0) <= 0.05 * width + 1e-12);
  }
  const VectorXd far = daam::achievable_range(model).upper * 1.01;
  CHECK(daam::feasible_t_region(daam::build_chart(model, far)).empty);
}

TEST_CASE("zonotope emptiness for a planar demand inside the per-axis range") {
  const Model model = oracle::preset("case3x2");
  const auto range = daam::achievable_range(model);
  CHECK(range.upper(0) == doctest::Approx(30.0));
  CHECK(range.upper(1) == doctest::Approx(20.0));
  // w = (30, 20) needs u = (10, 10, 10) for w1 but u1 - u2 = 20 for w2.
  const VectorXd corner = range.upper;
  CHECK(range.contains(corner));
  CHECK(daam::feasible_t_region(daam::build_chart(model, corner)).empty);
  // w2 = 20 forces u1 = 10, u2 = -10, leaving w1 = u3 with |u3| <= 10.
  CHECK_FALSE(daam::feasible_t_region(daam::build_chart(model, VectorXd{{10.0, 20.0}})).empty);
  CHECK(daam::feasible_t_region(daam::build_chart(model, VectorXd{{10.5, 20.0}})).empty);
}

TEST_CASE("analytic three-rotor chart") {
  const daam::ThreeByTwoParams params;
  SUBCASE("hand substitution") {
    const auto v = daam::analytic_fiber_3x2(params, 3.0, 0.0, 1.0);
    CHECK((v - Eigen::Vector3d::Ones()).norm() <= 1e-15);
  }
  SUBCASE("outputs satisfy both force equations") {
    oracle::Rng rng(2);
    for (int k = 0; k < 500; ++k) {
      daam::ThreeByTwoParams p;
      p.a = {rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(-2, 2)};
      p.c = {rng.uniform(0.2, 2), rng.uniform(0.2, 2)};
      const double w1 = rng.uniform(-5, 5), w2 = rng.uniform(-5, 5), t = rng.uniform(-5, 5);
      const Eigen::Vector3d u = daam::spin_to_thrust(daam::analytic_fiber_3x2(p, w1, w2, t));
      CHECK(std::abs(p.a[0] * u(0) + p.a[1] * u(1) + p.a[2] * u(2) - w1) <= 1e-10 * (1 + std::abs(w1)));
      CHECK(std::abs(p.c[0] * u(0) - p.c[1] * u(1) - w2) <= 1e-10 * (1 + std::abs(w2)));
      CHECK(u(2) == doctest::Approx(t).epsilon(1e-15));
    }
  }
  SUBCASE("agrees with the SVD chart as point sets") {
    const Model model = oracle::preset("case3x2");
    oracle::Rng rng(5);
    for (int k = 0; k < 20; ++k) {
      const VectorXd w = reachable_demand(model, rng, 0.9);
      const auto chart = daam::build_chart(model, w);
      const auto region = daam::feasible_t_region(chart);
      REQUIRE(region.intervals.size() == 1);
      const auto& iv = region.intervals[0];
      // Analytic t = u3 range from the same chart, mapped through the third row of N.
      const double u3a = chart.thrust_at(VectorXd::Constant(1, iv.lower))(2);
      const double u3b = chart.thrust_at(VectorXd::Constant(1, iv.upper))(2);
      const int density = 401;
      std::vector<Eigen::Vector3d> analytic, charted;
      for (int s = 0; s < density; ++s) {
        const double f = static_cast<double>(s) / (density - 1);
        analytic.push_back(daam::spin_to_thrust(
            daam::analytic_fiber_3x2(params, w(0), w(1), u3a + f * (u3b - u3a))));
        charted.push_back(chart.thrust_at(VectorXd::Constant(1, iv.lower + f * (iv.upper - iv.lower))));
      }
      // One-sided distance point to polyline, both directions.
      auto to_polyline = [](const Eigen::Vector3d& p, const std::vector<Eigen::Vector3d>& line) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s + 1 < line.size(); ++s) {
          const Eigen::Vector3d d = line[s + 1] - line[s];
          const double len2 = d.squaredNorm();
          const double f = len2 > 0 ? std::clamp((p - line[s]).dot(d) / len2, 0.0, 1.0) : 0.0;
          best = std::min(best, (line[s] + f * d - p).norm());
        }
        return best;
      };
      double h = 0.0;
      for (const auto& p : analytic) h = std::max(h, to_polyline(p, charted));
      for (const auto& p : charted) h = std::max(h, to_polyline(p, analytic));
      CHECK(h <= 1e-6);
    }
  }
  SUBCASE("degenerate parameters") {
    daam::ThreeByTwoParams bad;
    bad.c = {1.0, 0.0};
    CHECK_THROWS_AS(daam::analytic_fiber_3x2(bad, 1, 1, 0), daam::Error);
    daam::ThreeByTwoParams cancel;
    cancel.a = {1.0, -1.0, 1.0};
    try {
      daam::analytic_fiber_3x2(cancel, 1, 1, 0);
      FAIL("no error");
    } catch (const daam::Error& e) {
      CHECK(e.code() == daam::ErrorCode::domain_error);
    }
  }
}

TEST_CASE("force dimension mismatch") {
  const Model model = oracle::preset("case3x2");
  try {
    daam::build_chart(model, VectorXd::Zero(1));
    FAIL("no error");
  } catch (const daam::Error& e) {
    CHECK(e.code() == daam::ErrorCode::dimension_mismatch);
  }
}
