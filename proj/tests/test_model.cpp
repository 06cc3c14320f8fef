#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "daam/model.hpp"
#include "support.hpp"

using daam::ErrorCode;
using daam::Model;
using daam::Rotor;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Model two_rotor(double a1, double a2, Rotor r1, Rotor r2) {
  MatrixXd a(1, 2);
  a << a1, a2;
  return Model(a, {r1, r2});
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const daam::Error& e) {
    return e.code();
  }
  FAIL("expected daam::Error");
  return ErrorCode::usage_error;
}

}  // namespace

TEST_CASE("sac peaks at tau/m and vanishes at the critical spin") {
  const Rotor r1{1.0, 0.1, 10.0}, r2{1.0, 0.2, 10.0}, r3{2.0, 0.1, 10.0};
  CHECK(daam::sac(r1, 0.0) == 10.0);
  CHECK(daam::sac(r2, 0.0) == 10.0);
  CHECK(daam::sac(r3, 0.0) == 5.0);
  CHECK(daam::sac(r1, 10.0) == 0.0);
  CHECK(daam::sac(r1, -10.0) == 0.0);
  CHECK(daam::sac(r1, 12.0) == 0.0);
  CHECK(daam::sac(r3, 10.0) == 0.0);
  const double s50 = std::sqrt(50.0);
  CHECK(std::abs(daam::sac(r2, s50)) <= 1e-14);
  CHECK(daam::critical_spin(r1) == 10.0);
  CHECK(daam::critical_spin(r2) == doctest::Approx(s50).epsilon(1e-15));
  CHECK(daam::critical_spin(r3) == 10.0);
}

TEST_CASE("sac is even, continuous and clamped") {
  const Rotor r{0.05, 0.1, 1.0};
  oracle::Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    const double v = rng.uniform(-6.0, 6.0);
    CHECK(daam::sac(r, v) == daam::sac(r, -v));
    CHECK(daam::sac(r, v) >= 0.0);
    CHECK(daam::sac(r, v) == doctest::Approx(oracle::capacity(1.0, 0.1, 0.05, v)).epsilon(1e-15));
  }
}

TEST_CASE("critical spins of the two-rotor illustration") {
  CHECK(daam::critical_spin(Rotor{1.0, 0.2, 10.0}) == doctest::Approx(7.0711).epsilon(1e-4));
  CHECK(daam::critical_spin(Rotor{1.0, 0.4, 15.0}) == doctest::Approx(6.1237).epsilon(1e-4));
  CHECK(daam::critical_spin(Rotor{1.0, 1.0, 1.0}) == 1.0);
}

TEST_CASE("gradient sign threshold") {
  CHECK(daam::gradient_sign_threshold(Rotor{1.0, 0.1, 1.0}) ==
        doctest::Approx(std::sqrt(10.0 / 3.0)).epsilon(1e-15));
  CHECK(daam::gradient_sign_threshold(Rotor{1.0, 1.0, 3.0}) == doctest::Approx(1.0));
  oracle::Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Rotor r{rng.uniform(0.01, 2), rng.uniform(0.01, 2), rng.uniform(0.01, 20)};
    CHECK(daam::gradient_sign_threshold(r) < daam::critical_spin(r));
  }
}

TEST_CASE("thrust coordinates") {
  CHECK(daam::spin_to_thrust(VectorXd{{2, -2}}) == VectorXd{{4, -4}});
  CHECK(daam::spin_to_thrust(VectorXd{{0, 3}}) == VectorXd{{0, 9}});
  CHECK(daam::spin_to_thrust(VectorXd{{-0.5}}) == VectorXd{{-0.25}});
  CHECK(daam::thrust_to_spin(VectorXd{{4, -4}}) == VectorXd{{2, -2}});
  CHECK(daam::thrust_to_spin(VectorXd{{0}}) == VectorXd{{0}});
  CHECK(daam::thrust_to_spin(VectorXd{{-0.25, 9}}) == VectorXd{{-0.5, 3}});
  oracle::Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    VectorXd u(4);
    for (auto& x : u) x = rng.uniform(-50, 50);
    const VectorXd back = daam::spin_to_thrust(daam::thrust_to_spin(u));
    CHECK((back - u).cwiseAbs().maxCoeff() <= 1e-12 * (1 + u.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("allocation map and jacobian") {
  const Model vis = oracle::preset("visual_2x1");
  CHECK(daam::allocate(vis, VectorXd{{2, -2}})(0) == -2.0);
  CHECK(daam::allocate(vis, VectorXd::Zero(2))(0) == 0.0);
  const MatrixXd j = daam::jacobian(vis, VectorXd{{2, -2}});
  CHECK(j(0, 0) == 4.0);
  CHECK(j(0, 1) == 6.0);
  CHECK(daam::jacobian(vis, VectorXd::Zero(2)).isZero(0));

  const Model m32 = oracle::preset("case3x2");
  const VectorXd w = daam::allocate(m32, VectorXd::Ones(3));
  CHECK(w(0) == 3.0);
  CHECK(w(1) == 0.0);
  CHECK(daam::jacobian(m32, VectorXd::Ones(3)) == 2.0 * m32.alloc_matrix());

  CHECK(code_of([&] { daam::allocate(vis, VectorXd::Zero(3)); }) == ErrorCode::dimension_mismatch);
}

TEST_CASE("weight matrix entries") {
  const Model bal = oracle::preset("caseA_balanced");
  CHECK(daam::weight_matrix(bal, VectorXd{{1, 1}}).diagonal()(0) == doctest::Approx(324.0).epsilon(1e-13));
  CHECK(daam::weight_matrix(bal, VectorXd{{std::sqrt(10.0), 0}}).diagonal()(0) <= 1e-20);
  const Model fig = two_rotor(1, 1, Rotor{1, 0.1, 10}, Rotor{1, 0.1, 10});
  CHECK(daam::weight_matrix(fig, VectorXd::Zero(2)).diagonal()(0) == 100.0);
}

TEST_CASE("daam evaluation of the balanced baseline") {
  const Model bal = oracle::preset("caseA_balanced");
  const auto e = daam::daam(bal, VectorXd{{1, 1}});
  CHECK(e.det == doctest::Approx(2592.0).epsilon(1e-12));
  REQUIRE(e.cost);
  CHECK(*e.cost == doctest::Approx(-0.5 * std::log(2592.0)).epsilon(1e-14));
  CHECK(*e.cost == doctest::Approx(-3.930).epsilon(1e-3));
  CHECK(e.volume == doctest::Approx(std::sqrt(2592.0)).epsilon(1e-12));
  CHECK(e.gradient.has_value());
  CHECK(e.is_regular);
  CHECK(e.is_feasible);

  const auto zero = daam::daam(bal, VectorXd::Zero(2));
  CHECK(zero.det == 0.0);
  CHECK(zero.singular());
  CHECK_FALSE(zero.gradient.has_value());
  CHECK(zero.authority_rank == 0);

  const double vc = std::sqrt(10.0);
  const auto corner = daam::daam(bal, VectorXd{{vc, vc}});
  CHECK(corner.singular());
  CHECK(corner.active_saturations.size() == 2);
  CHECK_FALSE(corner.is_feasible);
}

TEST_CASE("scalar-force determinant matches the hand formula") {
  for (const auto& name : oracle::two_rotor_presets()) {
    CAPTURE(name);
    const Model model = oracle::preset(name);
    oracle::Rng rng(1234);
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
      const VectorXd v = oracle::random_spins(model, rng);
      const double expect = oracle::scalar_force_det(model, v);
      const double got = daam::daam_matrix(model, v)(0, 0);
      if (expect > 0) worst = std::max(worst, std::abs(got - expect) / expect);
    }
    CHECK(worst <= 1e-12);
  }
  const Model tri = oracle::preset("case3x1");
  oracle::Rng rng(99);
  for (int k = 0; k < 2000; ++k) {
    const VectorXd v = oracle::random_spins(tri, rng);
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) {
      const auto& r = tri.rotor(i);
      const double cap = oracle::capacity(r.torque_limit, r.drag_coeff, r.inertia, v(i));
      expect += std::pow(2.0 * std::abs(v(i)), 2) * cap * cap;
    }
    if (expect > 0) CHECK(std::abs(daam::daam(tri, v).det - expect) <= 1e-12 * expect);
  }
}

TEST_CASE("D is even in every spin") {
  for (const auto& name : daam::io::preset_names()) {
    CAPTURE(name);
    const Model model = oracle::preset(name);
    oracle::Rng rng(5);
    for (int k = 0; k < 100; ++k) {
      const VectorXd v = oracle::random_spins(model, rng);
      const MatrixXd d = daam::daam_matrix(model, v);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        VectorXd f = v;
        f(i) = -f(i);
        const MatrixXd df = daam::daam_matrix(model, f);
        CHECK((df - d).cwiseAbs().maxCoeff() <= 1e-12 * (1 + d.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("positive determinant iff full authority rank") {
  for (const auto& name : daam::io::preset_names()) {
    CAPTURE(name);
    const Model model = oracle::preset(name);
    oracle::Rng rng(21);
    int mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
      VectorXd v = oracle::random_spins(model, rng, 1.1);
      if (k % 5 == 0) v(k % v.size()) = 0.0;
      const auto e = daam::daam(model, v);
      const bool regular = e.det > daam::kDetFloor;
      if (regular != (e.authority_rank == model.task_dim())) ++mismatches;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("analytic gradient against long-double finite differences") {
  for (const auto& name : daam::io::preset_names()) {
    CAPTURE(name);
    const Model model = oracle::preset(name);
    oracle::Rng rng(2024);
    int tested = 0;
    while (tested < 100) {
      const VectorXd v = oracle::random_spins(model, rng, 0.95);
      if (v.cwiseAbs().minCoeff() < 1e-3) continue;
      const auto e = daam::daam(model, v);
      if (e.singular()) continue;
      const VectorXd fd = oracle::fd_gradient(model, v);
      CHECK(oracle::normwise_error(*e.gradient, fd) < 1e-6);
      ++tested;
    }
  }
}

TEST_CASE("scalar-force gradient against the hand-written cost") {
  const Model model = oracle::preset("caseA_balanced");
  oracle::Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    const VectorXd v = oracle::random_spins(model, rng, 0.95);
    const VectorXd g = daam::grad_cost(model, v);
    for (int i = 0; i < 2; ++i) {
      const long double h = 1e-6L;
      const long double fd = (oracle::scalar_force_cost(model, v, h, i) -
                              oracle::scalar_force_cost(model, v, -h, i)) / (2 * h);
      CHECK(std::abs(g(i) - static_cast<double>(fd)) <= 1e-6 * (1 + g.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("gradient components vanish at zero spin and at the one-third threshold") {
  for (const auto& name : daam::io::preset_names()) {
    CAPTURE(name);
    const Model model = oracle::preset(name);
    oracle::Rng rng(8);
    for (int k = 0; k < 20; ++k) {
      for (Eigen::Index i = 0; i < model.num_rotors(); ++i) {
        VectorXd v = oracle::random_spins(model, rng, 0.9);
        for (const double value : {0.0, daam::gradient_sign_threshold(model.rotor(i)),
                                   -daam::gradient_sign_threshold(model.rotor(i))}) {
          v(i) = value;
          const auto e = daam::daam(model, v);
          if (e.singular()) continue;
          CHECK(std::abs((*e.gradient)(i)) <= 1e-9 * (1 + e.gradient->norm()));
        }
      }
    }
  }
}

TEST_CASE("grad_cost refuses singular points") {
  const Model model = oracle::preset("caseA_balanced");
  CHECK(code_of([&] { daam::grad_cost(model, VectorXd::Zero(2)); }) == ErrorCode::singular_daam);
}

TEST_CASE("cost grows without bound along the diagonal toward the origin") {
  const Model model = oracle::preset("caseA_balanced");
  const double crit = daam::critical_spin(model.rotor(0));
  double previous = -1e300;
  for (double t = 0.5 * crit; t > 1e-200; t *= 0.1) {
    const auto c = daam::cost(model, VectorXd{{t, t}});
    if (!c) break;
    CHECK(*c > previous);
    previous = *c;
  }
  CHECK(previous > 300.0);
  CHECK_FALSE(daam::cost(model, VectorXd{{1e-200, 1e-200}}).has_value());
}

TEST_CASE("effective set and authority rank") {
  const Model bal = oracle::preset("caseA_balanced");
  CHECK(daam::effective_set(bal, VectorXd{{0, 2}}) == std::vector<int>{1});
  CHECK(daam::effective_set(bal, VectorXd{{std::sqrt(10.0), 1}}) == std::vector<int>{1});
  CHECK(daam::effective_set(bal, VectorXd{{1, 2}}) == std::vector<int>{0, 1});
  CHECK(daam::authority_rank(bal, VectorXd{{1, 0}}) == 1);
  CHECK(daam::authority_rank(bal, VectorXd::Zero(2)) == 0);
  const Model m32 = oracle::preset("case3x2");
  CHECK(daam::authority_rank(m32, VectorXd{{1, 1, 0}}) == 2);
  CHECK(daam::authority_rank(m32, VectorXd{{0, 0, 1}}) == 1);
}

TEST_CASE("long double instantiation agrees with double") {
  const Model model = oracle::preset("case3x2");
  const auto wide = model.cast<long double>();
  const VectorXd v{{1.1, -0.7, 2.3}};
  const auto c = daam::cost(model, v);
  const auto cl = daam::cost(wide, v.cast<long double>().eval());
  REQUIRE(c);
  REQUIRE(cl);
  CHECK(*c == doctest::Approx(static_cast<double>(*cl)).epsilon(1e-14));
}

TEST_CASE("model validation") {
  const Rotor ok{0.05, 0.1, 1.0};
  SUBCASE("negative drag names the rotor") {
    try {
      two_rotor(1, 1, ok, Rotor{0.05, -0.1, 1.0});
      FAIL("no error");
    } catch (const daam::Error& e) {
      CHECK(e.code() == ErrorCode::validation_error);
      CHECK(std::string(e.what()).find("rotors[1].drag_coeff") != std::string::npos);
    }
  }
  SUBCASE("rank deficiency") {
    MatrixXd a(2, 3);
    a << 1, 1, 1, 2, 2, 2;
    try {
      Model(a, {ok, ok, ok});
      FAIL("no error");
    } catch (const daam::Error& e) {
      CHECK(e.code() == ErrorCode::validation_error);
      CHECK(std::string(e.what()).find("allocation matrix rank") != std::string::npos);
    }
  }
  SUBCASE("shape errors") {
    CHECK(code_of([&] { Model(MatrixXd::Ones(1, 1), {ok}); }) == ErrorCode::validation_error);
    CHECK(code_of([&] { Model(MatrixXd::Ones(1, 3), {ok, ok}); }) == ErrorCode::validation_error);
    CHECK(code_of([&] { two_rotor(1, NAN, ok, ok); }) == ErrorCode::validation_error);
    CHECK(code_of([&] { two_rotor(1, 1, ok, Rotor{0, 0.1, 1}); }) == ErrorCode::validation_error);
    CHECK(code_of([&] { two_rotor(1, 1, ok, Rotor{0.05, 0.1, INFINITY}); }) == ErrorCode::validation_error);
  }
}
