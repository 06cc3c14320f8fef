#pragma once

// Test-side oracles. Nothing here calls into the library's formulas for the
// quantity being checked.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "daam/io.hpp"
#include "daam/model.hpp"

namespace oracle {

inline daam::Model preset(const std::string& name) { return *daam::io::preset(name); }

inline std::vector<std::string> two_rotor_presets() {
  return {"caseA_balanced", "caseA_small_a1", "caseA_small_a2",
          "caseA_tiny_m1",  "caseA_tiny_tau1", "caseA_tiny_b1", "visual_2x1"};
}

struct Rng {
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
  }
  std::mt19937_64 gen;
};

inline Eigen::VectorXd random_spins(const daam::Model& model, Rng& rng, double fraction = 1.0) {
  Eigen::VectorXd v(model.num_rotors());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& r = model.rotor(i);
    const double crit = std::sqrt(r.torque_limit / r.drag_coeff);
    v(i) = rng.uniform(-fraction * crit, fraction * crit);
  }
  return v;
}

/// SAC written out by hand.
template <typename T>
T capacity(T tau, T b, T m, T v) {
  const T h = (tau - b * v * v) / m;
  return h > T(0) ? h : T(0);
}

/// Scalar-force determinant 4 sum_i (a_i v_i abar_i)^2.
inline double scalar_force_det(const daam::Model& model, const Eigen::VectorXd& v) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& r = model.rotor(i);
    const double a = model.alloc_matrix()(0, i);
    const double cap = capacity(r.torque_limit, r.drag_coeff, r.inertia, v(i));
    sum += a * a * v(i) * v(i) * cap * cap;
  }
  return 4.0 * sum;
}

/// log-det cost for a scalar force in long double, from the hand formula.
inline long double scalar_force_cost(const daam::Model& model, const Eigen::VectorXd& v,
                                     long double shift_i = 0.0L, Eigen::Index i_shift = -1) {
  long double sum = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& r = model.rotor(i);
    const long double a = model.alloc_matrix()(0, i);
    long double vi = v(i);
    if (i == i_shift) vi += shift_i;
    const long double cap = capacity<long double>(r.torque_limit, r.drag_coeff, r.inertia, vi);
    sum += a * a * vi * vi * cap * cap;
  }
  return -0.5L * std::log(4.0L * sum);
}

/// Central finite differences of the general log-det cost in long double,
/// D assembled entrywise as sum_i 4 v_i^2 abar_i^2 A_i A_i^T.
inline Eigen::VectorXd fd_gradient(const daam::Model& model, const Eigen::VectorXd& v,
                                   long double h = 1e-6L) {
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto m = model.task_dim();
  auto cost_at = [&](const Eigen::Matrix<long double, Eigen::Dynamic, 1>& x) {
    MatL d = MatL::Zero(m, m);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const auto& r = model.rotor(i);
      const long double cap = capacity<long double>(r.torque_limit, r.drag_coeff, r.inertia, x(i));
      const Eigen::Matrix<long double, Eigen::Dynamic, 1> col =
          model.alloc_matrix().col(i).cast<long double>();
      d += 4.0L * x(i) * x(i) * cap * cap * col * col.transpose();
    }
    return -0.5L * std::log(d.determinant());
  };
  Eigen::VectorXd g(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    Eigen::Matrix<long double, Eigen::Dynamic, 1> xp = v.cast<long double>(), xm = xp;
    xp(i) += h;
    xm(i) -= h;
    g(i) = static_cast<double>((cost_at(xp) - cost_at(xm)) / (2.0L * h));
  }
  return g;
}

/// Normwise relative error |a - b|_inf / |b|_inf.
inline double normwise_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace oracle
