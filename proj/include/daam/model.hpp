#pragma once

// Capacity geometry of a propeller-driven vehicle: symmetric acceleration
// capacity (SAC), the allocation map f(v) = A (v .* |v|), its Jacobian and the
// manipulability co-metric D(v) = J W J^T with its log-det cost.
//
// Everything here is a pure function of its arguments and is templated on the
// scalar type, so the same expressions can be evaluated in extended precision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "daam/error.hpp"

namespace daam {

/// Largest supported task dimension (generalized forces of a rigid body).
inline constexpr int kMaxTaskDim = 6;
/// det D at or below this value marks an authority-loss point.
inline constexpr double kDetFloor = 1e-300;
/// Relative singular-value tolerance used for every rank decision.
inline constexpr double kRankTolerance = 1e-10;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using TaskMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0,
                                 kMaxTaskDim, kMaxTaskDim>;
template <typename Scalar>
using TaskVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxTaskDim, 1>;

template <typename Scalar>
struct RotorParams {
  Scalar inertia{1};       ///< lumped rotational inertia m_i
  Scalar drag_coeff{1};    ///< aerodynamic drag coefficient b_i
  Scalar torque_limit{1};  ///< symmetric motor torque bound

  template <typename T>
  RotorParams<T> cast() const {
    return {static_cast<T>(inertia), static_cast<T>(drag_coeff),
            static_cast<T>(torque_limit)};
  }

  bool operator==(const RotorParams&) const = default;
};

/// Symmetric acceleration capacity, clamped at zero beyond the critical spin.
template <typename Scalar>
Scalar sac(const RotorParams<Scalar>& rotor, Scalar spin) {
  const Scalar headroom =
      (rotor.torque_limit - rotor.drag_coeff * spin * spin) / rotor.inertia;
  return headroom > Scalar(0) ? headroom : Scalar(0);
}

/// Spin magnitude at which drag consumes the whole torque budget.
template <typename Scalar>
Scalar critical_spin(const RotorParams<Scalar>& rotor) {
  using std::sqrt;
  return sqrt(rotor.torque_limit / rotor.drag_coeff);
}

/// Spin magnitude where the factor (tau - 3 b v^2) of the cost gradient
/// changes sign, i.e. drag torque reaches a third of the torque limit.
template <typename Scalar>
Scalar gradient_sign_threshold(const RotorParams<Scalar>& rotor) {
  using std::sqrt;
  return sqrt(rotor.torque_limit / (Scalar(3) * rotor.drag_coeff));
}

/// Saturation bound on |u_i| in thrust coordinates (tau / b).
template <typename Scalar>
Scalar thrust_bound(const RotorParams<Scalar>& rotor) {
  return rotor.torque_limit / rotor.drag_coeff;
}

/// u_i = v_i |v_i|
template <typename Derived>
typename Derived::PlainObject spin_to_thrust(
    const Eigen::MatrixBase<Derived>& v) {
  return v.cwiseProduct(v.cwiseAbs());
}

/// v_i = sign(u_i) sqrt(|u_i|)
template <typename Derived>
typename Derived::PlainObject thrust_to_spin(
    const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  return u.unaryExpr([](Scalar x) {
    using std::sqrt;
    return x < Scalar(0) ? -sqrt(-x) : sqrt(x);
  });
}

/// Numerical rank with singular values compared against
/// rel_tol * (largest singular value).
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& m,
                            double rel_tol = kRankTolerance) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m.template cast<Scalar>().eval());
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > Scalar(0))) return 0;
  const Scalar threshold = Scalar(rel_tol) * sv(0);
  return (sv.array() > threshold).count();
}

/// Allocation matrix plus per-rotor physical parameters. Immutable once built;
/// construction validates every invariant and throws Error(validation_error).
template <typename Scalar>
class VehicleModel {
 public:
  VehicleModel(Matrix<Scalar> alloc_matrix,
               std::vector<RotorParams<Scalar>> rotors, std::string name = {})
      : alloc_(std::move(alloc_matrix)),
        rotors_(std::move(rotors)),
        name_(std::move(name)) {
    validate();
  }

  Eigen::Index num_rotors() const { return alloc_.cols(); }
  Eigen::Index task_dim() const { return alloc_.rows(); }
  const Matrix<Scalar>& alloc_matrix() const { return alloc_; }
  const std::vector<RotorParams<Scalar>>& rotors() const { return rotors_; }
  const RotorParams<Scalar>& rotor(Eigen::Index i) const { return rotors_[i]; }
  const std::string& name() const { return name_; }

  Vector<Scalar> critical_spins() const {
    Vector<Scalar> out(num_rotors());
    for (Eigen::Index i = 0; i < num_rotors(); ++i)
      out(i) = critical_spin(rotors_[i]);
    return out;
  }

  Vector<Scalar> thrust_bounds() const {
    Vector<Scalar> out(num_rotors());
    for (Eigen::Index i = 0; i < num_rotors(); ++i)
      out(i) = thrust_bound(rotors_[i]);
    return out;
  }

  template <typename T>
  VehicleModel<T> cast() const {
    std::vector<RotorParams<T>> rotors;
    rotors.reserve(rotors_.size());
    for (const auto& r : rotors_) rotors.push_back(r.template cast<T>());
    return VehicleModel<T>(alloc_.template cast<T>(), std::move(rotors), name_);
  }

  bool operator==(const VehicleModel& other) const {
    return alloc_.rows() == other.alloc_.rows() &&
           alloc_.cols() == other.alloc_.cols() && alloc_ == other.alloc_ &&
           rotors_ == other.rotors_ && name_ == other.name_;
  }

 private:
  void validate() const {
    const auto m = alloc_.rows();
    const auto n = alloc_.cols();
    if (m < 1)
      throw Error(ErrorCode::validation_error,
                  "task_dim: must be at least 1");
    if (m > kMaxTaskDim)
      throw Error(ErrorCode::validation_error,
                  "task_dim: at most " + std::to_string(kMaxTaskDim) +
                      " generalized forces are supported");
    if (n <= m)
      throw Error(ErrorCode::validation_error,
                  "num_rotors: must exceed task_dim (got n=" +
                      std::to_string(n) + ", m=" + std::to_string(m) + ")");
    if (static_cast<Eigen::Index>(rotors_.size()) != n)
      throw Error(ErrorCode::validation_error,
                  "rotors: expected " + std::to_string(n) + " entries, got " +
                      std::to_string(rotors_.size()));
    if (!alloc_.allFinite())
      throw Error(ErrorCode::validation_error,
                  "alloc_matrix: entries must be finite");
    for (std::size_t i = 0; i < rotors_.size(); ++i) {
      const auto& r = rotors_[i];
      auto check = [&](Scalar value, const char* field) {
        using std::isfinite;
        if (!(value > Scalar(0)) || !isfinite(value))
          throw Error(ErrorCode::validation_error,
                      "rotors[" + std::to_string(i) + "]." + field +
                          ": must be positive and finite");
      };
      check(r.inertia, "inertia");
      check(r.drag_coeff, "drag_coeff");
      check(r.torque_limit, "torque_limit");
    }
    const auto rank = numerical_rank(alloc_);
    if (rank != m)
      throw Error(ErrorCode::validation_error,
                  "alloc_matrix: allocation matrix rank " +
                      std::to_string(rank) + " is below task_dim " +
                      std::to_string(m));
  }

  Matrix<Scalar> alloc_;
  std::vector<RotorParams<Scalar>> rotors_;
  std::string name_;
};

using Model = VehicleModel<double>;
using Rotor = RotorParams<double>;

namespace detail {

template <typename Scalar>
void check_spin_size(const VehicleModel<Scalar>& model, Eigen::Index size) {
  if (size != model.num_rotors())
    throw Error(ErrorCode::dimension_mismatch,
                "spin vector has " + std::to_string(size) +
                    " entries, model has " +
                    std::to_string(model.num_rotors()) + " rotors");
}

template <typename Scalar>
struct LogDet {
  Scalar value;   // ln det D, -inf when singular
  Scalar det;     // product of the factor pivots, clamped at zero
  bool singular;
};

/// ln det of a symmetric positive-semidefinite matrix through a pivoted
/// LDL^T factorization.
template <typename Scalar, typename Solver>
LogDet<Scalar> log_det_from(const Solver& ldlt) {
  using std::log;
  const auto d = ldlt.vectorD();
  Scalar sum(0);
  Scalar prod(1);
  bool singular = false;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (!(d(k) > Scalar(0))) {
      singular = true;
      prod = Scalar(0);
      continue;
    }
    sum += log(d(k));
    prod *= d(k);
  }
  if (!singular && sum <= log(Scalar(kDetFloor))) singular = true;
  if (singular) return {-std::numeric_limits<Scalar>::infinity(), prod, true};
  return {sum, prod, false};
}

}  // namespace detail

template <typename Scalar, typename Derived>
Vector<Scalar> allocate(const VehicleModel<Scalar>& model,
                        const Eigen::MatrixBase<Derived>& v) {
  detail::check_spin_size(model, v.size());
  return model.alloc_matrix() * spin_to_thrust(v);
}

/// J_f(v) = 2 A diag(|v|)
template <typename Scalar, typename Derived>
Matrix<Scalar> jacobian(const VehicleModel<Scalar>& model,
                        const Eigen::MatrixBase<Derived>& v) {
  detail::check_spin_size(model, v.size());
  return Scalar(2) * model.alloc_matrix() *
         v.cwiseAbs().eval().asDiagonal();
}

/// SAC co-metric W(v) = diag(a_i(v_i)^2).
template <typename Scalar, typename Derived>
Eigen::DiagonalMatrix<Scalar, Eigen::Dynamic> weight_matrix(
    const VehicleModel<Scalar>& model, const Eigen::MatrixBase<Derived>& v) {
  detail::check_spin_size(model, v.size());
  Vector<Scalar> diag(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Scalar a = sac(model.rotor(i), Scalar(v(i)));
    diag(i) = a * a;
  }
  return Eigen::DiagonalMatrix<Scalar, Eigen::Dynamic>(diag);
}

/// D(v) = J W J^T, symmetrized.
template <typename Scalar, typename Derived>
TaskMatrix<Scalar> daam_matrix(const VehicleModel<Scalar>& model,
                               const Eigen::MatrixBase<Derived>& v) {
  const Matrix<Scalar> j = jacobian(model, v);
  const Matrix<Scalar> d = j * weight_matrix(model, v) * j.transpose();
  return (Scalar(0.5) * (d + d.transpose())).eval();
}

/// Rotors with nonzero spin and nonzero remaining capacity.
template <typename Scalar, typename Derived>
std::vector<int> effective_set(const VehicleModel<Scalar>& model,
                               const Eigen::MatrixBase<Derived>& v) {
  detail::check_spin_size(model, v.size());
  std::vector<int> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    using std::abs;
    if (abs(Scalar(v(i))) > Scalar(0) && sac(model.rotor(i), Scalar(v(i))) > Scalar(0))
      out.push_back(static_cast<int>(i));
  }
  return out;
}

/// Rank of the allocation columns in the effective set.
template <typename Scalar, typename Derived>
int authority_rank(const VehicleModel<Scalar>& model,
                   const Eigen::MatrixBase<Derived>& v) {
  const auto active = effective_set(model, v);
  if (active.empty()) return 0;
  Matrix<Scalar> cols(model.task_dim(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k)
    cols.col(static_cast<Eigen::Index>(k)) = model.alloc_matrix().col(active[k]);
  return static_cast<int>(numerical_rank(cols));
}

/// Log-det cost L(v) = -1/2 ln det D(v); empty at authority-loss points.
template <typename Scalar, typename Derived>
std::optional<Scalar> cost(const VehicleModel<Scalar>& model,
                           const Eigen::MatrixBase<Derived>& v) {
  const TaskMatrix<Scalar> d = daam_matrix(model, v);
  const Eigen::LDLT<TaskMatrix<Scalar>> ldlt(d);
  const auto ld = detail::log_det_from<Scalar>(ldlt);
  if (ld.singular) return std::nullopt;
  return Scalar(-0.5) * ld.value;
}

namespace detail {

template <typename Scalar, typename Derived, typename Solver>
Vector<Scalar> grad_cost_from(const VehicleModel<Scalar>& model,
                              const Eigen::MatrixBase<Derived>& v,
                              const Solver& ldlt) {
  const auto& a = model.alloc_matrix();
  const Matrix<Scalar> s_cols = ldlt.solve(a);  // S A
  Vector<Scalar> grad(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& r = model.rotor(i);
    const Scalar vi = v(i);
    const Scalar q = a.col(i).dot(s_cols.col(i));
    // sigma_i |v_i| written as v_i: identical off zero, correct limit at zero.
    grad(i) = Scalar(-4) * vi * sac(r, vi) *
              ((r.torque_limit - Scalar(3) * r.drag_coeff * vi * vi) / r.inertia) * q;
  }
  return grad;
}

}  // namespace detail

/// Analytic gradient of the log-det cost with respect to the spins.
template <typename Scalar, typename Derived>
Vector<Scalar> grad_cost(const VehicleModel<Scalar>& model,
                         const Eigen::MatrixBase<Derived>& v) {
  const TaskMatrix<Scalar> d = daam_matrix(model, v);
  const Eigen::LDLT<TaskMatrix<Scalar>> ldlt(d);
  if (detail::log_det_from<Scalar>(ldlt).singular)
    throw Error(ErrorCode::singular_daam,
                "grad_cost: DAAM matrix is singular (authority loss)");
  return detail::grad_cost_from(model, v, ldlt);
}

/// Everything known about one actuator state.
template <typename Scalar>
struct DaamEvaluation {
  TaskMatrix<Scalar> daam_matrix;
  Scalar det{0};     ///< det D
  Scalar volume{0};  ///< sqrt(det D)
  std::optional<Scalar> cost;               ///< empty: L = +inf
  std::optional<Vector<Scalar>> gradient;   ///< present iff cost is
  std::vector<int> effective_set;
  std::vector<int> active_saturations;
  int authority_rank = 0;
  bool is_regular = false;   ///< rank J_f = m
  bool is_feasible = false;  ///< strictly inside the open feasible box

  bool singular() const { return !cost.has_value(); }
};

template <typename Scalar, typename Derived>
DaamEvaluation<Scalar> daam(const VehicleModel<Scalar>& model,
                            const Eigen::MatrixBase<Derived>& v) {
  using std::abs;
  using std::exp;
  using std::sqrt;
  DaamEvaluation<Scalar> out;
  out.daam_matrix = daam_matrix(model, v);
  const Eigen::LDLT<TaskMatrix<Scalar>> ldlt(out.daam_matrix);
  const auto ld = detail::log_det_from<Scalar>(ldlt);
  if (ld.singular) {
    out.det = ld.det;
    out.volume = sqrt(ld.det);
  } else {
    out.det = exp(ld.value);
    out.volume = exp(Scalar(0.5) * ld.value);
    out.cost = Scalar(-0.5) * ld.value;
    out.gradient = detail::grad_cost_from(model, v, ldlt);
  }
  out.effective_set = effective_set(model, v);
  out.authority_rank = authority_rank(model, v);
  out.is_regular = numerical_rank(jacobian(model, v)) == model.task_dim();
  out.is_feasible = true;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Scalar vi = v(i);
    if (sac(model.rotor(i), vi) == Scalar(0))
      out.active_saturations.push_back(static_cast<int>(i));
    if (!(abs(vi) < critical_spin(model.rotor(i)))) out.is_feasible = false;
  }
  return out;
}

}  // namespace daam
