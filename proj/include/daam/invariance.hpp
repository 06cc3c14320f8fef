#pragma once

// Task-space reparametrizations of the log-det cost. A linear change of task
// coordinates or of the task inner product acts on D by congruence, so the
// cost moves by a constant and the fiberwise argmin stays put.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "daam/model.hpp"
#include "daam/optimizer.hpp"

namespace daam {

enum class TransformKind { coordinate_change, inner_product };

class TaskTransform {
 public:
  /// Invertible C, |det C| > 1e-12. D becomes C^{-T} D C^{-1}.
  static TaskTransform coordinate_change(const Eigen::MatrixXd& c);
  /// Symmetric positive definite M. D becomes M^{-1/2} D M^{-1/2}.
  static TaskTransform inner_product(const Eigen::MatrixXd& m);

  TransformKind kind() const { return kind_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  /// T with D -> T D T^T.
  const Eigen::MatrixXd& congruence() const { return congruence_; }
  /// ln|det C| or 1/2 ln det M.
  double expected_shift() const { return expected_shift_; }

 private:
  TaskTransform(TransformKind kind, Eigen::MatrixXd matrix);

  TransformKind kind_;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd congruence_;
  double expected_shift_ = 0.0;
};

/// Seeded random transforms: C = Q diag(s) R with s log-uniform in [1/3, 3],
/// M = Q diag(s) Q^T with s log-uniform in [0.1, 10].
TaskTransform random_transform(TransformKind kind, Eigen::Index m, std::uint64_t seed);

/// -1/2 ln det (T D(v) T^T). Throws Error(singular_daam) at authority loss.
double transformed_cost(const Model& model, const Eigen::VectorXd& v,
                        const TaskTransform& transform);

struct ArgminInvarianceReport {
  std::vector<Minimizer> original;
  std::vector<Minimizer> transformed;
  double argmin_distance = 0.0;  ///< Hausdorff distance of the u-sets
  bool argmin_match = false;     ///< same count and distance <= 1e-6
  int samples = 0;
  double shift_min = 0.0;
  double shift_max = 0.0;
  double shift_spread = 0.0;
  double expected_shift = 0.0;
  double shift_error = 0.0;      ///< max |shift - expected| over the samples
  bool passed = false;           ///< argmin_match and spread <= 1e-10

  /// Output-side route A' = C A, w' = C w for coordinate changes. Reported,
  /// never part of `passed`.
  struct AllocRoute {
    double shift = 0.0;          ///< mean of L' - L, expected -ln|det C|
    double shift_spread = 0.0;
    double argmin_distance = 0.0;
  };
  std::optional<AllocRoute> alloc_route;
};

/// Compares the argmin sets of L and the transformed cost on F_w, and the cost
/// difference over 50 regular fiber points.
ArgminInvarianceReport verify_argmin_invariance(const Model& model, const Eigen::VectorXd& w,
                                                const TaskTransform& transform,
                                                const SolveOptions& opts = {});

struct SingularSetReport {
  int samples = 0;
  int singular = 0;    ///< samples singular under the original co-metric
  int mismatches = 0;  ///< samples classified differently after the transform
  bool passed = false;
};

/// Singular/regular classification of D and T D T^T at v = 0 followed by
/// seeded random spins inside the critical box. A matrix is singular when its
/// determinant is at the floor or its numerical rank is below m.
SingularSetReport verify_singular_set_invariance(const Model& model,
                                                 const TaskTransform& transform,
                                                 int samples, std::uint64_t seed = 0);

/// Hausdorff distance between two minimizer lists in u (infinite when exactly
/// one is empty).
double hausdorff_u(const std::vector<Minimizer>& a, const std::vector<Minimizer>& b);

}  // namespace daam
