#pragma once

// Fiberwise minimization of the log-det cost: for a demanded generalized force
// w, find every near-global minimizer of L on F_w inside the saturation box.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "daam/fiber.hpp"
#include "daam/model.hpp"

namespace daam {

struct SolveOptions {
  int starts_per_orthant = 4;
  int grid_density = 64;        ///< seeding grid points per chart dimension
  int max_iterations = 200;     ///< per local refinement
  double step_tolerance = 1e-10;
  double cost_tolerance = 1e-12;
  double global_gap = 1e-6;     ///< relative cost window for co-minima
  std::uint64_t seed = 0;

  void validate() const;
};

struct Minimizer {
  Eigen::VectorXd spins;
  Eigen::VectorXd thrusts;
  Eigen::VectorXd t_param;
  double cost = 0.0;
  double kkt_residual = 0.0;   ///< NaN when the point is not regular
  Eigen::VectorXd multiplier;  ///< empty when the point is not regular
  std::vector<int> on_boundary;  ///< rotors pinned at |u_i| = tau_i / b_i
  std::vector<int> orthant;      ///< sign pattern of u (+1 / -1)
  int iterations = 0;
};

/// The log-det cost on a fiber in thrust coordinates, optionally measured
/// through a fixed task-space congruence D -> T D T^T.
class FiberObjective {
 public:
  explicit FiberObjective(const Model& model,
                          std::optional<Eigen::MatrixXd> congruence = std::nullopt);

  const Model& model() const { return *model_; }

  /// Cost at u using |u|. Empty at authority-loss points.
  std::optional<double> cost(const Eigen::VectorXd& u) const;

  /// Cost and thrust-space gradient of the branch belonging to the orthant
  /// with the given signs (agrees with the true cost on the closed orthant).
  /// Returns false at authority-loss points.
  bool evaluate(const Eigen::VectorXd& u, const std::vector<int>& signs,
                double& cost, Eigen::VectorXd* grad) const;

  /// det D(u) without the congruence.
  double det(const Eigen::VectorXd& u) const;

 private:
  const Model* model_;
  Eigen::MatrixXd scaled_alloc_;  // T A
  Eigen::VectorXd inertia_, drag_, torque_;
};

struct SolveReport {
  std::vector<Minimizer> minimizers;
  int starts = 0;
  int total_iterations = 0;
  int local_minima = 0;  ///< distinct converged points before the global cut
};

struct SolveContext {
  /// Extra seeds in thrust coordinates (e.g. neighbouring section nodes).
  std::vector<Eigen::VectorXd> warm_starts;
  /// Task-space congruence applied to D before taking the log-det.
  std::optional<Eigen::MatrixXd> congruence;
};

/// Multi-start projected descent over every orthant the fiber crosses.
/// Throws Error(infeasible_demand) when the fiber misses the box and
/// Error(all_singular) when no seed has finite cost.
SolveReport solve_on_fiber(const Model& model, const Eigen::VectorXd& w,
                           const SolveOptions& opts,
                           const SolveContext& ctx = {});

std::vector<Minimizer> minimize_on_fiber(const Model& model,
                                         const Eigen::VectorXd& w,
                                         const SolveOptions& opts);

/// Best point of a dense grid over the feasible chart region (no refinement).
/// Only for fibers of dimension <= 2.
Minimizer brute_force_on_fiber(const Model& model, const Eigen::VectorXd& w,
                               int density);

struct KktReport {
  Eigen::VectorXd multiplier;
  double residual = 0.0;             ///< min_lambda |grad L + J^T lambda|
  double projected_residual = 0.0;   ///< |P_ker(J) grad L|
  double gradient_norm = 0.0;
  /// Largest relative mismatch of A_i^T lambda = 2 sigma_i a_i
  /// (tau_i - 3 b_i v_i^2) / m_i (A_i^T S A_i) over rotors with v_i != 0.
  /// Only computed when residual < 1e-8; NaN otherwise.
  double componentwise_error = 0.0;
};

/// First-order optimality at v. Throws Error(singular_daam) at authority-loss
/// or irregular points.
KktReport kkt_check(const Model& model, const Eigen::VectorXd& v);

/// Lexicographic order on thrusts, used for reproducible output ordering.
bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace daam
