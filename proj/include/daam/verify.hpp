#pragma once

// Self-checks behind `daam verify`. Every check compares an observed value
// against an upper tolerance.

#include <cstdint>
#include <string>
#include <vector>

#include "daam/model.hpp"

namespace daam {

struct Check {
  std::string suite;
  std::string name;
  double observed = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string note;
};

struct VerifyOptions {
  /// Any of gradcheck, closed_form, invariance, oracle, kkt; empty runs all.
  std::vector<std::string> suites;
  std::uint64_t seed = 0;
  /// Fault injection: perturbs the analytic gradient seen by gradcheck.
  bool corrupt_gradient = false;
};

std::vector<std::string> verify_suite_names();

/// Throws Error(usage_error) for unknown suite names.
std::vector<Check> run_verify(const Model& model, const VerifyOptions& opts);

/// det D(v) by the Cauchy-Binet expansion
///   4^m sum over m-subsets S of prod_{i in S} v_i^2 a_i(v_i)^2 det(A_S)^2.
double cauchy_binet_det(const Model& model, const Eigen::VectorXd& v);

}  // namespace daam
