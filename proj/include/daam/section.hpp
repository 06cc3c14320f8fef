#pragma once

// Optimal sections v*(w) over grids of task demands, with the events that
// separate their smooth stretches.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "daam/error.hpp"
#include "daam/model.hpp"
#include "daam/optimizer.hpp"

namespace daam {

enum class TransitionKind {
  smooth,
  reversal,
  saturation_attach,
  saturation_detach,
  authority_barrier,
  bifurcation_split,
  bifurcation_merge,
  unattributed_jump,  ///< a jump with none of the known causes
};

std::string to_string(TransitionKind kind);

/// Task demands on a 1-D sweep or a row-major 2-D lattice. Components not
/// swept stay at `base`.
struct TaskGrid {
  std::vector<Eigen::VectorXd> nodes;
  std::vector<int> shape;  ///< {count} or {rows, cols}

  static TaskGrid sweep(const Eigen::VectorXd& base, int axis, double start,
                        double end, int count);
  /// Axis 0 varies along rows, axis 1 along columns.
  static TaskGrid lattice(const Eigen::VectorXd& base, int axis0, double start0,
                          double end0, int count0, int axis1, double start1,
                          double end1, int count1);

  std::size_t size() const { return nodes.size(); }
  /// Adjacent node pairs (i < j): consecutive nodes, or right/down lattice
  /// neighbours.
  std::vector<std::pair<std::size_t, std::size_t>> adjacent_pairs() const;
};

struct NodeRecord {
  Eigen::VectorXd w;
  std::vector<Minimizer> minimizers;
  bool failed = false;
  std::optional<ErrorCode> error;
  std::string message;
};

struct TransitionEvent {
  std::size_t from = 0;
  std::size_t to = 0;
  double jump_size = 0.0;
  TransitionKind kind = TransitionKind::smooth;
};

struct SectionTrace {
  TaskGrid grid;
  std::vector<NodeRecord> records;
  std::vector<TransitionEvent> events;
  double jump_threshold = 0.0;
  double det_reference = 0.0;  ///< median det D over the selected minimizers
};

struct TraceOptions {
  SolveOptions solve;
  bool warm_start = true;
  std::optional<double> jump_threshold;  ///< default_jump_threshold when empty
};

/// 0.05 times the diagonal of the saturation box in u.
double default_jump_threshold(const Model& model);

/// Straight-line authority test for classify_transition: a jump crosses the
/// barrier when det D drops below 1e-6 * det_reference on the u-segment.
struct BarrierTest {
  const Model* model = nullptr;
  double det_reference = 0.0;
};

TransitionKind classify_transition(const Minimizer& prev, const Minimizer& next,
                                   double jump_threshold,
                                   const std::optional<BarrierTest>& barrier = std::nullopt);

/// Greedy nearest-neighbour matching in u with distance cap `cap`. Returns
/// (prev index, next index, distance) in the order the pairs were taken.
struct Match {
  std::size_t prev;
  std::size_t next;
  double distance;
};
std::vector<Match> match_minimizers(const std::vector<Minimizer>& prev,
                                    const std::vector<Minimizer>& next, double cap);

/// Solves every node (warm-started from solved neighbours unless disabled) and
/// derives one event per adjacent pair. A jump with no sign flip, saturation
/// change or barrier crossing is re-examined by bisecting the demand segment:
/// it becomes smooth when the tracked branch moves continuously, otherwise it
/// is classified at the finest pair found.
SectionTrace trace_section(const Model& model, const TaskGrid& grid,
                           const TraceOptions& opts = {});

struct SmoothnessReport {
  std::vector<Eigen::VectorXd> directions;
  std::vector<double> quotients;  ///< |v*(w0 + r d) - v*(w0)| / r per direction
  double max_quotient = 0.0;
  double min_quotient = 0.0;
  bool unique = false;            ///< w0 has a single global minimizer
  bool interior = false;          ///< ... with no active saturation
  bool branch_failure = false;
  std::string message;
};

/// Tracks the minimizer branch through w0 + radius * d for `samples`
/// deterministic unit directions d (both signs for m = 1). Branch matching
/// fails when w0 has co-minima or a sample's nearest minimizer lies farther
/// than the jump threshold.
SmoothnessReport smoothness_probe(const Model& model, const Eigen::VectorXd& w0,
                                  double radius, int samples,
                                  const SolveOptions& opts = {});

}  // namespace daam
