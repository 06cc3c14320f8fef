#include "daam/section.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "daam/fiber.hpp"

namespace daam {

namespace {

constexpr int kBarrierSamples = 32;
constexpr double kBarrierRatio = 1e-6;

double u_distance(const Minimizer& a, const Minimizer& b) {
  return (a.thrusts - b.thrusts).norm();
}

bool contains(const std::vector<int>& set, int x) {
  return std::find(set.begin(), set.end(), x) != set.end();
}

bool crosses_barrier(const Minimizer& prev, const Minimizer& next, const BarrierTest& test) {
  const FiberObjective objective(*test.model);
  const double eps = kBarrierRatio * test.det_reference;
  for (int s = 0; s <= kBarrierSamples; ++s) {
    const double a = static_cast<double>(s) / kBarrierSamples;
    const Eigen::VectorXd u = (1.0 - a) * prev.thrusts + a * next.thrusts;
    if (objective.det(u) < eps) return true;
  }
  return false;
}

std::vector<Eigen::VectorXd> probe_directions(Eigen::Index m, int samples) {
  std::vector<Eigen::VectorXd> dirs;
  if (m == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    return dirs;
  }
  if (m == 2) {
    for (int k = 0; k < samples; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / samples;
      dirs.push_back(Eigen::Vector2d(std::cos(angle), std::sin(angle)));
    }
    return dirs;
  }
  std::mt19937_64 rng(0);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int k = 0; k < samples; ++k) {
    Eigen::VectorXd d(m);
    for (Eigen::Index j = 0; j < m; ++j)
      d(j) = std::sqrt(-2.0 * std::log(1.0 - uniform())) * std::cos(2.0 * std::numbers::pi * uniform());
    dirs.push_back(d.normalized());
  }
  return dirs;
}

}  // namespace

std::string to_string(TransitionKind kind) {
  switch (kind) {
    case TransitionKind::smooth: return "smooth";
    case TransitionKind::reversal: return "reversal";
    case TransitionKind::saturation_attach: return "saturation_attach";
    case TransitionKind::saturation_detach: return "saturation_detach";
    case TransitionKind::authority_barrier: return "authority_barrier";
    case TransitionKind::bifurcation_split: return "bifurcation_split";
    case TransitionKind::bifurcation_merge: return "bifurcation_merge";
    case TransitionKind::unattributed_jump: return "unattributed_jump";
  }
  return "unknown";
}

TaskGrid TaskGrid::sweep(const Eigen::VectorXd& base, int axis, double start,
                         double end, int count) {
  if (axis < 0 || axis >= base.size())
    throw Error(ErrorCode::usage_error, "sweep axis out of range");
  if (count < 2) throw Error(ErrorCode::usage_error, "sweep needs at least 2 nodes");
  TaskGrid grid;
  grid.shape = {count};
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd w = base;
    w(axis) = start + (end - start) * (static_cast<double>(j) / (count - 1));
    grid.nodes.push_back(std::move(w));
  }
  return grid;
}

TaskGrid TaskGrid::lattice(const Eigen::VectorXd& base, int axis0, double start0,
                           double end0, int count0, int axis1, double start1,
                           double end1, int count1) {
  if (axis0 < 0 || axis0 >= base.size() || axis1 < 0 || axis1 >= base.size() ||
      axis0 == axis1)
    throw Error(ErrorCode::usage_error, "lattice axes must be two distinct task components");
  if (count0 < 2 || count1 < 2)
    throw Error(ErrorCode::usage_error, "lattice needs at least 2 nodes per axis");
  TaskGrid grid;
  grid.shape = {count0, count1};
  for (int r = 0; r < count0; ++r) {
    for (int c = 0; c < count1; ++c) {
      Eigen::VectorXd w = base;
      w(axis0) = start0 + (end0 - start0) * (static_cast<double>(r) / (count0 - 1));
      w(axis1) = start1 + (end1 - start1) * (static_cast<double>(c) / (count1 - 1));
      grid.nodes.push_back(std::move(w));
    }
  }
  return grid;
}

std::vector<std::pair<std::size_t, std::size_t>> TaskGrid::adjacent_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (shape.size() == 1) {
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) pairs.emplace_back(j, j + 1);
    return pairs;
  }
  const auto rows = static_cast<std::size_t>(shape[0]);
  const auto cols = static_cast<std::size_t>(shape[1]);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t j = r * cols + c;
      if (c + 1 < cols) pairs.emplace_back(j, j + 1);
      if (r + 1 < rows) pairs.emplace_back(j, j + cols);
    }
  }
  return pairs;
}

double default_jump_threshold(const Model& model) {
  return 0.05 * 2.0 * model.thrust_bounds().norm();
}

TransitionKind classify_transition(const Minimizer& prev, const Minimizer& next,
                                   double jump_threshold,
                                   const std::optional<BarrierTest>& barrier) {
  if (u_distance(prev, next) <= jump_threshold) return TransitionKind::smooth;
  for (Eigen::Index i = 0; i < prev.thrusts.size(); ++i)
    if (prev.thrusts(i) * next.thrusts(i) < 0.0) return TransitionKind::reversal;
  for (int i : next.on_boundary)
    if (!contains(prev.on_boundary, i)) return TransitionKind::saturation_attach;
  for (int i : prev.on_boundary)
    if (!contains(next.on_boundary, i)) return TransitionKind::saturation_detach;
  if (barrier && barrier->model && crosses_barrier(prev, next, *barrier))
    return TransitionKind::authority_barrier;
  return TransitionKind::unattributed_jump;
}

std::vector<Match> match_minimizers(const std::vector<Minimizer>& prev,
                                    const std::vector<Minimizer>& next, double cap) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < prev.size(); ++i)
    for (std::size_t j = 0; j < next.size(); ++j)
      all.emplace_back(u_distance(prev[i], next[j]), i, j);
  std::sort(all.begin(), all.end());
  std::vector<bool> used_prev(prev.size(), false), used_next(next.size(), false);
  std::vector<Match> out;
  for (const auto& [d, i, j] : all) {
    if (d > cap) break;
    if (used_prev[i] || used_next[j]) continue;
    used_prev[i] = used_next[j] = true;
    out.push_back({i, j, d});
  }
  return out;
}

namespace {

struct EventContext {
  const Model& model;
  const SolveOptions& solve;
  double threshold;
  BarrierTest barrier;
};

constexpr int kBisectionDepth = 10;

struct Bisection {
  bool continuous;
  double max_step;
  Minimizer a;
  Minimizer b;
};

// Follows the global minimizer nearest to p from wa to wb by halving the
// segment. Continuous when every sub-step ends within the threshold;
// otherwise returns the finest offending pair.
Bisection bisect(const EventContext& ctx, const Minimizer& p, const Eigen::VectorXd& wa,
                 const Minimizer& q, const Eigen::VectorXd& wb, int depth) {
  const double d = u_distance(p, q);
  if (d <= ctx.threshold) return {true, d, p, q};
  if (depth == 0) return {false, d, p, q};
  const Eigen::VectorXd wm = 0.5 * (wa + wb);
  SolveContext sc;
  sc.warm_starts = {p.thrusts, q.thrusts};
  std::vector<Minimizer> mids;
  try {
    mids = solve_on_fiber(ctx.model, wm, ctx.solve, sc).minimizers;
  } catch (const Error&) {
    return {false, d, p, q};
  }
  const Minimizer* m = &mids.front();
  for (const auto& c : mids)
    if (u_distance(c, p) < u_distance(*m, p)) m = &c;
  auto left = bisect(ctx, p, wa, *m, wm, depth - 1);
  if (!left.continuous) return left;
  auto right = bisect(ctx, *m, wm, q, wb, depth - 1);
  if (!right.continuous) return right;
  return {true, std::max(left.max_step, right.max_step), p, q};
}

TransitionEvent make_event(const EventContext& ctx, std::size_t from, std::size_t to,
                           const NodeRecord& ra, const NodeRecord& rb) {
  const auto& prev = ra.minimizers;
  const auto& next = rb.minimizers;
  TransitionEvent ev;
  ev.from = from;
  ev.to = to;
  const auto matches = match_minimizers(prev, next, ctx.threshold);
  double largest = 0.0;
  for (const auto& m : matches) largest = std::max(largest, m.distance);
  const std::size_t smaller = std::min(prev.size(), next.size());
  auto settle = [&](std::size_t matched) {
    ev.jump_size = largest;
    if (prev.size() == next.size())
      ev.kind = TransitionKind::smooth;
    else
      ev.kind = next.size() > prev.size() ? TransitionKind::bifurcation_split
                                          : TransitionKind::bifurcation_merge;
    return matched == smaller;
  };
  if (settle(matches.size())) return ev;

  std::vector<bool> used_prev(prev.size(), false), used_next(next.size(), false);
  for (const auto& m : matches) used_prev[m.prev] = used_next[m.next] = true;
  std::size_t matched = matches.size();
  // Unmatched branches are examined in order: a visible cause classifies the
  // pair; otherwise bisection decides between a steep but continuous stretch
  // and a jump whose cause only shows up closer in.
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (used_prev[i]) continue;
    const bool any_free = std::find(used_next.begin(), used_next.end(), false) != used_next.end();
    std::size_t best = next.size();
    double best_d = 0.0;
    for (std::size_t j = 0; j < next.size(); ++j) {
      if (any_free && used_next[j]) continue;
      const double d = u_distance(prev[i], next[j]);
      if (best == next.size() || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    ev.jump_size = best_d;
    ev.kind = classify_transition(prev[i], next[best], ctx.threshold, ctx.barrier);
    if (ev.kind != TransitionKind::unattributed_jump) return ev;

    const auto b = bisect(ctx, prev[i], ra.w, next[best], rb.w, kBisectionDepth);
    if (!b.continuous) {
      ev.jump_size = u_distance(b.a, b.b);
      ev.kind = classify_transition(b.a, b.b, ctx.threshold, ctx.barrier);
      return ev;
    }
    if (!any_free) break;
    used_prev[i] = used_next[best] = true;
    largest = std::max(largest, b.max_step);
    if (settle(++matched)) return ev;
  }
  ev.jump_size = largest;
  ev.kind = TransitionKind::unattributed_jump;
  return ev;
}

}  // namespace

SectionTrace trace_section(const Model& model, const TaskGrid& grid, const TraceOptions& opts) {
  SectionTrace trace;
  trace.grid = grid;
  trace.jump_threshold = opts.jump_threshold.value_or(default_jump_threshold(model));
  trace.records.resize(grid.size());

  // Warm starts come from already-solved neighbours: the previous node of a
  // sweep, or the left and upper nodes of a lattice.
  std::vector<std::vector<std::size_t>> earlier(grid.size());
  for (const auto& [a, b] : grid.adjacent_pairs()) earlier[b].push_back(a);

  for (std::size_t j = 0; j < grid.size(); ++j) {
    auto& rec = trace.records[j];
    rec.w = grid.nodes[j];
    SolveContext ctx;
    if (opts.warm_start)
      for (std::size_t p : earlier[j])
        for (const auto& mz : trace.records[p].minimizers) ctx.warm_starts.push_back(mz.thrusts);
    try {
      rec.minimizers = solve_on_fiber(model, rec.w, opts.solve, ctx).minimizers;
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.code();
      rec.message = e.what();
    }
  }

  const FiberObjective objective(model);
  std::vector<double> dets;
  for (const auto& rec : trace.records)
    for (const auto& mz : rec.minimizers) dets.push_back(objective.det(mz.thrusts));
  if (!dets.empty()) {
    std::sort(dets.begin(), dets.end());
    const std::size_t h = dets.size() / 2;
    trace.det_reference = dets.size() % 2 ? dets[h] : 0.5 * (dets[h - 1] + dets[h]);
  }

  const EventContext ctx{model, opts.solve, trace.jump_threshold,
                         BarrierTest{&model, trace.det_reference}};
  for (const auto& [a, b] : grid.adjacent_pairs()) {
    const auto& pa = trace.records[a];
    const auto& pb = trace.records[b];
    if (pa.failed || pb.failed) continue;
    trace.events.push_back(make_event(ctx, a, b, pa, pb));
  }
  return trace;
}

SmoothnessReport smoothness_probe(const Model& model, const Eigen::VectorXd& w0,
                                  double radius, int samples, const SolveOptions& opts) {
  if (!(radius > 0.0)) throw Error(ErrorCode::validation_error, "probe radius must be positive");
  if (samples < 1) throw Error(ErrorCode::validation_error, "probe needs at least one sample");
  SmoothnessReport report;
  report.directions = probe_directions(model.task_dim(), samples);

  const auto base = minimize_on_fiber(model, w0, opts);
  report.unique = base.size() == 1;
  if (!report.unique) {
    report.branch_failure = true;
    report.message = "w0 has " + std::to_string(base.size()) + " co-minima";
    return report;
  }
  const Minimizer& ref = base.front();
  report.interior = ref.on_boundary.empty();
  const double cap = default_jump_threshold(model);

  for (const auto& d : report.directions) {
    std::vector<Minimizer> near;
    try {
      near = minimize_on_fiber(model, w0 + radius * d, opts);
    } catch (const Error& e) {
      report.branch_failure = true;
      report.message = e.what();
      return report;
    }
    const Minimizer* best = nullptr;
    for (const auto& mz : near)
      if (!best || u_distance(mz, ref) < u_distance(*best, ref)) best = &mz;
    if (u_distance(*best, ref) > cap) {
      report.branch_failure = true;
      report.message = "nearest minimizer jumped by " + std::to_string(u_distance(*best, ref));
      return report;
    }
    report.quotients.push_back((best->spins - ref.spins).norm() / radius);
  }
  report.max_quotient = *std::max_element(report.quotients.begin(), report.quotients.end());
  report.min_quotient = *std::min_element(report.quotients.begin(), report.quotients.end());
  return report;
}

}  // namespace daam
