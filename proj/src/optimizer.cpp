#include "daam/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>

namespace daam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxBacktracks = 60;
constexpr double kDedupDistance = 1e-6;
// Total seeding-grid budget; the per-dimension density is capped to fit.
constexpr double kMaxGridPoints = 262144.0;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Sign pattern of u; 0 where the component sits on an orthant wall.
std::vector<int> signs_of(const Eigen::VectorXd& u, const Eigen::VectorXd& c) {
  std::vector<int> s(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) <= 1e-12 * c(i))
      s[i] = 0;
    else
      s[i] = u(i) > 0.0 ? 1 : -1;
  }
  return s;
}

bool has_zero(const std::vector<int>& s) {
  return std::find(s.begin(), s.end(), 0) != s.end();
}

// a . t <= rhs in chart coordinates.
struct Constraint {
  Eigen::VectorXd normal;
  double rhs = 0.0;
  int rotor = 0;
  bool wall = false;  // orthant wall u_i = 0 rather than a saturation face
};

struct Seed {
  Eigen::VectorXd t;
  std::vector<int> signs;
};

struct Candidate {
  Eigen::VectorXd t;
  Eigen::VectorXd u;
  std::vector<int> signs;
  std::vector<int> faces;
  double cost = 0.0;
  int iterations = 0;
};

class OrthantRefiner {
 public:
  OrthantRefiner(const FiberChart& chart, const FiberObjective& objective,
                 const SolveOptions& opts, std::vector<int> signs)
      : chart_(chart), objective_(objective), opts_(opts), signs_(std::move(signs)) {
    const auto n = chart.particular.size();
    const double row_scale = chart.nullspace.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd row = chart.nullspace.row(i).transpose();
      if (row.norm() <= 1e-14 * row_scale) continue;
      const double lo = signs_[i] > 0 ? 0.0 : -chart.bounds(i);
      const double hi = signs_[i] > 0 ? chart.bounds(i) : 0.0;
      const double u0 = chart.particular(i);
      constraints_.push_back({row, hi - u0, static_cast<int>(i), signs_[i] < 0});
      constraints_.push_back({-row, u0 - lo, static_cast<int>(i), signs_[i] > 0});
    }
    scale_ = chart.bounds.norm();
  }

  // Returns false when the start is singular or the refinement ends on an
  // orthant wall (a ridge of the cost, never a local minimizer).
  bool refine(Eigen::VectorXd t, Candidate& out) const {
    const auto k = chart_.dim();
    double f = 0.0;
    Eigen::VectorXd gu(chart_.particular.size());
    if (!objective_.evaluate(chart_.thrust_at(t), signs_, f, &gu)) return false;
    Eigen::VectorXd gt = chart_.nullspace.transpose() * gu;

    std::vector<int> working;
    Eigen::VectorXd prev_s, prev_y;
    bool have_prev = false;
    int it = 0;
    for (; it < opts_.max_iterations; ++it) {
      const Eigen::MatrixXd z = free_basis(working, k);
      Eigen::VectorXd d = -(z * (z.transpose() * gt));

      // Admit constraints that are already tight and block the direction.
      bool grew = false;
      for (std::size_t j = 0; j < constraints_.size() && d.norm() > 0.0; ++j) {
        if (in_set(working, j)) continue;
        const auto& c = constraints_[j];
        if (slack(c, t) <= tight_tol(c) && c.normal.dot(d) > 0.0 &&
            independent(working, j)) {
          working.push_back(static_cast<int>(j));
          grew = true;
        }
      }
      if (grew) {
        have_prev = false;
        continue;
      }

      if (d.norm() <= 1e-13 * (1.0 + gt.norm())) {
        if (working.empty()) break;
        // Multipliers of g + sum mu_j a_j = 0; drop the most negative one.
        Eigen::MatrixXd aw(static_cast<Eigen::Index>(working.size()), k);
        for (std::size_t r = 0; r < working.size(); ++r)
          aw.row(static_cast<Eigen::Index>(r)) = constraints_[working[r]].normal.transpose();
        const Eigen::VectorXd mu =
            aw.transpose().colPivHouseholderQr().solve(-gt);
        Eigen::Index worst = 0;
        const double mu_min = mu.minCoeff(&worst);
        if (mu_min >= -1e-12 * (1.0 + gt.norm())) break;
        working.erase(working.begin() + worst);
        have_prev = false;
        continue;
      }

      double alpha = 0.1 * scale_ / d.norm();
      if (have_prev) {
        const double sy = prev_s.dot(prev_y);
        if (sy > 0.0) alpha = prev_s.squaredNorm() / sy;
      }
      alpha = std::min(alpha, scale_ / d.norm());

      double alpha_max = std::numeric_limits<double>::infinity();
      std::size_t blocking = constraints_.size();
      for (std::size_t j = 0; j < constraints_.size(); ++j) {
        if (in_set(working, j)) continue;
        const auto& c = constraints_[j];
        const double rate = c.normal.dot(d);
        if (rate <= 0.0) continue;
        const double step = std::max(0.0, slack(c, t)) / rate;
        if (step < alpha_max) {
          alpha_max = step;
          blocking = j;
        }
      }
      bool hit = false;
      if (alpha >= alpha_max) {
        alpha = alpha_max;
        hit = true;
      }

      const double slope = gt.dot(d);
      const double slop = opts_.cost_tolerance * (1.0 + std::abs(f));
      double f_new = 0.0;
      Eigen::VectorXd gu_new(gu.size());
      Eigen::VectorXd t_new;
      bool accepted = false;
      for (int b = 0; b < kMaxBacktracks; ++b) {
        t_new = t + alpha * d;
        if (objective_.evaluate(chart_.thrust_at(t_new), signs_, f_new, &gu_new) &&
            f_new <= f + kArmijo * alpha * slope + slop) {
          accepted = true;
          break;
        }
        alpha *= kShrink;
        hit = false;
      }
      if (!accepted) break;

      const Eigen::VectorXd gt_new = chart_.nullspace.transpose() * gu_new;
      prev_s = t_new - t;
      prev_y = gt_new - gt;
      have_prev = true;
      t = t_new;
      f = f_new;
      gu = gu_new;
      gt = gt_new;
      if (hit && blocking < constraints_.size() && independent(working, blocking)) {
        working.push_back(static_cast<int>(blocking));
        have_prev = false;
        continue;
      }
      if (prev_s.norm() <= opts_.step_tolerance) break;
    }

    out.t = t;
    out.u = chart_.thrust_at(t);
    out.signs = signs_;
    out.cost = f;
    out.iterations = it;
    out.faces.clear();
    for (Eigen::Index i = 0; i < out.u.size(); ++i) {
      if (std::abs(out.u(i)) >= chart_.bounds(i) * (1.0 - 1e-12))
        out.faces.push_back(static_cast<int>(i));
      if (signs_[i] * out.u(i) <= 1e-12 * chart_.bounds(i)) return false;
    }
    for (int j : working)
      if (constraints_[j].wall) return false;
    return true;
  }

 private:
  static bool in_set(const std::vector<int>& set, std::size_t j) {
    return std::find(set.begin(), set.end(), static_cast<int>(j)) != set.end();
  }

  double slack(const Constraint& c, const Eigen::VectorXd& t) const {
    return c.rhs - c.normal.dot(t);
  }

  double tight_tol(const Constraint& c) const {
    return 1e-12 * (1.0 + chart_.bounds(c.rotor));
  }

  bool independent(const std::vector<int>& working, std::size_t j) const {
    const auto k = chart_.dim();
    if (static_cast<Eigen::Index>(working.size()) >= k) return false;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(working.size()) + 1, k);
    for (std::size_t r = 0; r < working.size(); ++r)
      rows.row(static_cast<Eigen::Index>(r)) = constraints_[working[r]].normal.transpose();
    rows.row(rows.rows() - 1) = constraints_[j].normal.transpose();
    return numerical_rank(rows, 1e-9) == rows.rows();
  }

  Eigen::MatrixXd free_basis(const std::vector<int>& working, Eigen::Index k) const {
    if (working.empty()) return Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd aw(static_cast<Eigen::Index>(working.size()), k);
    for (std::size_t r = 0; r < working.size(); ++r)
      aw.row(static_cast<Eigen::Index>(r)) = constraints_[working[r]].normal.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(aw, Eigen::ComputeFullV);
    const auto rank = numerical_rank(aw, 1e-9);
    return svd.matrixV().rightCols(k - rank);
  }

  const FiberChart& chart_;
  const FiberObjective& objective_;
  const SolveOptions& opts_;
  std::vector<int> signs_;
  std::vector<Constraint> constraints_;
  double scale_ = 1.0;
};

// Orthant segments of a one-dimensional fiber, ordered along t.
struct Segment {
  double lower;
  double upper;
  std::vector<int> signs;
};

std::vector<Segment> orthant_segments(const FiberChart& chart, const Interval& iv) {
  std::vector<double> cuts{iv.lower, iv.upper};
  const double col_scale = chart.nullspace.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < chart.particular.size(); ++i) {
    const double p = chart.nullspace(i, 0);
    if (std::abs(p) <= 1e-14 * col_scale) continue;
    const double tb = -chart.particular(i) / p;
    if (tb > iv.lower && tb < iv.upper) cuts.push_back(tb);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<Segment> segments;
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    const double lo = cuts[j];
    const double hi = cuts[j + 1];
    if (hi - lo <= 1e-14 * (1.0 + std::abs(lo) + std::abs(hi)) && cuts.size() > 2) continue;
    const Eigen::VectorXd mid = chart.thrust_at(Eigen::VectorXd::Constant(1, 0.5 * (lo + hi)));
    std::vector<int> s(static_cast<std::size_t>(mid.size()));
    for (Eigen::Index i = 0; i < mid.size(); ++i) s[i] = mid(i) < 0.0 ? -1 : 1;
    segments.push_back({lo, hi, std::move(s)});
  }
  return segments;
}

struct GridPoint {
  Eigen::VectorXd t;
  double cost;
  bool local_min;
};

void pick_seeds(std::vector<GridPoint>& points, const std::vector<int>& signs,
                int wanted, std::vector<Seed>& seeds) {
  std::vector<const GridPoint*> minima;
  for (const auto& p : points)
    if (p.local_min) minima.push_back(&p);
  std::stable_sort(minima.begin(), minima.end(),
                   [](const GridPoint* a, const GridPoint* b) { return a->cost < b->cost; });
  for (std::size_t j = 0; j < minima.size() && static_cast<int>(j) < wanted; ++j)
    seeds.push_back({minima[j]->t, signs});
}

std::vector<Seed> seeds_1d(const FiberChart& chart, const FiberObjective& objective,
                           const Interval& iv, const SolveOptions& opts,
                           std::mt19937_64& rng) {
  std::vector<Seed> seeds;
  const int g = std::max(opts.grid_density, 2);
  for (const auto& seg : orthant_segments(chart, iv)) {
    std::vector<GridPoint> points;
    for (int j = 0; j < g; ++j) {
      const double t = iv.lower + (iv.upper - iv.lower) * (static_cast<double>(j) / (g - 1));
      if (t < seg.lower || t > seg.upper) continue;
      const Eigen::VectorXd tv = Eigen::VectorXd::Constant(1, t);
      double f = 0.0;
      if (!objective.evaluate(chart.thrust_at(tv), seg.signs, f, nullptr)) continue;
      points.push_back({tv, f, false});
    }
    for (std::size_t j = 0; j < points.size(); ++j) {
      const bool left = j == 0 || points[j].cost <= points[j - 1].cost;
      const bool right = j + 1 == points.size() || points[j].cost <= points[j + 1].cost;
      points[j].local_min = left && right;
    }
    const std::size_t before = seeds.size();
    pick_seeds(points, seg.signs, opts.starts_per_orthant, seeds);
    const int have = static_cast<int>(seeds.size() - before);
    for (int r = have; r < opts.starts_per_orthant; ++r) {
      const double t = seg.lower + (seg.upper - seg.lower) * uniform01(rng);
      seeds.push_back({Eigen::VectorXd::Constant(1, t), seg.signs});
    }
  }
  return seeds;
}

std::vector<Seed> seeds_nd(const FiberChart& chart, const FiberObjective& objective,
                           const FeasibleRegion& region, const SolveOptions& opts,
                           std::mt19937_64& rng) {
  const auto k = chart.dim();
  const int cap = static_cast<int>(std::floor(std::pow(kMaxGridPoints, 1.0 / static_cast<double>(k))));
  const int g = std::max(2, std::min(opts.grid_density, cap));
  long total = 1;
  for (Eigen::Index d = 0; d < k; ++d) total *= g;

  const Eigen::VectorXd span = region.box_upper - region.box_lower;
  auto coords = [&](long flat) {
    Eigen::VectorXd t(k);
    for (Eigen::Index d = 0; d < k; ++d) {
      const long idx = flat % g;
      flat /= g;
      t(d) = region.box_lower(d) + span(d) * (static_cast<double>(idx) / (g - 1));
    }
    return t;
  };

  // Grid cost and orthant, indexed by flat grid index.
  std::vector<double> cost(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  std::vector<int> orthant_id(static_cast<std::size_t>(total), -1);
  std::map<std::vector<int>, int> orthant_index;
  std::vector<std::vector<int>> orthants;
  for (long flat = 0; flat < total; ++flat) {
    const Eigen::VectorXd t = coords(flat);
    if (!is_feasible(chart, t)) continue;
    const Eigen::VectorXd u = chart.thrust_at(t);
    auto s = signs_of(u, chart.bounds);
    if (has_zero(s)) continue;
    double f = 0.0;
    if (!objective.evaluate(u, s, f, nullptr)) continue;
    auto [pos, inserted] = orthant_index.emplace(s, static_cast<int>(orthants.size()));
    if (inserted) orthants.push_back(s);
    cost[flat] = f;
    orthant_id[flat] = pos->second;
  }

  std::vector<std::vector<GridPoint>> per_orthant(orthants.size());
  std::vector<std::vector<long>> members(orthants.size());
  for (long flat = 0; flat < total; ++flat) {
    const int id = orthant_id[flat];
    if (id < 0) continue;
    bool local_min = true;
    long stride = 1;
    for (Eigen::Index d = 0; d < k && local_min; ++d) {
      const long idx = (flat / stride) % g;
      for (int dir : {-1, 1}) {
        const long nidx = idx + dir;
        if (nidx < 0 || nidx >= g) continue;
        const long nflat = flat + dir * stride;
        if (orthant_id[nflat] == id && cost[nflat] < cost[flat]) {
          local_min = false;
          break;
        }
      }
      stride *= g;
    }
    per_orthant[id].push_back({coords(flat), cost[flat], local_min});
    members[id].push_back(flat);
  }

  std::vector<Seed> seeds;
  for (std::size_t id = 0; id < orthants.size(); ++id) {
    const std::size_t before = seeds.size();
    pick_seeds(per_orthant[id], orthants[id], opts.starts_per_orthant, seeds);
    const int have = static_cast<int>(seeds.size() - before);
    for (int r = have; r < opts.starts_per_orthant; ++r) {
      const auto pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(members[id].size()));
      Eigen::VectorXd t = coords(members[id][std::min(pick, members[id].size() - 1)]);
      Eigen::VectorXd jittered = t;
      for (Eigen::Index d = 0; d < k; ++d)
        jittered(d) += (uniform01(rng) - 0.5) * span(d) / (g - 1);
      if (is_feasible(chart, jittered) &&
          signs_of(chart.thrust_at(jittered), chart.bounds) == orthants[id])
        t = jittered;
      seeds.push_back({t, orthants[id]});
    }
  }
  return seeds;
}

Minimizer to_minimizer(const Model& model, const Candidate& c) {
  Minimizer out;
  out.thrusts = c.u;
  out.spins = thrust_to_spin(c.u);
  out.t_param = c.t;
  out.cost = c.cost;
  out.on_boundary = c.faces;
  out.orthant = c.signs;
  out.iterations = c.iterations;
  try {
    const auto kkt = kkt_check(model, out.spins);
    out.kkt_residual = kkt.residual;
    out.multiplier = kkt.multiplier;
  } catch (const Error&) {
    out.kkt_residual = kNaN;
  }
  return out;
}

}  // namespace

void SolveOptions::validate() const {
  if (starts_per_orthant <= 0 || grid_density <= 1 || max_iterations <= 0 ||
      !(step_tolerance > 0.0) || !(cost_tolerance > 0.0) || !(global_gap > 0.0))
    throw Error(ErrorCode::validation_error,
                "solve options: all counts and tolerances must be positive "
                "(grid_density at least 2)");
}

FiberObjective::FiberObjective(const Model& model,
                               std::optional<Eigen::MatrixXd> congruence)
    : model_(&model) {
  const auto m = model.task_dim();
  if (congruence) {
    if (congruence->rows() != m || congruence->cols() != m)
      throw Error(ErrorCode::dimension_mismatch,
                  "congruence must be " + std::to_string(m) + "x" + std::to_string(m));
    scaled_alloc_ = *congruence * model.alloc_matrix();
  } else {
    scaled_alloc_ = model.alloc_matrix();
  }
  const auto n = model.num_rotors();
  inertia_.resize(n);
  drag_.resize(n);
  torque_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inertia_(i) = model.rotor(i).inertia;
    drag_(i) = model.rotor(i).drag_coeff;
    torque_(i) = model.rotor(i).torque_limit;
  }
}

std::optional<double> FiberObjective::cost(const Eigen::VectorXd& u) const {
  const auto m = scaled_alloc_.rows();
  const auto n = scaled_alloc_.cols();
  if (m == 1) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = std::abs(u(i));
      const double h = std::max(0.0, (torque_(i) - drag_(i) * x) / inertia_(i));
      const double a = scaled_alloc_(0, i);
      d += 4.0 * x * h * h * a * a;
    }
    if (!(d > kDetFloor)) return std::nullopt;
    return -0.5 * std::log(d);
  }
  TaskMatrix<double> d = TaskMatrix<double>::Zero(m, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = std::abs(u(i));
    const double h = std::max(0.0, (torque_(i) - drag_(i) * x) / inertia_(i));
    d.noalias() += (4.0 * x * h * h) * scaled_alloc_.col(i) * scaled_alloc_.col(i).transpose();
  }
  const Eigen::LDLT<TaskMatrix<double>> ldlt(d);
  const auto ld = detail::log_det_from<double>(ldlt);
  if (ld.singular) return std::nullopt;
  return -0.5 * ld.value;
}

bool FiberObjective::evaluate(const Eigen::VectorXd& u, const std::vector<int>& signs,
                              double& cost, Eigen::VectorXd* grad) const {
  const auto m = scaled_alloc_.rows();
  const auto n = scaled_alloc_.cols();
  TaskMatrix<double> d = TaskMatrix<double>::Zero(m, m);
  // Clamped to the closed orthant and box so rounding just outside them
  // cannot manufacture authority.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = std::max(0.0, signs[i] * u(i));
    const double h = std::max(0.0, (torque_(i) - drag_(i) * x) / inertia_(i));
    d.noalias() += (4.0 * x * h * h) * scaled_alloc_.col(i) * scaled_alloc_.col(i).transpose();
  }
  const Eigen::LDLT<TaskMatrix<double>> ldlt(d);
  const auto ld = detail::log_det_from<double>(ldlt);
  if (ld.singular) return false;
  cost = -0.5 * ld.value;
  if (grad) {
    const Eigen::MatrixXd s_cols = ldlt.solve(scaled_alloc_);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = std::max(0.0, signs[i] * u(i));
      const double h = std::max(0.0, (torque_(i) - drag_(i) * x) / inertia_(i));
      const double dg_dx = h * (torque_(i) - 3.0 * drag_(i) * x) / inertia_(i);
      const double q = scaled_alloc_.col(i).dot(s_cols.col(i));
      (*grad)(i) = -2.0 * signs[i] * dg_dx * q;
    }
  }
  return true;
}

double FiberObjective::det(const Eigen::VectorXd& u) const {
  const auto& a = model_->alloc_matrix();
  const auto m = a.rows();
  TaskMatrix<double> d = TaskMatrix<double>::Zero(m, m);
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double x = std::abs(u(i));
    const double h = std::max(0.0, (torque_(i) - drag_(i) * x) / inertia_(i));
    d.noalias() += (4.0 * x * h * h) * a.col(i) * a.col(i).transpose();
  }
  const Eigen::LDLT<TaskMatrix<double>> ldlt(d);
  return detail::log_det_from<double>(ldlt).det;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

SolveReport solve_on_fiber(const Model& model, const Eigen::VectorXd& w,
                           const SolveOptions& opts, const SolveContext& ctx) {
  opts.validate();
  const FiberChart chart = build_chart(model, w);
  if (!achievable_range(model).contains(w))
    throw Error(ErrorCode::infeasible_demand,
                "demanded force lies outside the achievable range");
  const FeasibleRegion region = feasible_t_region(chart);
  if (region.empty)
    throw Error(ErrorCode::infeasible_demand,
                "fiber does not meet the saturation box");

  const FiberObjective objective(model, ctx.congruence);
  std::mt19937_64 rng(opts.seed);
  std::vector<Seed> seeds =
      chart.dim() == 1 ? seeds_1d(chart, objective, region.intervals.front(), opts, rng)
                       : seeds_nd(chart, objective, region, opts, rng);

  for (const auto& warm : ctx.warm_starts) {
    if (warm.size() != chart.particular.size()) continue;
    Eigen::VectorXd t = chart.nullspace.transpose() * (warm - chart.particular);
    if (chart.dim() == 1) {
      const auto& iv = region.intervals.front();
      t(0) = std::clamp(t(0), iv.lower, iv.upper);
    } else if (!is_feasible(chart, t)) {
      continue;
    }
    auto s = signs_of(chart.thrust_at(t), chart.bounds);
    if (has_zero(s)) continue;
    seeds.push_back({t, std::move(s)});
  }

  SolveReport report;
  report.starts = static_cast<int>(seeds.size());
  std::vector<Candidate> candidates;
  bool any_finite = false;
  std::map<std::vector<int>, OrthantRefiner> refiners;
  for (const auto& seed : seeds) {
    auto it = refiners.find(seed.signs);
    if (it == refiners.end())
      it = refiners.emplace(seed.signs, OrthantRefiner(chart, objective, opts, seed.signs)).first;
    double f = 0.0;
    if (!objective.evaluate(chart.thrust_at(seed.t), seed.signs, f, nullptr)) continue;
    any_finite = true;
    Candidate c;
    const bool ok = it->second.refine(seed.t, c);
    report.total_iterations += c.iterations;
    if (ok) candidates.push_back(std::move(c));
  }
  if (!any_finite)
    throw Error(ErrorCode::all_singular,
                "every feasible fiber point loses task-space authority");
  if (candidates.empty())
    throw Error(ErrorCode::all_singular,
                "no local minimizer found away from the authority-loss set");

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return lex_less(a.u, b.u);
  });
  std::vector<Candidate> distinct;
  for (auto& c : candidates) {
    bool duplicate = false;
    for (const auto& kept : distinct)
      if ((kept.u - c.u).norm() <= kDedupDistance) duplicate = true;
    if (!duplicate) distinct.push_back(std::move(c));
  }
  report.local_minima = static_cast<int>(distinct.size());

  const double best = distinct.front().cost;
  const double window = opts.global_gap * std::max(1.0, std::abs(best));
  for (const auto& c : distinct)
    if (c.cost <= best + window) report.minimizers.push_back(to_minimizer(model, c));
  return report;
}

std::vector<Minimizer> minimize_on_fiber(const Model& model, const Eigen::VectorXd& w,
                                         const SolveOptions& opts) {
  return solve_on_fiber(model, w, opts).minimizers;
}

Minimizer brute_force_on_fiber(const Model& model, const Eigen::VectorXd& w, int density) {
  const FiberChart chart = build_chart(model, w);
  const auto k = chart.dim();
  if (k > 2)
    throw Error(ErrorCode::dimensionality,
                "brute force supports fibers of dimension <= 2, got " + std::to_string(k));
  if (density < 2)
    throw Error(ErrorCode::validation_error, "brute force density must be at least 2");
  const FeasibleRegion region = feasible_t_region(chart);
  if (region.empty)
    throw Error(ErrorCode::infeasible_demand, "fiber does not meet the saturation box");

  const FiberObjective objective(model);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_t;
  Eigen::VectorXd t(k);
  Eigen::VectorXd u(chart.particular.size());
  const Eigen::VectorXd span = region.box_upper - region.box_lower;
  auto visit = [&]() {
    u.noalias() = chart.particular + chart.nullspace * t;
    for (Eigen::Index i = 0; i < u.size(); ++i)
      if (std::abs(u(i)) > chart.bounds(i)) return;
    const auto f = objective.cost(u);
    if (f && *f < best) {
      best = *f;
      best_t = t;
    }
  };
  const auto frac = [&](int j) { return static_cast<double>(j) / (density - 1); };
  if (k == 1) {
    for (int j = 0; j < density; ++j) {
      t(0) = region.box_lower(0) + span(0) * frac(j);
      visit();
    }
  } else {
    for (int j0 = 0; j0 < density; ++j0) {
      t(0) = region.box_lower(0) + span(0) * frac(j0);
      for (int j1 = 0; j1 < density; ++j1) {
        t(1) = region.box_lower(1) + span(1) * frac(j1);
        visit();
      }
    }
  }
  if (best_t.size() == 0)
    throw Error(ErrorCode::all_singular, "no grid point with finite cost");

  Candidate c;
  c.t = best_t;
  c.u = chart.thrust_at(best_t);
  c.cost = best;
  c.signs.resize(static_cast<std::size_t>(c.u.size()));
  for (Eigen::Index i = 0; i < c.u.size(); ++i) {
    c.signs[i] = c.u(i) < 0.0 ? -1 : 1;
    if (std::abs(c.u(i)) >= chart.bounds(i) * (1.0 - 1e-12)) c.faces.push_back(static_cast<int>(i));
  }
  return to_minimizer(model, c);
}

KktReport kkt_check(const Model& model, const Eigen::VectorXd& v) {
  const auto& a = model.alloc_matrix();
  const TaskMatrix<double> d = daam_matrix(model, v);
  const Eigen::LDLT<TaskMatrix<double>> ldlt(d);
  if (detail::log_det_from<double>(ldlt).singular)
    throw Error(ErrorCode::singular_daam, "kkt_check: DAAM matrix is singular");
  const Eigen::MatrixXd j = jacobian(model, v);
  if (numerical_rank(j) < model.task_dim())
    throw Error(ErrorCode::singular_daam, "kkt_check: Jacobian is rank deficient");
  const Eigen::VectorXd g = detail::grad_cost_from(model, v, ldlt);

  KktReport report;
  report.gradient_norm = g.norm();
  const Eigen::MatrixXd jt = j.transpose();
  report.multiplier = jt.colPivHouseholderQr().solve(-g);
  report.residual = (g + jt * report.multiplier).norm();
  const Eigen::VectorXd range_part = jt * (j * jt).ldlt().solve(j * g);
  report.projected_residual = (g - range_part).norm();

  if (!(report.residual < 1e-8)) {
    report.componentwise_error = kNaN;
    return report;
  }
  const Eigen::MatrixXd s_cols = ldlt.solve(a);
  Eigen::VectorXd lhs(v.size()), rhs(v.size());
  double scale = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& r = model.rotor(i);
    const double vi = v(i);
    const double sigma = vi > 0.0 ? 1.0 : (vi < 0.0 ? -1.0 : 0.0);
    lhs(i) = a.col(i).dot(report.multiplier);
    rhs(i) = 2.0 * sigma * sac(r, vi) *
             ((r.torque_limit - 3.0 * r.drag_coeff * vi * vi) / r.inertia) *
             a.col(i).dot(s_cols.col(i));
    scale = std::max({scale, std::abs(lhs(i)), std::abs(rhs(i))});
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) == 0.0) continue;
    const double denom = std::max({std::abs(lhs(i)), std::abs(rhs(i)), 1e-8 * scale, 1e-300});
    worst = std::max(worst, std::abs(lhs(i) - rhs(i)) / denom);
  }
  report.componentwise_error = worst;
  return report;
}

}  // namespace daam
