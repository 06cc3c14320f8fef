#include "daam/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "daam/fiber.hpp"
#include "daam/io.hpp"
#include "daam/optimizer.hpp"
#include "daam/section.hpp"
#include "daam/verify.hpp"

namespace daam {

namespace {

using json = nlohmann::ordered_json;
using io::format_double;

constexpr std::size_t kWideColumns = 4;

struct Common {
  std::string model = "";
  std::string out = "-";
  std::uint64_t seed = 0;
  int density = 0;
};

void add_common(CLI::App* cmd, Common& c, int default_density) {
  c.density = default_density;
  cmd->add_option("--model", c.model, "Preset name or model file")->required();
  cmd->add_option("--out", c.out, "Output path ('-' for stdout)");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--density", c.density, "Grid points per axis")
      ->check(CLI::PositiveNumber);
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    io::write_text(path, text);
}

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::string row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) s += ',';
    s += cells[k];
  }
  return s + '\n';
}

std::vector<int> parse_indices(const std::string& text, Eigen::Index n) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int k = 0;
    try {
      k = std::stoi(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::usage_error, "--slice: '" + item + "' is not an index");
    }
    if (k < 1 || k > n)
      throw Error(ErrorCode::usage_error, "--slice: index " + item + " outside 1.." + std::to_string(n));
    out.push_back(k - 1);
  }
  if (out.size() != 2 || out[0] == out[1])
    throw Error(ErrorCode::usage_error, "--slice needs two distinct rotor indices, e.g. 1,2");
  return out;
}

// --- landscape ---------------------------------------------------------------

struct LandscapeArgs {
  Common common;
  std::string slice;
  std::string base;
  double margin = 0.0;
};

std::string landscape(const Model& model, const LandscapeArgs& a) {
  const auto n = model.num_rotors();
  std::vector<int> axes{0, 1};
  if (!a.slice.empty())
    axes = parse_indices(a.slice, n);
  else if (n != 2)
    throw Error(ErrorCode::usage_error, "landscape on more than two rotors needs --slice i,j");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  if (!a.base.empty()) {
    v = io::parse_vector(a.base, "--base");
    if (v.size() != n)
      throw Error(ErrorCode::usage_error, "--base needs " + std::to_string(n) + " spins");
  }
  if (a.margin < 0.0) throw Error(ErrorCode::usage_error, "--margin must be non-negative");
  const int d = std::max(a.common.density, 2);
  const Eigen::VectorXd crit = model.critical_spins();

  std::string csv = row({"v" + std::to_string(axes[0] + 1), "v" + std::to_string(axes[1] + 1),
                         "cost", "volume", "det_daam", "feasible", "regular"});
  for (int i = 0; i < d; ++i) {
    const double h0 = crit(axes[0]) * (1.0 + a.margin);
    v(axes[0]) = -h0 + 2.0 * h0 * (static_cast<double>(i) / (d - 1));
    for (int j = 0; j < d; ++j) {
      const double h1 = crit(axes[1]) * (1.0 + a.margin);
      v(axes[1]) = -h1 + 2.0 * h1 * (static_cast<double>(j) / (d - 1));
      const auto e = daam(model, v);
      csv += row({format_double(v(axes[0])), format_double(v(axes[1])),
                  format_double(e.cost ? *e.cost : std::numeric_limits<double>::infinity()),
                  format_double(e.volume), format_double(e.det), e.is_feasible ? "1" : "0",
                  e.is_regular ? "1" : "0"});
    }
  }
  return csv;
}

// --- fiber -------------------------------------------------------------------

std::string fiber(const Model& model, const Eigen::VectorXd& w, int density) {
  const FiberChart chart = build_chart(model, w);
  const FeasibleRegion region = feasible_t_region(chart);
  if (region.empty)
    throw Error(ErrorCode::infeasible_demand, "fiber does not meet the saturation box");
  const auto k = chart.dim();
  const auto n = model.num_rotors();
  const int d = std::max(density, 2);

  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < k; ++j) header.push_back("t" + std::to_string(j + 1));
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("u" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("v" + std::to_string(i + 1));
  header.push_back("cost");
  header.push_back("feasible");
  std::string csv = row(header);

  long total = 1;
  for (Eigen::Index j = 0; j < k; ++j) total *= d;
  const Eigen::VectorXd span = region.box_upper - region.box_lower;
  for (long flat = 0; flat < total; ++flat) {
    Eigen::VectorXd t(k);
    long rest = flat;
    for (Eigen::Index j = k - 1; j >= 0; --j) {
      t(j) = region.box_lower(j) + span(j) * (static_cast<double>(rest % d) / (d - 1));
      rest /= d;
    }
    const Eigen::VectorXd u = chart.thrust_at(t);
    const Eigen::VectorXd v = thrust_to_spin(u);
    const bool feasible = is_feasible(chart, t, 1e-12);
    if (k > 1 && !feasible) continue;
    std::vector<std::string> cells;
    for (Eigen::Index j = 0; j < k; ++j) cells.push_back(format_double(t(j)));
    for (Eigen::Index i = 0; i < n; ++i) cells.push_back(format_double(u(i)));
    for (Eigen::Index i = 0; i < n; ++i) cells.push_back(format_double(v(i)));
    const auto c = cost(model, v);
    cells.push_back(format_double(c ? *c : std::numeric_limits<double>::infinity()));
    cells.push_back(feasible ? "1" : "0");
    csv += row(cells);
  }
  return csv;
}

// --- optimize ----------------------------------------------------------------

json minimizer_json(const Minimizer& mz) {
  json j;
  j["spins"] = vec(mz.spins);
  j["thrusts"] = vec(mz.thrusts);
  j["t"] = vec(mz.t_param);
  j["cost"] = mz.cost;
  j["kkt_residual"] = mz.kkt_residual;  // NaN serializes as null
  j["multiplier"] = vec(mz.multiplier);
  j["on_boundary"] = mz.on_boundary;
  j["orthant"] = mz.orthant;
  j["iterations"] = mz.iterations;
  return j;
}

json options_json(const SolveOptions& o) {
  return {{"starts_per_orthant", o.starts_per_orthant}, {"grid_density", o.grid_density},
          {"max_iterations", o.max_iterations},         {"step_tolerance", o.step_tolerance},
          {"cost_tolerance", o.cost_tolerance},         {"global_gap", o.global_gap},
          {"seed", o.seed}};
}

// --- section -----------------------------------------------------------------

struct Axis {
  double start;
  double end;
  int count;
};

std::vector<Axis> parse_sweep(const std::string& text) {
  std::vector<Axis> axes;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::stringstream ps(part);
    std::string a, b, c;
    if (!std::getline(ps, a, ':') || !std::getline(ps, b, ':') || !std::getline(ps, c))
      throw Error(ErrorCode::usage_error, "--sweep: expected start:end:count, got '" + part + "'");
    try {
      axes.push_back({std::stod(a), std::stod(b), std::stoi(c)});
    } catch (const std::exception&) {
      throw Error(ErrorCode::usage_error, "--sweep: cannot read '" + part + "'");
    }
  }
  if (axes.empty() || axes.size() > 2)
    throw Error(ErrorCode::usage_error, "--sweep: give one or two start:end:count axes");
  return axes;
}

struct SectionArgs {
  Common common;
  std::string sweep;
  std::string axes;
  std::string base;
  std::string events;
  bool no_warm = false;
};

TaskGrid section_grid(const Model& model, const SectionArgs& a) {
  const auto m = model.task_dim();
  const auto range = achievable_range(model);
  Eigen::VectorXd base = Eigen::VectorXd::Zero(m);
  if (!a.base.empty()) {
    base = io::parse_vector(a.base, "--base");
    if (base.size() != m) throw Error(ErrorCode::usage_error, "--base needs " + std::to_string(m) + " forces");
  }
  std::vector<int> axes;
  if (!a.axes.empty()) {
    for (double x : io::parse_vector(a.axes, "--axes")) {
      const int k = static_cast<int>(x);
      if (k != x || k < 1 || k > m)
        throw Error(ErrorCode::usage_error, "--axes: components are numbered 1.." + std::to_string(m));
      axes.push_back(k - 1);
    }
  }
  std::vector<Axis> ranges;
  if (!a.sweep.empty()) ranges = parse_sweep(a.sweep);
  if (axes.empty()) axes = m == 1 || ranges.size() == 1 ? std::vector<int>{0} : std::vector<int>{0, 1};
  if (ranges.empty()) {
    // One force: the whole achievable range. Several: a lattice over 90% of it.
    for (int ax : axes) {
      const double reach = m == 1 ? range.upper(ax) : 0.9 * range.upper(ax);
      ranges.push_back({-reach, reach, m == 1 ? 201 : 41});
    }
  }
  if (ranges.size() != axes.size())
    throw Error(ErrorCode::usage_error, "--sweep and --axes disagree on the number of axes");
  if (ranges.size() == 1) return TaskGrid::sweep(base, axes[0], ranges[0].start, ranges[0].end, ranges[0].count);
  return TaskGrid::lattice(base, axes[0], ranges[0].start, ranges[0].end, ranges[0].count, axes[1],
                           ranges[1].start, ranges[1].end, ranges[1].count);
}

std::pair<std::string, std::string> section(const Model& model, const SectionArgs& a) {
  const TaskGrid grid = section_grid(model, a);
  TraceOptions opts;
  opts.solve.seed = a.common.seed;
  if (a.common.density > 0) opts.solve.grid_density = a.common.density;
  opts.warm_start = !a.no_warm;
  const SectionTrace trace = trace_section(model, grid, opts);
  const auto m = model.task_dim();
  const auto n = model.num_rotors();
  const bool lattice = grid.shape.size() == 2;

  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < m; ++j) header.push_back("w" + std::to_string(j + 1));
  header.insert(header.end(), {"status", "count"});
  for (std::size_t k = 1; k <= kWideColumns; ++k) {
    const std::string p = std::to_string(k);
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("u" + p + "_" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("v" + p + "_" + std::to_string(i + 1));
    header.push_back("cost" + p);
  }
  if (lattice) {
    header.push_back("event_next_col");
    header.push_back("event_next_row");
  } else {
    header.push_back("event");
  }
  std::string csv = row(header);

  std::map<std::pair<std::size_t, std::size_t>, const TransitionEvent*> by_pair;
  for (const auto& ev : trace.events) by_pair[{ev.from, ev.to}] = &ev;
  auto event_cell = [&](std::size_t a1, std::size_t b1) -> std::string {
    const auto it = by_pair.find({a1, b1});
    return it == by_pair.end() ? "" : to_string(it->second->kind);
  };

  std::size_t truncated = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto& rec = trace.records[j];
    std::vector<std::string> cells;
    for (Eigen::Index c = 0; c < m; ++c) cells.push_back(format_double(rec.w(c)));
    cells.push_back(rec.failed ? std::string(to_string(*rec.error)) : "ok");
    cells.push_back(std::to_string(rec.minimizers.size()));
    if (rec.minimizers.size() > kWideColumns) ++truncated;
    for (std::size_t k = 0; k < kWideColumns; ++k) {
      if (k < rec.minimizers.size()) {
        const auto& mz = rec.minimizers[k];
        for (Eigen::Index i = 0; i < n; ++i) cells.push_back(format_double(mz.thrusts(i)));
        for (Eigen::Index i = 0; i < n; ++i) cells.push_back(format_double(mz.spins(i)));
        cells.push_back(format_double(mz.cost));
      } else {
        cells.insert(cells.end(), static_cast<std::size_t>(2 * n + 1), "");
      }
    }
    if (lattice) {
      const auto cols = static_cast<std::size_t>(grid.shape[1]);
      cells.push_back((j + 1) % cols ? event_cell(j, j + 1) : "");
      cells.push_back(event_cell(j, j + cols));
    } else {
      cells.push_back(event_cell(j, j + 1));
    }
    csv += row(cells);
  }

  json summary;
  summary["model"] = model.name();
  summary["nodes"] = grid.size();
  summary["shape"] = grid.shape;
  summary["jump_threshold"] = trace.jump_threshold;
  summary["det_reference"] = trace.det_reference;
  summary["warm_start"] = opts.warm_start;
  summary["seed"] = opts.solve.seed;
  summary["rows_with_truncated_cominima"] = truncated;
  json counts = json::object();
  for (auto kind : {TransitionKind::smooth, TransitionKind::reversal,
                    TransitionKind::saturation_attach, TransitionKind::saturation_detach,
                    TransitionKind::authority_barrier, TransitionKind::bifurcation_split,
                    TransitionKind::bifurcation_merge, TransitionKind::unattributed_jump})
    counts[to_string(kind)] = std::count_if(trace.events.begin(), trace.events.end(),
                                            [&](const auto& e) { return e.kind == kind; });
  summary["event_counts"] = counts;
  json events = json::array();
  for (const auto& ev : trace.events) {
    if (ev.kind == TransitionKind::smooth) continue;
    events.push_back({{"from", ev.from}, {"to", ev.to}, {"w_from", vec(grid.nodes[ev.from])},
                      {"w_to", vec(grid.nodes[ev.to])}, {"kind", to_string(ev.kind)},
                      {"jump_size", ev.jump_size}});
  }
  summary["events"] = events;
  json failures = json::array();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto& rec = trace.records[j];
    if (!rec.failed) continue;
    failures.push_back({{"index", j}, {"w", vec(rec.w)}, {"code", to_string(*rec.error)},
                        {"message", rec.message}});
  }
  summary["failures"] = failures;
  return {csv, summary.dump(2) + "\n"};
}

std::string events_path(const SectionArgs& a) {
  if (!a.events.empty()) return a.events;
  if (a.common.out.empty() || a.common.out == "-") return "";
  std::filesystem::path p(a.common.out);
  p.replace_extension();
  return p.string() + ".events.json";
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

json error_json(const Error& e) {
  return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Drag-aware manipulability control allocation toolkit", "daam"};
  app.require_subcommand(1);

  LandscapeArgs land;
  auto* cmd_land = app.add_subcommand("landscape", "Cost, volume and det over a spin grid (CSV)");
  add_common(cmd_land, land.common, 201);
  cmd_land->add_option("--slice", land.slice, "Two 1-based rotor indices for n > 2, e.g. 1,3");
  cmd_land->add_option("--base", land.base, "Spins for the rotors outside the slice");
  cmd_land->add_option("--margin", land.margin, "Extend the grid beyond the box by this fraction");

  Common fib;
  std::string fib_w;
  auto* cmd_fib = app.add_subcommand("fiber", "Sampled points of one fiber (CSV)");
  add_common(cmd_fib, fib, 201);
  cmd_fib->add_option("--w", fib_w, "Demanded force, comma separated")->required();

  Common opt;
  std::string opt_w;
  int starts = SolveOptions{}.starts_per_orthant;
  int max_iter = SolveOptions{}.max_iterations;
  auto* cmd_opt = app.add_subcommand("optimize", "Fiberwise minimizers for one demand (JSON)");
  add_common(cmd_opt, opt, SolveOptions{}.grid_density);
  cmd_opt->add_option("--w", opt_w, "Demanded force, comma separated")->required();
  cmd_opt->add_option("--starts", starts, "Starts per orthant")->check(CLI::PositiveNumber);
  cmd_opt->add_option("--max-iter", max_iter, "Iterations per refinement")->check(CLI::PositiveNumber);

  SectionArgs sec;
  auto* cmd_sec = app.add_subcommand("section", "Optimal section over a demand grid (CSV + JSON)");
  add_common(cmd_sec, sec.common, 0);
  cmd_sec->add_option("--sweep", sec.sweep, "start:end:count[,start:end:count]");
  cmd_sec->add_option("--axes", sec.axes, "1-based force components swept, e.g. 1,2");
  cmd_sec->add_option("--base", sec.base, "Forces for components not swept");
  cmd_sec->add_option("--events", sec.events, "Event summary path (default <out stem>.events.json)");
  cmd_sec->add_flag("--no-warm", sec.no_warm, "Disable warm starts from neighbouring nodes");

  Common ver;
  std::string suites;
  bool corrupt = false;
  auto* cmd_ver = app.add_subcommand("verify", "Run self-checks (JSON report, exit 4 on failure)");
  add_common(cmd_ver, ver, 0);
  cmd_ver->add_option("--suite", suites, "Comma separated: gradcheck,closed_form,invariance,oracle,kkt");
  cmd_ver->add_flag("--debug-corrupt-gradient", corrupt, "Perturb the analytic gradient");

  Common exp;
  auto* cmd_exp = app.add_subcommand("export-model", "Write a model file");
  add_common(cmd_exp, exp, 0);

  auto* cmd_presets = app.add_subcommand("presets", "List bundled models");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error[" << to_string(ErrorCode::usage_error) << "]: " << e.what() << '\n';
    return exit_status(ErrorCode::usage_error);
  }

  try {
    if (cmd_presets->parsed()) {
      for (const auto& p : io::preset_names()) out << p << '\n';
      return 0;
    }
    if (cmd_land->parsed()) {
      emit(land.common.out, landscape(io::load_model(land.common.model), land), out);
    } else if (cmd_fib->parsed()) {
      const Model model = io::load_model(fib.model);
      emit(fib.out, fiber(model, io::parse_vector(fib_w, "--w"), fib.density), out);
    } else if (cmd_opt->parsed()) {
      const Model model = io::load_model(opt.model);
      SolveOptions o;
      o.seed = opt.seed;
      o.grid_density = opt.density;
      o.starts_per_orthant = starts;
      o.max_iterations = max_iter;
      json doc;
      doc["model"] = model.name();
      int status = 0;
      try {
        const Eigen::VectorXd w = io::parse_vector(opt_w, "--w");
        doc["w"] = vec(w);
        const auto report = solve_on_fiber(model, w, o);
        doc["status"] = "ok";
        json mins = json::array();
        for (const auto& mz : report.minimizers) mins.push_back(minimizer_json(mz));
        doc["minimizers"] = mins;
        doc["solver"] = {{"options", options_json(o)},
                         {"starts", report.starts},
                         {"total_iterations", report.total_iterations},
                         {"local_minima", report.local_minima}};
      } catch (const Error& e) {
        doc["status"] = "error";
        doc["error"] = error_json(e);
        err << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
        status = exit_status(e.code());
      }
      emit(opt.out, doc.dump(2) + "\n", out);
      return status;
    } else if (cmd_sec->parsed()) {
      const auto [csv, summary] = section(io::load_model(sec.common.model), sec);
      emit(sec.common.out, csv, out);
      if (const auto p = events_path(sec); !p.empty()) io::write_text(p, summary);
    } else if (cmd_ver->parsed()) {
      const Model model = io::load_model(ver.model);
      VerifyOptions vo;
      vo.suites = split(suites);
      vo.seed = ver.seed;
      vo.corrupt_gradient = corrupt;
      const auto checks = run_verify(model, vo);
      bool all = true;
      json list = json::array();
      for (const auto& c : checks) {
        all = all && c.passed;
        list.push_back({{"suite", c.suite}, {"name", c.name}, {"observed", c.observed},
                        {"tolerance", c.tolerance}, {"passed", c.passed}, {"note", c.note}});
      }
      json doc;
      doc["model"] = model.name();
      doc["seed"] = ver.seed;
      doc["passed"] = all;
      doc["checks"] = list;
      emit(ver.out, doc.dump(2) + "\n", out);
      if (!all) {
        err << "error[" << to_string(ErrorCode::verification_failed) << "]: "
            << std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; })
            << " check(s) failed\n";
        return exit_status(ErrorCode::verification_failed);
      }
    } else if (cmd_exp->parsed()) {
      emit(exp.out, io::model_to_json(io::load_model(exp.model)), out);
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_status(e.code());
  }
  return 0;
}

}  // namespace daam
