#pragma once

// Batch runs: one output directory per experiment holding config.json, CSV outputs and
// report.json, plus verification of finished run directories and run-to-run diffs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stefan/config.hpp"
#include "stefan/error.hpp"
#include "stefan/field_io.hpp"
#include "stefan/format.hpp"
#include "stefan/heat.hpp"
#include "stefan/mollifier.hpp"
#include "stefan/report.hpp"
#include "stefan/stefan1d.hpp"
#include "stefan/stefan3d.hpp"
#include "stefan/verify.hpp"

namespace stefan {

namespace fs = std::filesystem;

inline constexpr double kNoTolerance = std::numeric_limits<double>::quiet_NaN();

namespace detail {

inline std::string csv_row(std::initializer_list<double> values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ',';
    out += format_real(v);
  }
  return out + '\n';
}

inline std::string snapshot_name(const std::string& stem, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%04zu.csv", k);
  return stem + buf;
}

inline void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Least-squares slope of log y against log x.
inline double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("log_slope needs >= 2 pairs");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace detail

/// A numeric CSV table with a header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.at(c));
    return out;
  }
};

inline CsvTable parse_table(const std::string& text, const std::string& what) {
  std::istringstream is(text);
  std::string line;
  CsvTable t;
  if (!std::getline(is, line)) throw InvalidInput(what + ": empty table");
  t.columns = detail::split(line, ',');
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : detail::split(line, ',')) row.push_back(detail::parse_real(cell, what));
    if (row.size() != t.columns.size()) throw InvalidInput(what + ": ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string front_csv(const FrontTrajectory& f) {
  std::string out = "t,s,sdot\n";
  for (std::size_t k = 0; k < f.size(); ++k) {
    out += detail::csv_row({f.times[k], f.positions[k], f.velocities[k]});
  }
  return out;
}

// ---------------------------------------------------------------- solve1d

inline void run_solve1d(const ExperimentConfig& cfg, const fs::path& dir, RunReport& rep) {
  const Problem1D prob = parse_problem_1d(ConfigNode(cfg.document, ""));
  const StefanSpec1D& spec = prob.spec;
  detail::make_dirs(dir / "fields");
  const auto observer = [&](const Stefan1DResult& r) {
    const std::size_t k = r.liquid.size() - 1;
    const std::string liquid = "fields/" + detail::snapshot_name("liquid", k);
    write_field_csv(dir / liquid, r.liquid.back());
    rep.add_file(liquid);
    if (spec.solid) {
      const std::string solid = "fields/" + detail::snapshot_name("solid", k);
      write_field_csv(dir / solid, r.solid.back());
      rep.add_file(solid);
    }
    write_text(dir / "front.csv", front_csv(r.front));
    rep.add_file("front.csv");
  };
  const Stefan1DResult r = solve_stefan(spec, observer);
  const Stefan1DDiagnostics& d = r.diagnostics;

  rep.series["steps"] = d.steps;
  rep.series["dt"] = d.dt;
  rep.series["stability_limit"] = stefan_step_limit(spec, initial_state(spec));
  rep.series["warm_start"] = d.warm_start;
  rep.series["times"] = r.front.times;
  rep.series["continuity"] = nlohmann::json::array();
  for (const auto& [t, m] : d.continuity) rep.series["continuity"].push_back({t, m});

  rep.add({"max_principle", static_cast<double>(d.max_principle_violations), 0.0,
           d.max_principle_violations == 0, true,
           "nodes outside [min data, max data] by more than 1e-12*scale; largest excess " +
               format_real(d.max_principle_excess)});
  const double slack = 1e-12 * std::max(1.0, spec.b);
  rep.add({"front_monotone", d.min_front_increment, -slack, d.min_front_increment >= -slack,
           prob.melting(),
           prob.melting() ? "one-phase run with nonnegative data: the front may not recede"
                          : "recorded only; the front may recede for this data"});
  rep.add({"ut_nonnegative", static_cast<double>(d.ut_violations), 0.0, d.ut_violations == 0, false,
           "interior nodes with u_t below -" + format_real(d.ut_tolerance) + "; min u_t " +
               format_real(d.min_ut)});
  rep.add({"initial_continuity", d.continuity.empty() ? 0.0 : d.continuity.back().second,
           kNoTolerance, true, false,
           "\\int |u_t - kappa phi''| after the first steps; full sequence in series.continuity"});
  if (prob.reference) {
    const double exact = prob.reference->front(spec.T);
    const double err = std::abs(r.front.positions.back() - exact) / exact;
    rep.add({"similarity_front", err, 1e-2, err <= 1e-2, true,
             "relative front error at T against 2 lambda sqrt(kappa t), lambda = " +
                 format_real(prob.reference->base.lambda())});
  }
}

// ---------------------------------------------------------------- solve3d

inline std::string mean_height_csv(const Stefan3DResult& r) {
  std::string out = "t,mean_height\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out += detail::csv_row({r.times[k], r.mean_heights[k]});
  }
  return out;
}

inline void run_solve3d(const ExperimentConfig& cfg, const fs::path& dir, RunReport& rep) {
  const Problem3D prob = parse_problem_3d(ConfigNode(cfg.document, ""));
  const StefanSpec3D& spec = prob.spec;
  detail::make_dirs(dir / "fronts");
  const auto observer = [&](const Stefan3DResult& r) {
    const std::string name = "fronts/" + detail::snapshot_name("front", r.fronts.size() - 1);
    write_field_csv(dir / name, r.fronts.back());
    rep.add_file(name);
    write_text(dir / "front_mean.csv", mean_height_csv(r));
    rep.add_file("front_mean.csv");
  };
  const Stefan3DResult r = solve_stefan3d(spec, observer);
  const Stefan3DDiagnostics& d = r.diagnostics;
  write_field_csv(dir / "temperature_final.csv",
                  TemperatureField(r.final_state.volume, r.final_state.time, r.final_state.u));
  rep.add_file("temperature_final.csv");

  rep.series["steps"] = d.steps;
  rep.series["dt"] = d.dt;
  rep.series["stability_limit"] = stefan3d_step_limit(initial_state_3d(spec));
  rep.series["lipschitz"] = d.lipschitz;
  std::vector<double> snaps;
  for (const auto& f : r.fronts) snaps.push_back(f.time());
  rep.series["times"] = snaps;

  rep.add({"consistency", d.max_consistency, 1e-10, d.max_consistency <= 1e-10, true,
           "max over steps of |rho_t - V_n sqrt(1 + |grad rho|^2)| at the front"});
  const double slack = 1e-12 * spec.extent[2];
  rep.add({"front_monotone", d.min_front_increment, -slack, d.min_front_increment >= -slack,
           prob.melting(),
           prob.melting() ? "nonnegative boundary data: the front may not recede"
                          : "recorded only; the front may recede for this data"});
  rep.add({"nonnegative_temperature", static_cast<double>(d.negative_node_steps), 0.0,
           d.negative_node_steps == 0, prob.melting(),
           "steps with a liquid node below -1e-12*scale; min temperature " +
               format_real(d.min_temperature)});
  double rise = 0.0;
  for (std::size_t k = 1; k < d.lipschitz.size(); ++k) {
    rise = std::max(rise, d.lipschitz[k] - d.lipschitz[k - 1]);
  }
  rep.add({"lipschitz_non_increasing", rise, 1e-12, rise <= 1e-12, false,
           "largest increase of max(|rho_x|, |rho_y|) between snapshots"});
  if (prob.reference) {
    const double exact = prob.reference->front(spec.T);
    const double err = std::abs(r.mean_heights.back() - exact) / exact;
    rep.add({"similarity_front", err, 1e-2, err <= 1e-2, true,
             "relative error of the mean front height at T against 2 lambda sqrt(t)"});
  }
}

// ---------------------------------------------------------------- mollify

struct MollifyOutcome {
  std::vector<double> mass_errors;
  std::vector<std::vector<DerivativeNorm>> norms;  // per epsilon
  std::vector<ConvergenceSample> convergence;
};

inline void add_mollify_checks(RunReport& rep, const std::vector<double>& epsilons,
                               const MollifyOutcome& o, bool scaling_hard) {
  const double mass = *std::max_element(o.mass_errors.begin(), o.mass_errors.end());
  rep.add({"unit_mass", mass, 1e-8, mass <= 1e-8, true, "max |sum of kernel weights - 1|"});
  double ratio = 0.0;
  for (const auto& per_eps : o.norms) {
    for (const DerivativeNorm& n : per_eps) {
      const double r = n.bound > 0.0 ? n.measured / n.bound : (n.measured > 0.0 ? INFINITY : 0.0);
      ratio = std::max(ratio, r);
    }
  }
  rep.add({"derivative_bounds", ratio, 1.0 + 1e-12, ratio <= 1.0 + 1e-12, true,
           "max over epsilon and order of measured / (sup|f| M_m / eps^m)"});
  if (!o.convergence.empty()) {
    double rise = 0.0;
    for (std::size_t i = 1; i < o.convergence.size(); ++i) {
      rise = std::max(rise, o.convergence[i].l2_error - o.convergence[i - 1].l2_error);
    }
    rep.add({"l2_monotone", rise, 1e-8, rise <= 1e-8, true,
             "largest increase of ||f^eps - f||_L2(U_eps) as eps decreases"});
  }
  if (epsilons.size() >= 2 && o.norms.front().size() >= 2) {
    double worst = 0.0;
    for (std::size_t m = 1; m < o.norms.front().size(); ++m) {
      std::vector<double> y;
      for (const auto& per_eps : o.norms) y.push_back(std::max(per_eps[m].measured, 1e-300));
      const double slope = detail::log_slope(epsilons, y);
      worst = std::max(worst, std::abs(slope + static_cast<double>(m)) / static_cast<double>(m));
    }
    rep.add({"derivative_scaling", worst, 0.1, worst <= 0.1, scaling_hard,
             "max over orders m of |fitted exponent + m| / m for sup|D^m f^eps| ~ eps^-m"});
  }
}

inline MollifyOutcome mollify_study(const TemperatureField& f, const std::vector<double>& epsilons,
                                    int order, MollifyDomain domain, const fs::path* dir,
                                    RunReport& rep) {
  MollifyOutcome o;
  std::string smooth = "epsilon,order,measured,bound\n";
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    const MollifierKernel kernel = MollifierKernel::for_grid(epsilons[i], f.grid());
    o.mass_errors.push_back(std::abs(kernel.mass() - 1.0));
    if (dir) {
      const MaskedField fe = mollify(f, kernel, domain);
      const std::string name = detail::snapshot_name("mollified", i);
      write_field_csv(*dir / name, fe.field);
      rep.add_file(name);
    }
    o.norms.push_back(smoothness_report(f, kernel, order));
    for (const DerivativeNorm& n : o.norms.back()) {
      smooth += detail::csv_row({epsilons[i], static_cast<double>(n.order), n.measured, n.bound});
    }
  }
  if (epsilons.size() >= 2) o.convergence = l2_convergence(f, epsilons);
  if (dir) {
    write_text(*dir / "smoothness.csv", smooth);
    rep.add_file("smoothness.csv");
    std::string conv = "epsilon,l2_error\n";
    for (const auto& c : o.convergence) conv += detail::csv_row({c.epsilon, c.l2_error});
    write_text(*dir / "convergence.csv", conv);
    rep.add_file("convergence.csv");
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    for (const DerivativeNorm& n : o.norms[i]) rows.push_back({epsilons[i], n.order, n.measured, n.bound});
  }
  rep.series["smoothness"] = rows;
  return o;
}

inline void run_mollify(const ExperimentConfig& cfg, const fs::path& dir, RunReport& rep) {
  const MollifyProblem prob = parse_problem_mollify(ConfigNode(cfg.document, ""));
  const MollifyOutcome o = mollify_study(prob.field, prob.epsilons, prob.order, prob.domain, &dir, rep);
  add_mollify_checks(rep, prob.epsilons, o, prob.field_type == "step");
}

/// Mollifies a field read from disk; the report is the only output.
inline RunReport mollify_field(const TemperatureField& f, double epsilon, int order,
                               MollifyDomain domain = MollifyDomain::interior) {
  if (order < 0 || order > 4) throw InvalidInput("order must be in 0..4");
  RunReport rep;
  rep.mode = "mollify";
  rep.provenance.started = utc_timestamp();
  rep.provenance.config_hash = config_hash(
      {{"epsilon", epsilon}, {"order", order}, {"field", fnv1a(field_to_csv(f))}});
  const MollifyOutcome o = mollify_study(f, {epsilon}, order, domain, nullptr, rep);
  add_mollify_checks(rep, {epsilon}, o, false);
  rep.provenance.finished = utc_timestamp();
  return rep;
}

// ---------------------------------------------------------------- benchmark

inline StefanSpec1D similarity_spec(const BenchmarkProblem& p, std::size_t intervals) {
  const SimilarityReference ref = SimilarityReference::make(p.stefan_number, 1.0, 1.0);
  StefanSpec1D spec;
  spec.k1 = p.stefan_number;
  spec.t0 = p.t0;
  spec.T = p.T;
  spec.b = ref.front(p.t0);
  spec.f = [](double) { return 1.0; };
  spec.phi = [ref, t0 = p.t0](double x) { return ref.temperature(x, t0); };
  spec.resolution.liquid_intervals = intervals;
  spec.resolution.cfl = p.cfl;
  spec.resolution.snapshots = 4;
  return spec;
}

struct LadderRung {
  std::size_t intervals = 0;
  double h = 0.0;
  double dt = 0.0;
  double front = 0.0;
  double error = 0.0;
};

/// Front error at T of similarity runs on a spacing ladder with dt proportional to h^2.
inline std::vector<LadderRung> space_ladder(const BenchmarkProblem& p) {
  const SimilarityReference ref = SimilarityReference::make(p.stefan_number, 1.0, 1.0);
  std::vector<LadderRung> out;
  for (std::size_t n : p.ladder) {
    const Stefan1DResult r = solve_stefan(similarity_spec(p, n));
    const double s = r.front.positions.back();
    out.push_back({n, 1.0 / static_cast<double>(n), r.diagnostics.dt, s, std::abs(s - ref.front(p.T))});
  }
  return out;
}

/// Fronts at T at the coarsest spacing for dt, dt/2, dt/4, ...
inline std::vector<LadderRung> time_ladder(const BenchmarkProblem& p) {
  StefanSpec1D spec = similarity_spec(p, p.ladder.front());
  const std::size_t steps = stefan_time_grid(spec).first;
  std::vector<LadderRung> out;
  for (std::size_t j = 0; j <= p.time_refinements; ++j) {
    const double scale = std::ldexp(1.0, static_cast<int>(j));
    // Nudged below the exact value so the step count rounds to steps * 2^j.
    spec.resolution.dt = (p.T - p.t0) / (static_cast<double>(steps) * scale) * (1.0 + 1e-9);
    const Stefan1DResult r = solve_stefan(spec);
    out.push_back({p.ladder.front(), 1.0 / static_cast<double>(p.ladder.front()), r.diagnostics.dt,
                   r.front.positions.back(), 0.0});
  }
  for (std::size_t j = 0; j + 1 < out.size(); ++j) out[j].error = std::abs(out[j].front - out[j + 1].front);
  return out;
}

/// |conservation residual| of Dirichlet runs from sin(pi x) on a spacing ladder.
inline std::vector<double> conservation_ladder(const std::vector<std::size_t>& ladder) {
  std::vector<double> out;
  for (std::size_t n : ladder) {
    const Grid g = Grid::nodal_line(0.0, 1.0, n);
    const double h = g.spacing(0);
    const auto u0 = TemperatureField::sample(g, 0.0, [](const Point& x) {
      return std::sin(std::numbers::pi * x[0]);
    });
    const HeatTrajectory traj =
        solve_dirichlet(OperatorCoefficients::laplacian(1), u0, zero_boundary(), 0.1, 0.4 * h * h);
    out.push_back(std::abs(conservation_residual(traj)));
  }
  return out;
}

inline void run_benchmark(const ExperimentConfig& cfg, const fs::path& dir, RunReport& rep) {
  const BenchmarkProblem p = parse_problem_benchmark(ConfigNode(cfg.document, ""));

  const auto space = space_ladder(p);
  std::string text = "intervals,h,dt,front,error\n";
  std::vector<double> hs, errs;
  for (const auto& r : space) {
    text += detail::csv_row({static_cast<double>(r.intervals), r.h, r.dt, r.front, r.error});
    hs.push_back(r.h);
    errs.push_back(r.error);
  }
  write_text(dir / "ladder.csv", text);
  rep.add_file("ladder.csv");
  const double space_order = detail::log_slope(hs, errs);
  rep.add({"space_order", space_order, 1.8, space_order >= 1.8, true,
           "least-squares slope of log front error at T against log h, dt proportional to h^2"});

  const auto time = time_ladder(p);
  text = "dt,front,difference\n";
  double time_order = std::numeric_limits<double>::infinity();
  std::vector<double> observed;
  for (std::size_t j = 0; j < time.size(); ++j) {
    text += detail::csv_row({time[j].dt, time[j].front, time[j].error});
    if (j + 2 < time.size()) {
      observed.push_back(std::log2(time[j].error / time[j + 1].error));
      time_order = std::min(time_order, observed.back());
    }
  }
  write_text(dir / "time_ladder.csv", text);
  rep.add_file("time_ladder.csv");
  rep.add({"time_order", time_order, 0.9, time_order >= 0.9, true,
           "smallest log2 ratio of successive Richardson differences under dt halving at h = 1/" +
               std::to_string(p.ladder.front())});

  const auto cons = conservation_ladder(p.conservation_ladder);
  text = "intervals,residual\n";
  double ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cons.size(); ++i) {
    text += detail::csv_row({static_cast<double>(p.conservation_ladder[i]), cons[i]});
    if (i > 0) ratio = std::min(ratio, cons[i - 1] / cons[i]);
  }
  write_text(dir / "conservation.csv", text);
  rep.add_file("conservation.csv");
  rep.add({"conservation_ratio", ratio, 3.5, ratio >= 3.5, true,
           "smallest reduction of |R| per rung for the heat equation from sin(pi x)"});

  rep.series["space_errors"] = errs;
  rep.series["time_orders"] = observed;
  rep.series["conservation"] = cons;
}

// ---------------------------------------------------------------- verify

inline const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names{
      "report_schema", "config_hash",  "run_status",         "max_principle_suite",
      "max_principle", "front_monotone", "front_in_box",     "delta_bounds",
      "delta_similarity", "initial_continuity", "barrier_residual", "lipschitz_non_increasing",
      "consistency"};
  return names;
}

namespace detail {

struct Run1DData {
  Stefan1DResult run;
  Problem1D problem;
};

inline Run1DData load_run_1d(const fs::path& dir, const ExperimentConfig& cfg) {
  Run1DData out{{}, parse_problem_1d(ConfigNode(cfg.document, ""))};
  const CsvTable front = parse_table(read_text(dir / "front.csv"), "front.csv");
  if (front.rows.size() < 2) throw InvalidInput("front.csv needs at least 2 rows");
  out.run.front.times = front.column(0);
  out.run.front.positions = front.column(1);
  out.run.front.velocities = front.column(2);
  out.run.liquid = HeatTrajectory(out.run.front.times[1] - out.run.front.times[0]);
  for (std::size_t k = 0; k < front.rows.size(); ++k) {
    out.run.liquid.push_back(read_field_csv(dir / "fields" / snapshot_name("liquid", k)));
  }
  return out;
}

}  // namespace detail

inline void verify_solve1d(const fs::path& dir, const ExperimentConfig& cfg, RunReport& rep,
                           const std::function<bool(const std::string&)>& wants) {
  const detail::Run1DData data = detail::load_run_1d(dir, cfg);
  const Stefan1DResult& run = data.run;
  const Problem1D& prob = data.problem;
  const auto& s = run.front.positions;
  const std::size_t n = run.liquid.grid().count(0) - 1;
  const double reach = prob.spec.solid ? prob.spec.solid->length
                                       : 1.25 * *std::max_element(s.begin(), s.end());
  const Grid g = Grid::nodal_line(0.0, reach, 4 * n);
  const double h = g.spacing(0);
  const HeatTrajectory phys = to_physical(run, g);

  if (wants("max_principle")) {
    const MaxPrincipleReport mp = max_principle_audit(phys);
    rep.add({"max_principle", mp.violation, mp.tolerance, mp.attained_on_boundary, true,
             "space-time maximum of the resampled liquid temperature versus its parabolic boundary"});
  }
  if (wants("front_monotone")) {
    double inc = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < s.size(); ++k) inc = std::min(inc, s[k] - s[k - 1]);
    const double slack = 1e-12 * std::max(1.0, s.front());
    rep.add({"front_monotone", inc, -slack, inc >= -slack, prob.melting(),
             "smallest front increment between snapshots"});
  }
  const CellMask reference =
      CellMask::from_predicate(g, [&](const Point& x) { return x[0] <= s.front() + 1e-12; });
  const std::vector<double> deltas = delta_of_t(phys, reference, run.front.times);
  rep.series["delta"] = deltas;
  if (wants("delta_bounds")) {
    double bad = 0.0;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      bad = std::max({bad, -deltas[k], deltas[k] - reach});
      if (k > 0 && prob.melting()) bad = std::max(bad, deltas[k - 1] - deltas[k]);
    }
    rep.add({"delta_bounds", bad, 0.0, bad <= 0.0, true,
             "delta(t) for G = [0, b] must lie in [0, diameter] and grow while melting"});
  }
  if (prob.reference && wants("delta_similarity")) {
    double worst = 0.0;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      const double expect = std::max(0.0, prob.reference->front(run.front.times[k]) - s.front());
      worst = std::max(worst, std::abs(deltas[k] - expect));
    }
    rep.add({"delta_similarity", worst, h + 1e-12, worst <= h + 1e-12, true,
             "max |delta(t) - (2 lambda sqrt(kappa t) - b)+| against one resampling spacing"});
  }
  if (wants("initial_continuity") && phys.size() >= 3) {
    const double d = 1e-4 * std::max(1.0, s.front());
    const auto& phi = prob.spec.phi;
    const double kappa = prob.spec.kappa;
    const auto ut0 = TemperatureField::sample(g, phys[0].time(), [&](const Point& x) {
      if (x[0] < d || x[0] > s.front() - d) return 0.0;
      return kappa * (phi(x[0] + d) - 2.0 * phi(x[0]) + phi(x[0] - d)) / (d * d);
    });
    const CellMask region = CellMask::from_predicate(
        g, [&](const Point& x) { return x[0] > h && x[0] < 0.9 * s.front(); });
    if (!region.empty()) {
      const auto metric = initial_continuity_metric(phys, ut0, region);
      nlohmann::json series = nlohmann::json::array();
      for (const auto& [t, m] : metric) series.push_back({t, m});
      rep.series["initial_continuity"] = series;
      rep.add({"initial_continuity", metric.front().second, kNoTolerance, true, false,
               "\\int |u_t - kappa phi''| over 0 < x < 0.9 b at the first snapshot interval; "
               "sequence in series.initial_continuity"});
    }
  }
  if (wants("barrier_residual")) {
    const double lowest = *std::min_element(s.begin(), s.end());
    const CellMask region = CellMask::from_predicate(
        g, [&](const Point& x) { return x[0] > 1.5 * h && x[0] < lowest - 2.0 * h; });
    if (!region.empty()) {
      const BarrierParams p{{0.5 * lowest, 0, 0}, phys.back().time(), 1};
      auto residual = heat_residual_field(barrier_field(phys, p));
      for (auto& level : residual) {
        for (std::size_t c = 0; c < level.valid.size(); ++c) {
          if (!region.test(c)) level.valid[c] = 0;
        }
      }
      const ResidualRange range = residual_range(residual);
      const double stated = -(2.0 - 1.0) / 8.0;
      const double direct = -(2.0 + 1.0) / 8.0;
      rep.add({"barrier_residual", range.mean, 1e-3, std::abs(range.mean - stated) <= 1e-3, false,
               "mean of Delta v - v_t for v = u - (|x - x^m|^2 + (t^m - t))/8n over the liquid; "
               "stated value -(2n-1)/8n = " + format_real(stated) + " with Delta v - v_t > 0 claimed, "
               "direct computation gives -(2n+1)/8n = " + format_real(direct) +
               " plus the truncation error of the snapshot spacing; range [" +
               format_real(range.min) + ", " + format_real(range.max) + "]"});
    }
  }
}

inline void verify_solve3d(const fs::path& dir, const ExperimentConfig& cfg, const RunReport& run,
                           RunReport& rep, const std::function<bool(const std::string&)>& wants) {
  const Problem3D prob = parse_problem_3d(ConfigNode(cfg.document, ""));
  std::vector<TemperatureField> fronts;
  for (std::size_t k = 0; fs::exists(dir / "fronts" / detail::snapshot_name("front", k)); ++k) {
    fronts.push_back(read_field_csv(dir / "fronts" / detail::snapshot_name("front", k)));
  }
  if (fronts.empty()) throw InvalidInput("run directory has no front snapshots");
  if (wants("front_monotone")) {
    double inc = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < fronts.size(); ++k)
      for (std::size_t c = 0; c < fronts[k].values().size(); ++c)
        inc = std::min(inc, fronts[k][c] - fronts[k - 1][c]);
    if (fronts.size() < 2) inc = 0.0;
    const double slack = 1e-12 * prob.spec.extent[2];
    rep.add({"front_monotone", inc, -slack, inc >= -slack, prob.melting(),
             "smallest pointwise front increment between snapshots"});
  }
  if (wants("front_in_box")) {
    double bad = 0.0;
    for (const auto& f : fronts)
      for (double r : f.values())
        bad = std::max({bad, -r, r - prob.spec.extent[2], std::isfinite(r) ? 0.0 : INFINITY});
    rep.add({"front_in_box", bad, 0.0, bad <= 0.0, true, "front heights must stay in [0, H]"});
  }
  if (wants("lipschitz_non_increasing")) {
    double rise = 0.0;
    std::vector<double> lip;
    for (const auto& f : fronts) {
      lip.push_back(lipschitz_constant(f.grid(), std::vector<double>(f.values().begin(), f.values().end())));
      if (lip.size() > 1) rise = std::max(rise, lip.back() - lip[lip.size() - 2]);
    }
    rep.series["lipschitz"] = lip;
    rep.add({"lipschitz_non_increasing", rise, 1e-12, rise <= 1e-12, false,
             "largest increase of the front Lipschitz constant between snapshots"});
  }
  if (wants("consistency")) {
    if (const Check* c = run.find("consistency")) {
      Check copy = *c;
      copy.notes = "as recorded by the run: " + copy.notes;
      rep.add(copy);
    }
  }
}

/// Checks a finished run directory. `checks` empty or {"all"} selects every check.
inline RunReport verify_run(const fs::path& dir, const std::vector<std::string>& checks,
                            std::uint64_t seed) {
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto& names = verify_check_names();
    if (checks[i] != "all" && std::find(names.begin(), names.end(), checks[i]) == names.end()) {
      throw ConfigError("/checks/" + std::to_string(i), "unknown check '" + checks[i] + "'");
    }
  }
  const bool all = checks.empty() || std::find(checks.begin(), checks.end(), "all") != checks.end();
  const auto wants = [&](const std::string& name) {
    return all || std::find(checks.begin(), checks.end(), name) != checks.end();
  };
  RunReport rep;
  rep.mode = "verify";
  rep.seed = seed;
  rep.provenance.started = utc_timestamp();

  const nlohmann::json run_json = read_json_file(dir / "report.json");
  const nlohmann::json config_json = read_json_file(dir / "config.json");
  rep.provenance.config_hash = config_hash(config_json);
  rep.series["run"] = fs::absolute(dir).lexically_normal().string();

  std::vector<std::string> problems = validate_report(run_json);
  if (problems.empty()) {
    for (const auto& f : run_json["files"]) {
      if (!fs::exists(dir / f.get<std::string>())) problems.push_back("listed file missing: " + f.get<std::string>());
    }
  }
  if (wants("report_schema")) {
    rep.add({"report_schema", static_cast<double>(problems.size()), 0.0, problems.empty(), true,
             problems.empty() ? "report validates and every listed file exists" : problems.front()});
  }
  if (!problems.empty()) {
    rep.provenance.finished = utc_timestamp();
    return rep;
  }
  const RunReport run = report_from_json(run_json);
  const ExperimentConfig cfg = parse_config(config_json);
  if (cfg.mode != run.mode) throw InvalidInput("config mode and report mode differ");
  if (wants("config_hash")) {
    const bool same = config_hash(config_json) == run.provenance.config_hash;
    rep.add({"config_hash", same ? 0.0 : 1.0, 0.0, same, true,
             "config.json hashes to the value recorded in the report"});
  }
  if (wants("run_status")) {
    std::size_t failed = 0;
    for (const Check& c : run.checks) failed += c.hard && !c.pass;
    rep.add({"run_status", static_cast<double>(failed), 0.0, run.status() == "pass", true,
             "run finished with status '" + run.status() + "'"});
  }
  if (wants("max_principle_suite")) {
    const MaxPrincipleSuite suite = max_principle_suite(seed);
    rep.add({"max_principle_suite", static_cast<double>(suite.violations), 0.0, suite.violations == 0,
             true, std::to_string(suite.runs) + " randomized Dirichlet runs under the stability limit; "
             "worst relative violation " + format_real(suite.worst)});
  }
  if (run.status() != "error") {
    if (run.mode == "solve1d") verify_solve1d(dir, cfg, rep, wants);
    if (run.mode == "solve3d") verify_solve3d(dir, cfg, run, rep, wants);
  }
  rep.provenance.finished = utc_timestamp();
  return rep;
}

inline void run_verify(const ExperimentConfig& cfg, const fs::path&, RunReport& rep) {
  const RunReport v = verify_run(cfg.document.at("run").get<std::string>(), cfg.checks, cfg.seed);
  for (const Check& c : v.checks) rep.add(c);
  rep.series = v.series;
}

// ---------------------------------------------------------------- run

/// Runs an experiment into `dir`. On a solver failure the outputs written so far stay,
/// a FAILED marker and an error report are written, and the failure is rethrown.
inline RunReport run(const ExperimentConfig& cfg, const fs::path& dir) {
  detail::make_dirs(dir);
  RunReport rep;
  rep.mode = cfg.mode;
  rep.seed = cfg.seed;
  rep.provenance.config_hash = config_hash(cfg.document);
  rep.provenance.started = utc_timestamp();
  std::error_code ec;
  fs::remove(dir / "FAILED", ec);
  write_json(dir / "config.json", cfg.document);
  rep.add_file("config.json");

  auto finish = [&] {
    rep.provenance.finished = utc_timestamp();
    rep.add_file("report.json");
    write_json(dir / "report.json", to_json(rep));
  };
  try {
    if (cfg.mode == "solve1d") {
      run_solve1d(cfg, dir, rep);
    } else if (cfg.mode == "solve3d") {
      run_solve3d(cfg, dir, rep);
    } else if (cfg.mode == "mollify") {
      run_mollify(cfg, dir, rep);
    } else if (cfg.mode == "benchmark") {
      run_benchmark(cfg, dir, rep);
    } else {
      run_verify(cfg, dir, rep);
    }
  } catch (const NumericalFailure& e) {
    rep.error = e.what();
    write_text(dir / "FAILED", std::string(e.what()) + "\n");
    rep.add_file("FAILED");
    finish();
    throw;
  }
  if (cfg.mode != "verify" && !cfg.checks.empty()) {
    std::vector<Check> kept;
    for (const std::string& name : cfg.checks) {
      const Check* c = rep.find(name);
      if (!c) throw ConfigError("/checks", "run produced no check named '" + name + "'");
      kept.push_back(*c);
    }
    rep.checks = kept;
  }
  finish();
  return rep;
}

// ---------------------------------------------------------------- compare

struct FileDiff {
  bool compared = false;
  double max_abs = 0.0;
  double max_rel = 0.0;
  std::string notes;
};

namespace detail {

inline double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), at) - x.begin());
  const double w = (at - x[hi - 1]) / (x[hi] - x[hi - 1]);
  return (1.0 - w) * y[hi - 1] + w * y[hi];
}

inline void accumulate(FileDiff& d, double a, double b, double& scale) {
  d.max_abs = std::max(d.max_abs, std::abs(a - b));
  scale = std::max(scale, std::abs(a));
}

inline FileDiff diff_file(const fs::path& a, const fs::path& b) {
  FileDiff d;
  const std::string ta = read_text(a), tb = read_text(b);
  double scale = 0.0;
  if (ta.rfind("# grid", 0) == 0) {
    const TemperatureField fa = field_from_csv(ta), fb = field_from_csv(tb);
    if (!(fa.grid() == fb.grid())) {
      d.notes = "grids differ; not compared";
      return d;
    }
    for (std::size_t c = 0; c < fa.values().size(); ++c) accumulate(d, fa[c], fb[c], scale);
  } else {
    const CsvTable xa = parse_table(ta, a.string()), xb = parse_table(tb, b.string());
    if (xa.columns != xb.columns) {
      d.notes = "columns differ; not compared";
      return d;
    }
    if (xa.columns.front() == "t" && !xb.rows.empty()) {
      // Time series: b is interpolated onto a's times.
      const auto tb_col = xb.column(0);
      for (std::size_t col = 1; col < xa.columns.size(); ++col) {
        const auto yb = xb.column(col);
        for (const auto& row : xa.rows) accumulate(d, row[col], interpolate(tb_col, yb, row[0]), scale);
      }
      d.notes = "time series; b interpolated linearly onto a's times";
    } else {
      if (xa.rows.size() != xb.rows.size()) {
        d.notes = "row counts differ; not compared";
        return d;
      }
      for (std::size_t r = 0; r < xa.rows.size(); ++r)
        for (std::size_t c = 0; c < xa.columns.size(); ++c) accumulate(d, xa.rows[r][c], xb.rows[r][c], scale);
    }
  }
  d.compared = true;
  d.max_rel = scale > 0.0 ? d.max_abs / scale : d.max_abs;
  return d;
}

}  // namespace detail

/// Per-file max-abs and relative differences between the CSV outputs of two runs of the
/// same mode. A file passes when its max-abs difference is within `tolerance`.
inline nlohmann::json compare_runs(const fs::path& a, const fs::path& b, double tolerance) {
  const RunReport ra = report_from_json(read_json_file(a / "report.json"));
  const RunReport rb = report_from_json(read_json_file(b / "report.json"));
  if (ra.mode != rb.mode) {
    throw InvalidInput("manifest mismatch: modes '" + ra.mode + "' and '" + rb.mode + "'");
  }
  if (!(tolerance >= 0.0)) throw InvalidInput("tolerance must be >= 0");
  nlohmann::json out;
  out["schema"] = "stefan.diff/1";
  out["a"] = a.string();
  out["b"] = b.string();
  out["mode"] = ra.mode;
  out["tolerance"] = tolerance;
  nlohmann::json files = nlohmann::json::object();
  bool pass = true;
  const std::set<std::string> in_b(rb.files.begin(), rb.files.end());
  for (const std::string& f : ra.files) {
    if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
    FileDiff d;
    if (!in_b.count(f)) {
      d.notes = "missing in b";
    } else {
      d = detail::diff_file(a / f, b / f);
    }
    const bool ok = d.compared && d.max_abs <= tolerance;
    pass = pass && (ok || d.notes == "grids differ; not compared");
    files[f] = {{"compared", d.compared},
                {"max_abs", d.max_abs},
                {"max_rel", d.max_rel},
                {"pass", ok},
                {"notes", d.notes}};
  }
  out["files"] = files;
  out["pass"] = pass;
  return out;
}

}  // namespace stefan
