#pragma once

// Experiment configuration. A config is a JSON document
//   { "mode": ..., "seed": ..., "problem": {...}, "resolution": {...}, ... }
// and every field error is reported with its JSON pointer path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stefan/error.hpp"
#include "stefan/format.hpp"
#include "stefan/grid.hpp"
#include "stefan/mollifier.hpp"
#include "stefan/similarity.hpp"
#include "stefan/stefan1d.hpp"
#include "stefan/stefan3d.hpp"

namespace stefan {

using Json = nlohmann::json;

class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string path, const std::string& what)
      : InvalidInput(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A JSON object together with its pointer path, for error messages.
class ConfigNode {
 public:
  ConfigNode(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  const Json& json() const noexcept { return *j_; }
  const std::string& path() const noexcept { return path_; }
  std::string child(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_->contains(key); }

  /// Rejects keys outside `allowed`, which catches misspelt fields.
  void allow_only(std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!ok.count(it.key())) throw ConfigError(child(it.key()), "unknown field");
    }
  }

  const Json& at(const std::string& key) const {
    if (!has(key)) throw ConfigError(child(key), "required field missing");
    return (*j_)[key];
  }

  ConfigNode object(const std::string& key) const { return ConfigNode(at(key), child(key)); }

  std::optional<ConfigNode> optional_object(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return ConfigNode(at(key), child(key));
  }

  double real(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(child(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(child(key), "expected a finite number");
    return x;
  }

  double real_or(const std::string& key, double fallback) const {
    return has(key) ? real(key) : fallback;
  }

  double positive(const std::string& key) const {
    const double x = real(key);
    if (!(x > 0.0)) throw ConfigError(child(key), "must be positive, got " + format_real(x));
    return x;
  }

  double positive_or(const std::string& key, double fallback) const {
    return has(key) ? positive(key) : fallback;
  }

  std::size_t count(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) {
      throw ConfigError(child(key), "expected a positive integer");
    }
    return v.get<std::size_t>();
  }

  std::size_t count_or(const std::string& key, std::size_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  std::string text(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(child(key), "expected a string");
    return v.get<std::string>();
  }

  std::string text_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  std::vector<double> reals(const std::string& key, std::size_t size = 0) const {
    const Json& v = at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(child(key), "expected a non-empty array");
    if (size != 0 && v.size() != size) {
      throw ConfigError(child(key), "expected " + std::to_string(size) + " entries");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        throw ConfigError(child(key) + "/" + std::to_string(i), "expected a finite number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key, std::size_t size = 0) const {
    const Json& v = at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(child(key), "expected a non-empty array");
    if (size != 0 && v.size() != size) {
      throw ConfigError(child(key), "expected " + std::to_string(size) + " entries");
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long long>() < 1) {
        throw ConfigError(child(key) + "/" + std::to_string(i), "expected a positive integer");
      }
      out.push_back(v[i].get<std::size_t>());
    }
    return out;
  }

 private:
  const Json* j_;
  std::string path_;
};

/// f(t) = value + slope * t.
struct AffineInTime {
  double value = 0.0;
  double slope = 0.0;

  double operator()(double t) const { return value + slope * t; }
  bool constant() const { return slope == 0.0; }
  /// Smallest value on [a, b].
  double min_on(double a, double b) const { return std::min((*this)(a), (*this)(b)); }
};

inline AffineInTime parse_time_function(const ConfigNode& n) {
  const std::string type = n.text("type");
  if (type == "constant") {
    n.allow_only({"type", "value"});
    return {n.real("value"), 0.0};
  }
  if (type == "linear") {
    n.allow_only({"type", "value", "slope"});
    return {n.real("value"), n.real("slope")};
  }
  throw ConfigError(n.child("type"), "unknown time function '" + type + "' (constant, linear)");
}

/// Neumann similarity solution with boundary temperature c and diffusivity kappa:
/// s(t) = 2 lambda sqrt(kappa t), u = c (1 - erf(x / 2 sqrt(kappa t)) / erf(lambda)).
struct SimilarityReference {
  SimilaritySolution base;
  double scale = 1.0;
  double kappa = 1.0;

  static SimilarityReference make(double k1, double c, double kappa) {
    return {SimilaritySolution(k1 * c / kappa), c, kappa};
  }

  double front(double t) const { return std::sqrt(kappa) * base.front(t); }
  double temperature(double x, double t) const {
    return scale * base.temperature(x / std::sqrt(kappa), t);
  }
};

struct Problem1D {
  StefanSpec1D spec;
  AffineInTime boundary;
  std::string initial_type;
  bool nonnegative_initial = true;
  std::optional<SimilarityReference> reference;

  /// One-phase run with nonnegative data, where the front can only advance.
  bool melting() const {
    return !spec.solid && boundary.min_on(spec.t0, spec.T) >= 0.0 && nonnegative_initial;
  }
};

inline Stefan1DResolution parse_resolution_1d(const std::optional<ConfigNode>& r) {
  Stefan1DResolution out;
  if (!r) return out;
  r->allow_only({"liquid_intervals", "solid_intervals", "cfl", "dt", "snapshots"});
  out.liquid_intervals = r->count_or("liquid_intervals", out.liquid_intervals);
  out.solid_intervals = r->count_or("solid_intervals", out.solid_intervals);
  out.cfl = r->positive_or("cfl", out.cfl);
  if (out.cfl > 1.0) throw ConfigError(r->child("cfl"), "must not exceed 1");
  out.dt = r->has("dt") ? r->positive("dt") : 0.0;
  out.snapshots = r->count_or("snapshots", out.snapshots);
  return out;
}

inline Problem1D parse_problem_1d(const ConfigNode& root) {
  const ConfigNode p = root.object("problem");
  p.allow_only({"k1", "kappa", "b", "t0", "T", "boundary", "initial", "solid"});
  Problem1D out;
  StefanSpec1D& s = out.spec;
  s.k1 = p.positive_or("k1", 1.0);
  s.kappa = p.positive_or("kappa", 1.0);
  s.t0 = p.real_or("t0", 0.0);
  s.T = p.real("T");
  if (s.t0 < 0.0) throw ConfigError(p.child("t0"), "must be >= 0");
  if (!(s.T > s.t0)) throw ConfigError(p.child("T"), "must exceed t0");
  out.boundary = parse_time_function(p.object("boundary"));
  s.f = out.boundary;

  const ConfigNode init = p.object("initial");
  out.initial_type = init.text("type");
  const double f0 = out.boundary(s.t0);
  if (out.initial_type == "similarity") {
    init.allow_only({"type"});
    if (!out.boundary.constant() || !(f0 > 0.0)) {
      throw ConfigError(p.child("boundary"), "similarity data needs a positive constant boundary");
    }
    if (!(s.t0 > 0.0)) throw ConfigError(p.child("t0"), "similarity data needs t0 > 0");
    try {
      out.reference = SimilarityReference::make(s.k1, f0, s.kappa);
    } catch (const InvalidInput& e) {
      throw ConfigError(p.child("k1"), e.what());
    }
    const double b = out.reference->front(s.t0);
    if (p.has("b") && std::abs(p.real("b") - b) > 1e-12 * b) {
      throw ConfigError(p.child("b"), "inconsistent with similarity data, expected " + format_real(b));
    }
    s.b = b;
    s.phi = [ref = *out.reference, t0 = s.t0](double x) { return ref.temperature(x, t0); };
  } else {
    s.b = p.positive("b");
    if (out.initial_type == "zero") {
      init.allow_only({"type"});
      s.phi = [](double) { return 0.0; };
    } else if (out.initial_type == "linear") {
      init.allow_only({"type"});
      s.phi = [f0, b = s.b](double x) { return f0 * (1.0 - x / b); };
      out.nonnegative_initial = f0 >= 0.0;
    } else {
      throw ConfigError(init.child("type"),
                        "unknown initial profile '" + out.initial_type + "' (zero, linear, similarity)");
    }
  }

  if (const auto solid = p.optional_object("solid")) {
    solid->allow_only({"kappa", "length", "boundary", "initial"});
    SolidPhase ph;
    ph.kappa = solid->positive_or("kappa", 1.0);
    ph.length = solid->positive("length");
    const AffineInTime g = parse_time_function(solid->object("boundary"));
    ph.g = g;
    const ConfigNode si = solid->object("initial");
    const std::string type = si.text("type");
    si.allow_only({"type"});
    if (type == "zero") {
      ph.psi = [](double) { return 0.0; };
    } else if (type == "linear") {
      ph.psi = [g0 = g(s.t0), b = s.b, len = ph.length](double x) {
        return g0 * (x - b) / (len - b);
      };
    } else {
      throw ConfigError(si.child("type"), "unknown solid profile '" + type + "' (zero, linear)");
    }
    s.solid = ph;
  }
  s.resolution = parse_resolution_1d(root.optional_object("resolution"));
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(p.path(), e.what());
  }
  return out;
}

struct Problem3D {
  StefanSpec3D spec;
  AffineInTime boundary;
  std::string initial_type;
  std::optional<SimilarityReference> reference;

  bool melting() const {
    return boundary.min_on(spec.t0, spec.T) >= 0.0 && (initial_type != "linear" || boundary(spec.t0) >= 0.0);
  }
};

inline Problem3D parse_problem_3d(const ConfigNode& root) {
  const ConfigNode p = root.object("problem");
  p.allow_only({"k1", "extent", "intervals", "t0", "T", "boundary", "front", "initial"});
  Problem3D out;
  StefanSpec3D& s = out.spec;
  s.k1 = p.positive_or("k1", 1.0);
  const auto ext = p.reals("extent", 3);
  const auto iv = p.counts("intervals", 3);
  for (int a = 0; a < 3; ++a) {
    if (!(ext[a] > 0.0)) throw ConfigError(p.child("extent") + "/" + std::to_string(a), "must be positive");
    s.extent[a] = ext[a];
    s.intervals[a] = iv[a];
  }
  s.t0 = p.real_or("t0", 0.0);
  s.T = p.real("T");
  if (s.t0 < 0.0) throw ConfigError(p.child("t0"), "must be >= 0");
  if (!(s.T > s.t0)) throw ConfigError(p.child("T"), "must exceed t0");
  out.boundary = parse_time_function(p.object("boundary"));
  s.f = out.boundary;
  const double f0 = out.boundary(s.t0);

  const ConfigNode fr = p.object("front");
  const std::string front_type = fr.text("type");
  if (front_type == "flat") {
    fr.allow_only({"type", "height"});
    s.rho0 = [h = fr.positive("height")](double, double) { return h; };
  } else if (front_type == "bump") {
    fr.allow_only({"type", "height", "amplitude", "width", "center"});
    const double h = fr.positive("height"), a = fr.real("amplitude"), w = fr.positive("width");
    const auto c = fr.has("center") ? fr.reals("center", 2)
                                    : std::vector<double>{0.5 * s.extent[0], 0.5 * s.extent[1]};
    s.rho0 = [=](double x, double y) {
      return h + a * std::exp(-((x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1])) / w);
    };
  } else if (front_type == "similarity") {
    fr.allow_only({"type"});
  } else {
    throw ConfigError(fr.child("type"), "unknown front '" + front_type + "' (flat, bump, similarity)");
  }

  const ConfigNode init = p.object("initial");
  init.allow_only({"type"});
  out.initial_type = init.text("type");
  if (out.initial_type == "similarity" || front_type == "similarity") {
    if (out.initial_type != "similarity" || front_type != "similarity") {
      throw ConfigError(init.child("type"), "similarity front and temperature go together");
    }
    if (!out.boundary.constant() || !(f0 > 0.0)) {
      throw ConfigError(p.child("boundary"), "similarity data needs a positive constant boundary");
    }
    if (!(s.t0 > 0.0)) throw ConfigError(p.child("t0"), "similarity data needs t0 > 0");
    try {
      out.reference = SimilarityReference::make(s.k1, f0, 1.0);
    } catch (const InvalidInput& e) {
      throw ConfigError(p.child("k1"), e.what());
    }
    const double b = out.reference->front(s.t0);
    s.rho0 = [b](double, double) { return b; };
    s.u0 = [ref = *out.reference, t0 = s.t0](const Point& x) { return ref.temperature(x[2], t0); };
  } else if (out.initial_type == "zero") {
    s.u0 = [](const Point&) { return 0.0; };
  } else if (out.initial_type == "linear") {
    s.u0 = [f0, rho = s.rho0](const Point& x) { return f0 * (1.0 - x[2] / rho(x[0], x[1])); };
  } else {
    throw ConfigError(init.child("type"),
                      "unknown initial temperature '" + out.initial_type + "' (zero, linear, similarity)");
  }

  if (const auto r = root.optional_object("resolution")) {
    r->allow_only({"cfl", "dt", "snapshots"});
    s.cfl = r->positive_or("cfl", s.cfl);
    if (s.cfl > 1.0) throw ConfigError(r->child("cfl"), "must not exceed 1");
    s.dt = r->has("dt") ? r->positive("dt") : 0.0;
    s.snapshots = r->count_or("snapshots", s.snapshots);
  }
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(p.path(), e.what());
  }
  return out;
}

struct MollifyProblem {
  TemperatureField field;
  std::string field_type;
  std::vector<double> epsilons;
  int order = 2;
  MollifyDomain domain = MollifyDomain::interior;
};

inline MollifyDomain parse_domain(const std::string& name, const std::string& path) {
  if (name == "interior") return MollifyDomain::interior;
  if (name == "zero_extension") return MollifyDomain::zero_extension;
  if (name == "periodic") return MollifyDomain::periodic;
  throw ConfigError(path, "unknown domain '" + name + "' (interior, zero_extension, periodic)");
}

inline MollifyProblem parse_problem_mollify(const ConfigNode& root) {
  const ConfigNode p = root.object("problem");
  p.allow_only({"dim", "lower", "upper", "cells", "field", "epsilons", "order", "domain"});
  const int dim = static_cast<int>(p.count("dim"));
  if (dim > kMaxDim) throw ConfigError(p.child("dim"), "must be 1, 2 or 3");
  const auto lo = p.reals("lower", dim), hi = p.reals("upper", dim);
  const auto cells = p.counts("cells", dim);
  Point origin{}, extent{1, 1, 1};
  Index counts{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    if (!(hi[a] > lo[a])) throw ConfigError(p.child("upper") + "/" + std::to_string(a), "must exceed lower");
    origin[a] = lo[a];
    extent[a] = hi[a] - lo[a];
    counts[a] = cells[a];
  }
  MollifyProblem out{TemperatureField(Grid(dim, origin, extent, counts), 0.0, 0.0), "", {}, 2,
                     MollifyDomain::interior};
  const Grid& g = out.field.grid();

  const ConfigNode fn = p.object("field");
  out.field_type = fn.text("type");
  if (out.field_type == "step") {
    fn.allow_only({"type", "position"});
    const double at = fn.real_or("position", 0.5 * (lo[0] + hi[0]));
    out.field = TemperatureField::sample(g, 0.0, [at](const Point& x) { return x[0] < at ? 1.0 : 0.0; });
  } else if (out.field_type == "constant") {
    fn.allow_only({"type", "value"});
    out.field = TemperatureField(g, 0.0, fn.real("value"));
  } else if (out.field_type == "linear") {
    fn.allow_only({"type", "value", "slope"});
    const double v = fn.real("value"), k = fn.real("slope");
    out.field = TemperatureField::sample(g, 0.0, [=](const Point& x) {
      double sum = 0.0;
      for (int a = 0; a < dim; ++a) sum += x[a];
      return v + k * sum;
    });
  } else if (out.field_type == "sine") {
    fn.allow_only({"type", "frequency"});
    const double k = fn.real_or("frequency", 1.0);
    out.field = TemperatureField::sample(g, 0.0, [=](const Point& x) {
      double prod = 1.0;
      for (int a = 0; a < dim; ++a) prod *= std::sin(2.0 * std::numbers::pi * k * x[a]);
      return prod;
    });
  } else {
    throw ConfigError(fn.child("type"), "unknown field '" + out.field_type + "' (step, constant, linear, sine)");
  }

  out.epsilons = p.reals("epsilons");
  for (std::size_t i = 0; i < out.epsilons.size(); ++i) {
    const std::string at = p.child("epsilons") + "/" + std::to_string(i);
    if (!(out.epsilons[i] > 0.0)) throw ConfigError(at, "must be positive");
    if (i > 0 && !(out.epsilons[i] < out.epsilons[i - 1])) throw ConfigError(at, "epsilons must decrease");
  }
  if (p.has("order")) {
    const Json& o = p.at("order");
    if (!o.is_number_integer() || o.get<long long>() < 0 || o.get<long long>() > 4) {
      throw ConfigError(p.child("order"), "must be an integer in 0..4");
    }
    out.order = o.get<int>();
  }
  out.domain = parse_domain(p.text_or("domain", "interior"), p.child("domain"));
  return out;
}

struct BenchmarkProblem {
  double stefan_number = 1.0;
  double t0 = 0.25;
  double T = 1.0;
  std::vector<std::size_t> ladder{50, 100, 200};
  double cfl = 0.4;
  /// Halvings of dt in the time-order study at the coarsest spacing.
  std::size_t time_refinements = 2;
  std::vector<std::size_t> conservation_ladder{40, 80, 160};
};

inline BenchmarkProblem parse_problem_benchmark(const ConfigNode& root) {
  BenchmarkProblem out;
  if (const auto p = root.optional_object("problem")) {
    p->allow_only({"stefan_number", "t0", "T"});
    out.stefan_number = p->positive_or("stefan_number", out.stefan_number);
    out.t0 = p->positive_or("t0", out.t0);
    out.T = p->real_or("T", out.T);
    if (!(out.T > out.t0)) throw ConfigError(p->child("T"), "must exceed t0");
  }
  if (root.has("ladder")) {
    out.ladder = root.counts("ladder");
    if (out.ladder.size() < 2) throw ConfigError(root.child("ladder"), "needs at least 2 rungs");
    for (std::size_t i = 0; i < out.ladder.size(); ++i) {
      if (out.ladder[i] < 8) throw ConfigError(root.child("ladder") + "/" + std::to_string(i), "needs >= 8 intervals");
      if (i > 0 && out.ladder[i] <= out.ladder[i - 1]) {
        throw ConfigError(root.child("ladder") + "/" + std::to_string(i), "ladder must increase");
      }
    }
  }
  if (const auto r = root.optional_object("resolution")) {
    r->allow_only({"cfl", "time_refinements", "conservation_ladder"});
    out.cfl = r->positive_or("cfl", out.cfl);
    if (out.cfl > 1.0) throw ConfigError(r->child("cfl"), "must not exceed 1");
    out.time_refinements = r->count_or("time_refinements", out.time_refinements);
    if (r->has("conservation_ladder")) out.conservation_ladder = r->counts("conservation_ladder");
    if (out.conservation_ladder.size() < 2) {
      throw ConfigError(r->child("conservation_ladder"), "needs at least 2 rungs");
    }
  }
  return out;
}

struct VerifyProblem {
  std::filesystem::path run;
};

inline const std::vector<std::string>& known_modes() {
  static const std::vector<std::string> modes{"solve1d", "solve3d", "mollify", "verify", "benchmark"};
  return modes;
}

struct ExperimentConfig {
  std::string mode;
  std::uint64_t seed = 0;
  Json document;
  std::optional<std::filesystem::path> out;
  /// Names of checks to run; empty means all.
  std::vector<std::string> checks;
};

/// Validates the top level and the mode's problem block.
inline ExperimentConfig parse_config(const Json& doc) {
  const ConfigNode root(doc, "");
  root.allow_only({"mode", "seed", "out", "checks", "problem", "resolution", "ladder", "run"});
  ExperimentConfig cfg;
  cfg.mode = root.text("mode");
  if (std::find(known_modes().begin(), known_modes().end(), cfg.mode) == known_modes().end()) {
    throw ConfigError("/mode", "unknown mode '" + cfg.mode + "'");
  }
  if (root.has("seed")) {
    const Json& s = root.at("seed");
    if (!s.is_number_integer() || s.get<long long>() < 0) {
      throw ConfigError("/seed", "expected a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (root.has("out")) cfg.out = root.text("out");
  if (root.has("checks")) {
    const Json& c = root.at("checks");
    if (!c.is_array()) throw ConfigError("/checks", "expected an array of names");
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_string()) throw ConfigError("/checks/" + std::to_string(i), "expected a string");
      cfg.checks.push_back(c[i].get<std::string>());
    }
  }
  if (cfg.mode == "solve1d") {
    parse_problem_1d(root);
  } else if (cfg.mode == "solve3d") {
    parse_problem_3d(root);
  } else if (cfg.mode == "mollify") {
    parse_problem_mollify(root);
  } else if (cfg.mode == "benchmark") {
    parse_problem_benchmark(root);
  } else {
    root.text("run");
  }
  cfg.document = doc;
  return cfg;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw InvalidInput(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace stefan
