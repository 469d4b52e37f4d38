#pragma once

// Run reports: named checks, provenance and the list of emitted files, serialized as
// JSON with a fixed schema (docs/report.schema.json).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stefan/error.hpp"

namespace stefan {

inline constexpr const char* kReportSchema = "stefan.report/1";
inline constexpr const char* kCodeVersion = "0.1.0";

struct Check {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  /// Soft checks are recorded but do not decide the exit status.
  bool hard = true;
  std::string notes;
};

struct Provenance {
  std::string config_hash;
  std::string code_version = kCodeVersion;
  std::string started;
  std::string finished;
};

struct RunReport {
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  nlohmann::json series = nlohmann::json::object();
  Provenance provenance;
  std::vector<std::string> files;
  std::string error;

  void add(Check c) {
    for (Check& existing : checks) {
      if (existing.name == c.name) {
        existing = std::move(c);
        return;
      }
    }
    checks.push_back(std::move(c));
  }

  const Check* find(const std::string& name) const {
    for (const Check& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool hard_pass() const {
    for (const Check& c : checks)
      if (c.hard && !c.pass) return false;
    return error.empty();
  }

  std::string status() const {
    if (!error.empty()) return "error";
    return hard_pass() ? "pass" : "fail";
  }

  void add_file(const std::string& relative) {
    for (const std::string& f : files)
      if (f == relative) return;
    files.push_back(relative);
  }
};

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_from(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>() : std::nan("");
}

}  // namespace detail

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["status"] = r.status();
  nlohmann::json diag = nlohmann::json::object();
  for (const Check& c : r.checks) {
    diag[c.name] = {{"name", c.name},
                    {"measured", detail::number_or_null(c.measured)},
                    {"tolerance", detail::number_or_null(c.tolerance)},
                    {"pass", c.pass},
                    {"hard", c.hard},
                    {"notes", c.notes}};
  }
  j["diagnostics"] = diag;
  j["series"] = r.series;
  j["provenance"] = {{"config_hash", r.provenance.config_hash},
                     {"code_version", r.provenance.code_version},
                     {"started", r.provenance.started},
                     {"finished", r.provenance.finished}};
  j["files"] = r.files;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

/// Problems found when checking `j` against the report schema; empty when valid.
inline std::vector<std::string> validate_report(const nlohmann::json& j) {
  std::vector<std::string> bad;
  auto need = [&](const nlohmann::json& obj, const std::string& key, const std::string& path,
                  bool (nlohmann::json::*is)() const noexcept, const char* type) {
    if (!obj.is_object() || !obj.contains(key)) {
      bad.push_back(path + "/" + key + ": missing");
      return false;
    }
    if (!(obj[key].*is)()) {
      bad.push_back(path + "/" + key + ": expected " + type);
      return false;
    }
    return true;
  };
  using J = nlohmann::json;
  if (!j.is_object()) return {"/: expected an object"};
  if (need(j, "schema", "", &J::is_string, "string") && j["schema"] != kReportSchema) {
    bad.push_back("/schema: unknown schema " + j["schema"].get<std::string>());
  }
  need(j, "mode", "", &J::is_string, "string");
  need(j, "seed", "", &J::is_number_unsigned, "non-negative integer");
  if (need(j, "status", "", &J::is_string, "string")) {
    const std::string s = j["status"];
    if (s != "pass" && s != "fail" && s != "error") bad.push_back("/status: unknown value " + s);
  }
  if (need(j, "diagnostics", "", &J::is_object, "object")) {
    for (auto it = j["diagnostics"].begin(); it != j["diagnostics"].end(); ++it) {
      const std::string path = "/diagnostics/" + it.key();
      const J& c = it.value();
      if (need(j["diagnostics"], it.key(), "/diagnostics", &J::is_object, "object")) {
        if (need(c, "name", path, &J::is_string, "string") && c["name"] != it.key()) {
          bad.push_back(path + "/name: does not match its key");
        }
        for (const char* key : {"measured", "tolerance"}) {
          if (!c.contains(key) || !(c[key].is_number() || c[key].is_null())) {
            bad.push_back(path + "/" + key + ": expected number or null");
          }
        }
        need(c, "pass", path, &J::is_boolean, "boolean");
        need(c, "hard", path, &J::is_boolean, "boolean");
        need(c, "notes", path, &J::is_string, "string");
      }
    }
  }
  need(j, "series", "", &J::is_object, "object");
  if (need(j, "provenance", "", &J::is_object, "object")) {
    for (const char* key : {"config_hash", "code_version", "started", "finished"}) {
      need(j["provenance"], key, "/provenance", &J::is_string, "string");
    }
  }
  if (need(j, "files", "", &J::is_array, "array")) {
    for (std::size_t i = 0; i < j["files"].size(); ++i) {
      if (!j["files"][i].is_string()) bad.push_back("/files/" + std::to_string(i) + ": expected string");
    }
  }
  if (j.contains("error") && !j["error"].is_string()) bad.push_back("/error: expected string");
  if (j.is_object() && j.contains("status") && j["status"] == "error" && !j.contains("error")) {
    bad.push_back("/error: required when status is error");
  }
  return bad;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  const auto bad = validate_report(j);
  if (!bad.empty()) throw InvalidInput("report does not match its schema: " + bad.front());
  RunReport r;
  r.mode = j["mode"];
  r.seed = j["seed"];
  for (const auto& [name, c] : j["diagnostics"].items()) {
    r.checks.push_back({name, detail::number_from(c["measured"]), detail::number_from(c["tolerance"]),
                        c["pass"], c["hard"], c["notes"]});
  }
  r.series = j["series"];
  r.provenance = {j["provenance"]["config_hash"], j["provenance"]["code_version"],
                  j["provenance"]["started"], j["provenance"]["finished"]};
  r.files = j["files"].get<std::vector<std::string>>();
  if (j.contains("error")) r.error = j["error"];
  return r;
}

/// The report without wall-clock fields, for reproducibility comparisons.
inline nlohmann::json without_timestamps(nlohmann::json j) {
  if (j.contains("provenance")) {
    j["provenance"].erase("started");
    j["provenance"].erase("finished");
  }
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return std::string("fnv1a64:") + buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace stefan
