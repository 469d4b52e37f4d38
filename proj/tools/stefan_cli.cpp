// Batch front-end: stefan-cli <solve1d|solve3d|mollify|verify|benchmark|compare> ...
// Exit codes: 0 pass, 2 usage, 3 numerical failure or failed hard check, 4 I/O.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stefan/config.hpp"
#include "stefan/field_io.hpp"
#include "stefan/report.hpp"
#include "stefan/run.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string checks;
  std::string input;
  double epsilon = 0.0;
  int order = 2;
  std::string domain = "interior";
  std::string run_dir;
  std::vector<std::string> compare_dirs;
  double tolerance = 1e-6;
};

std::vector<std::string> split_checks(const std::string& list) {
  std::vector<std::string> out;
  for (const auto& name : stefan::detail::split(list, ',')) {
    if (!name.empty()) out.push_back(name);
  }
  return out;
}

int status_code(const stefan::RunReport& r) { return r.hard_pass() ? kExitPass : kExitNumerical; }

void summarize(const stefan::RunReport& r) {
  for (const auto& c : r.checks) {
    std::cout << (c.pass ? "pass " : (c.hard ? "FAIL " : "note ")) << c.name << " measured="
              << stefan::format_real(c.measured) << '\n';
  }
  std::cout << "status: " << r.status() << '\n';
}

int run_config_mode(const std::string& mode, const Options& opt) {
  if (opt.config.empty()) throw stefan::InvalidInput("--config is required");
  stefan::Json doc = stefan::read_json_file(opt.config);
  if (!doc.is_object()) throw stefan::ConfigError("/", "expected an object");
  if (!doc.contains("mode")) doc["mode"] = mode;
  if (doc["mode"] != mode) {
    throw stefan::ConfigError("/mode", "config is for '" + doc["mode"].dump() + "', not " + mode);
  }
  if (opt.seed) doc["seed"] = *opt.seed;
  if (!opt.checks.empty() && opt.checks != "all") doc["checks"] = split_checks(opt.checks);
  const stefan::ExperimentConfig cfg = stefan::parse_config(doc);
  fs::path out = opt.out.empty() ? (cfg.out ? *cfg.out : fs::path()) : fs::path(opt.out);
  if (out.empty()) throw stefan::InvalidInput("--out is required");
  const stefan::RunReport r = stefan::run(cfg, out);
  summarize(r);
  return status_code(r);
}

int run_mollify_file(const Options& opt) {
  if (opt.out.empty()) throw stefan::InvalidInput("--out is required");
  if (!(opt.epsilon > 0.0)) throw stefan::InvalidInput("--epsilon must be positive");
  const stefan::TemperatureField f = stefan::read_field_csv(opt.input);
  stefan::RunReport r = stefan::mollify_field(
      f, opt.epsilon, opt.order, stefan::parse_domain(opt.domain, "--domain"));
  if (opt.seed) r.seed = *opt.seed;
  stefan::write_json(opt.out, stefan::to_json(r));
  summarize(r);
  return status_code(r);
}

int run_verify(const Options& opt) {
  if (opt.out.empty()) throw stefan::InvalidInput("--out is required");
  const stefan::RunReport r =
      stefan::verify_run(opt.run_dir, split_checks(opt.checks), opt.seed.value_or(0));
  stefan::write_json(opt.out, stefan::to_json(r));
  summarize(r);
  return status_code(r);
}

int run_compare(const Options& opt) {
  const stefan::Json diff = stefan::compare_runs(opt.compare_dirs[0], opt.compare_dirs[1], opt.tolerance);
  if (!opt.out.empty()) stefan::write_json(opt.out, diff);
  for (const auto& [name, d] : diff["files"].items()) {
    std::cout << (d["pass"].get<bool>() ? "pass " : "DIFF ") << name
              << " max_abs=" << stefan::format_real(d["max_abs"].get<double>()) << '\n';
  }
  return diff["pass"].get<bool>() ? kExitPass : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stefan problem solvers, diagnostics and batch runs"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", opt.config, "experiment config (JSON)");
    sub->add_option("--out", opt.out, "output directory or report path");
    sub->add_option("--seed", opt.seed, "seed recorded in the report and used by property suites");
    sub->add_option("--checks", opt.checks, "comma-separated check names or 'all'");
  };
  CLI::App* solve1d = app.add_subcommand("solve1d", "one-dimensional Stefan run");
  add_common(solve1d, true);
  CLI::App* solve3d = app.add_subcommand("solve3d", "three-dimensional graph-front Stefan run");
  add_common(solve3d, true);
  CLI::App* mollify = app.add_subcommand("mollify", "mollifier study on a config or a field CSV");
  add_common(mollify, true);
  mollify->add_option("--input", opt.input, "field CSV");
  mollify->add_option("--epsilon", opt.epsilon, "kernel radius");
  mollify->add_option("--order", opt.order, "highest derivative order")->check(CLI::Range(0, 4));
  mollify->add_option("--domain", opt.domain, "interior, zero_extension or periodic");
  CLI::App* verify = app.add_subcommand("verify", "check a finished run directory");
  add_common(verify, false);
  verify->add_option("--run", opt.run_dir, "run directory")->required();
  CLI::App* benchmark = app.add_subcommand("benchmark", "convergence-order study");
  add_common(benchmark, true);
  CLI::App* compare = app.add_subcommand("compare", "diff the outputs of two run directories");
  compare->add_option("runs", opt.compare_dirs, "two run directories")->required()->expected(2);
  compare->add_option("--tolerance", opt.tolerance, "max-abs tolerance per file");
  compare->add_option("--out", opt.out, "diff report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (solve1d->parsed()) return run_config_mode("solve1d", opt);
    if (solve3d->parsed()) return run_config_mode("solve3d", opt);
    if (mollify->parsed()) {
      if (!opt.input.empty()) return run_mollify_file(opt);
      return run_config_mode("mollify", opt);
    }
    if (verify->parsed()) return run_verify(opt);
    if (benchmark->parsed()) return run_config_mode("benchmark", opt);
    return run_compare(opt);
  } catch (const stefan::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case stefan::ErrorKind::invalid_input:
        return kExitUsage;
      case stefan::ErrorKind::io:
        return kExitIo;
      default:
        return kExitNumerical;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
}
