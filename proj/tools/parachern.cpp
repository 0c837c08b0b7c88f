// Command-line front end: runs one verification command (or every fixture in a
// directory) and writes JSON reports and CSV tables.

#include "parachern/reports.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace parachern;
using namespace parachern::reports;

namespace {

struct Options {
  std::string input;
  std::string out;
  std::optional<double> tol;
  std::optional<int> samples;
  std::uint64_t seed = kDefaultSeed;
  unsigned workers = 1;
};

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("parachern");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("PARACHERN_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only honour recognised ones
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("unknown PARACHERN_LOG level '{}'", env);
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
  spdlog::info("wrote {}", path.string());
}

void write_outputs(const fs::path& dir, const std::string& stem, const Report& rep) {
  write_file(dir / (stem + ".json"), rep.dump());
  for (const auto& t : rep.tables) write_file(dir / (stem + "_" + t.name + ".csv"), t.content);
}

void print_checks(const Report& rep) {
  for (const auto& c : rep.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << '\n';
}

Settings to_settings(const Options& o) {
  Settings s;
  s.tol = o.tol;
  s.samples = o.samples;
  s.seed = o.seed;
  s.workers = std::max(1u, o.workers);
  return s;
}

fs::path prepare_out(const Options& o) {
  if (o.out.empty()) return {};
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

int run_single(const std::string& command, const Options& o) {
  const Settings s = to_settings(o);
  spdlog::info("{}: reading {}", command, o.input);
  const Report rep = run_file(command, o.input, s);
  spdlog::info("{}: {} checks, config hash {}", command, rep.checks.size(), hex64(rep.config_hash));
  if (const fs::path dir = prepare_out(o); !dir.empty()) {
    write_outputs(dir, command, rep);
    print_checks(rep);
    std::cout << command << ": " << (rep.pass() ? "PASS" : "FAIL") << '\n';
  } else {
    std::cout << rep.dump();
  }
  return exit_code(rep);
}

int run_all(const Options& o) {
  const Settings s = to_settings(o);
  const auto inputs = discover_inputs(o.input);
  if (inputs.empty()) spdlog::warn("no '<command>*.json' inputs in {}", o.input);
  const fs::path dir = prepare_out(o);
  std::vector<RunOutcome> runs;
  for (const auto& [command, path] : inputs) {
    spdlog::info("{}: {}", command, path.string());
    runs.push_back(run_outcome(command, path, s));
    const auto& r = runs.back();
    if (!r.error.empty()) spdlog::error("{}", r.error);
    if (r.report && !dir.empty()) write_outputs(dir, r.name, *r.report);
    std::cout << (r.exit_code == kPass ? "PASS " : "FAIL ") << r.name << " (exit " << r.exit_code << ")\n";
  }
  const Report summary = summarize(runs, s);
  if (!dir.empty()) write_file(dir / "all.json", summary.dump());
  const int code = aggregate_exit_code(runs);
  std::cout << "all: " << (code == kPass ? "PASS" : "FAIL") << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Verification suite for parabolic bundle computations"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Options opts;
  auto add_common = [&](CLI::App* sub, const std::string& input_help) {
    sub->add_option("--input", opts.input, input_help)->required();
    sub->add_option("--out", opts.out, "Directory for JSON reports and CSV tables (default: report to stdout)");
    sub->add_option("--tol", opts.tol, "Override the command's check tolerance");
    sub->add_option("--samples", opts.samples, "Sample budget for stochastic checks")->check(CLI::PositiveNumber);
    sub->add_option("--seed", opts.seed, "Seed for all random sampling");
    sub->add_option("--workers", opts.workers, "Worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, 1024u));
  };

  const std::vector<std::pair<std::string, std::string>> descriptions = {
      {"pardeg", "Parabolic degree, slope, filtration and stability of a model"},
      {"ops", "Dual, tensor, direct sum and determinant with identity checks"},
      {"admissible", "Admissibility of a metric on a branched local chart"},
      {"chern", "Chern, Segre and Schur forms of a curvature matrix"},
      {"pushforward", "Fiber integral over the projectivized fiber and the push-forward identity"},
      {"masolve", "Solve the Monge-Ampere equation on the torus and verify the conclusion"},
  };
  std::string chosen;
  for (const auto& [name, help] : descriptions) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, "Input JSON document");
    sub->callback([&chosen, name = name] { chosen = name; });
  }
  auto* all = app.add_subcommand("all", "Run every '<command>*.json' input in a directory");
  add_common(all, "Directory of input documents");
  all->callback([&chosen] { chosen = "all"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kInputError;
  }

  try {
    return chosen == "all" ? run_all(opts) : run_single(chosen, opts);
  } catch (const std::exception& e) {
    const int code = classify_exception(std::current_exception());
    std::cerr << "parachern: " << (code == kInputError ? "input error: " : "error: ") << e.what() << '\n';
    return code;
  }
}
