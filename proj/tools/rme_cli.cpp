#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rme/rme.h"

namespace {

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return true;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "cannot write " << path << "\n";
    return false;
  }
  out << text;
  return true;
}

// Prints the report (JSON or CSV) and converts the C-API status into the
// process exit code, freeing the handle.
int finish(int rc, rme_report* rep, const std::string& out_path, bool csv) {
  if (rc == RME_USAGE) {
    std::cerr << "error: " << rme_last_error() << "\n";
    return RME_USAGE;
  }
  std::string text = csv ? rme_report_csv(rep) : rme_report_json(rep);
  bool wrote = write_output(out_path, text);
  rme_report_free(rep);
  if (!wrote) return RME_USAGE;
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Model checker and measurement harness for recoverable, abortable "
      "mutual-exclusion locks over simulated persistent memory"};
  app.require_subcommand(1);

  std::string config_path, actions_path, out_path;
  std::string inline_config, sweep = "wport";
  std::uint64_t seed = 1;
  int runs = 20, rounds = 1000;
  bool faulty = false;

  auto* check = app.add_subcommand(
      "check", "Run the configured checker and print a JSON report");
  auto* cfg_file =
      check->add_option("--config", config_path, "Run configuration file");
  check->add_option("--config-json", inline_config,
                    "Run configuration as an inline JSON string")
      ->excludes(cfg_file);
  check->add_option("-o,--out", out_path, "Report path (default: stdout)");

  auto* rep_cmd = app.add_subcommand(
      "replay", "Re-run a recorded adversary decision list");
  rep_cmd->add_option("--config", config_path, "Run configuration file")
      ->required();
  rep_cmd->add_option("--actions", actions_path,
                      "JSON action list (from a report's counterexample)")
      ->required();
  rep_cmd->add_option("-o,--out", out_path, "Report path (default: stdout)");

  auto* bench = app.add_subcommand("bench", "Measurement sweeps (CSV)");
  bench->add_option("--sweep", sweep, "wport | tree | adaptive | crash");
  bench->add_option("--seed", seed, "Base RNG seed");
  bench->add_option("--runs", runs, "Randomized schedules per sweep point");
  bench->add_option("-o,--out", out_path, "CSV path (default: stdout)");

  auto* demo = app.add_subcommand(
      "demo-starvation",
      "Scripted adversary that starves a waiter of the variant whose Exit "
      "promotes only after releasing");
  demo->add_flag("--faulty,!--correct", faulty,
                 "Target the starvable variant (default: correct lock)");
  demo->add_option("--rounds", rounds, "Adversary rounds to attempt");
  demo->add_option("-o,--out", out_path, "Report path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  rme_report* rep = nullptr;
  if (*check) {
    std::string cfg = inline_config;
    if (cfg.empty() && !config_path.empty() && !read_file(config_path, cfg)) {
      std::cerr << "cannot read " << config_path << "\n";
      return RME_USAGE;
    }
    if (cfg.empty()) cfg = "{}";
    int rc = rme_check(cfg.c_str(), &rep);
    return finish(rc, rep, out_path, false);
  }
  if (*rep_cmd) {
    std::string cfg, acts;
    if (!read_file(config_path, cfg)) {
      std::cerr << "cannot read " << config_path << "\n";
      return RME_USAGE;
    }
    if (!read_file(actions_path, acts)) {
      std::cerr << "cannot read " << actions_path << "\n";
      return RME_USAGE;
    }
    int rc = rme_replay(cfg.c_str(), acts.c_str(), &rep);
    return finish(rc, rep, out_path, false);
  }
  if (*bench) {
    int rc = rme_bench(sweep.c_str(), seed, runs, &rep);
    return finish(rc, rep, out_path, true);
  }
  int rc = rme_demo_starvation(faulty ? 1 : 0, rounds, &rep);
  return finish(rc, rep, out_path, false);
}
