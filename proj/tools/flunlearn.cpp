// flunlearn: run, replay and summarize backdoor insertion/removal scenarios.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fedforget/config.hpp"
#include "fedforget/harness.hpp"
#include "fedforget/records.hpp"

namespace fs = std::filesystem;
using namespace fedforget;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int cmd_run(const std::string& path, bool dry_run, std::size_t jobs, std::uint64_t offset,
            bool diagnostics) {
  Experiment ex;
  try {
    ex = load_experiment(path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (dry_run) {
    std::cout << describe_matrix(ex, offset);
    return kExitOk;
  }
  const fs::path root = output_root(ex.cells.front().config);
  MatrixOptions opt;
  opt.jobs = jobs;
  opt.seed_offset = offset;
  opt.diagnostics = diagnostics;
  opt.log = &std::cerr;
  try {
    const MatrixReport report = run_experiment(ex, root, opt);
    std::cout << "wrote " << (root / ex.name).string() << '\n';
    if (!report.all_ok()) {
      std::size_t bad = 0;
      for (const auto& r : report.runs) bad += r.ok ? 0 : 1;
      std::cerr << bad << " run(s) failed\n";
      return kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_replay(const std::string& path, std::size_t rounds, bool disable_adversary,
               const std::string& out_path) {
  Checkpoint ck;
  try {
    ck = load_checkpoint(path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "bad checkpoint: " << e.what() << '\n';
    return kExitRuntime;
  }
  try {
    const auto records = replay(ck.config, ck.seed, ck.state, rounds, !disable_adversary);
    const std::string branch = disable_adversary ? "replay_no_adversary" : "replay";
    if (out_path.empty()) {
      write_rounds_jsonl(std::cout, records, branch);
    } else {
      std::ofstream out(out_path);
      write_rounds_jsonl(out, records, branch);
    }
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_summarize(const std::string& dir) {
  try {
    const auto summary = summarize_directory(dir);
    std::ofstream(fs::path(dir) / "summary.json") << summary.dump(2) << '\n';
    std::cout << summary.dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "summarize failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backdoor insertion and unlearning-based removal in simulated federated learning"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  bool dry_run = false;
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;
  int verbosity = 0;
  auto* run = app.add_subcommand("run", "Run every (cell, seed) of a scenario config");
  run->add_option("config", config_path, "Scenario config (JSON, comments allowed)")->required();
  run->add_flag("--dry-run", dry_run, "Print the resolved experiment matrix and exit");
  run->add_option("--jobs", jobs, "Runs executed concurrently")->check(CLI::PositiveNumber);
  run->add_option("--seed-offset", seed_offset, "Added to every configured seed");
  run->add_flag("-v,--verbose", verbosity,
                "With -v, log per-iteration unlearning diagnostics to unlearn_diagnostics.jsonl");

  std::string ckpt_path, replay_out;
  std::size_t rounds = 0;
  bool disable_adversary = false;
  auto* rep = app.add_subcommand("replay", "Resume a run from a phase-boundary checkpoint");
  rep->add_option("checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  rep->add_option("--rounds", rounds, "Rounds to execute")->required();
  rep->add_flag("--disable-adversary", disable_adversary, "Compromised participant trains benignly");
  rep->add_option("--out", replay_out, "Write records here instead of stdout");

  std::string out_dir;
  auto* sum = app.add_subcommand("summarize", "Aggregate a scenario output directory");
  sum->add_option("out_dir", out_dir, "<root>/<scenario> directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return cmd_run(config_path, dry_run, jobs, seed_offset, verbosity > 0);
  if (*rep) return cmd_replay(ckpt_path, rounds, disable_adversary, replay_out);
  return cmd_summarize(out_dir);
}
