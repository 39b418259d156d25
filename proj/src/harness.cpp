#include "fedforget/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <span>
#include <ostream>
#include <sstream>

#include "fedforget/common.hpp"
#include "fedforget/metrics.hpp"
#include "fedforget/records.hpp"

namespace fedforget {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path output_root(const ScenarioConfig& cfg) {
  if (const char* env = std::getenv(kOutRootEnv); env && *env) return fs::path(env);
  return fs::path(cfg.output_dir);
}

bool MatrixReport::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunStatus& r) { return r.ok; });
}

std::string describe_matrix(const Experiment& ex, std::uint64_t seed_offset) {
  std::ostringstream os;
  std::size_t total = 0;
  for (const auto& cell : ex.cells) total += cell.config.seeds.size();
  os << "scenario " << ex.name << ": " << ex.cells.size() << " cell(s), " << total << " run(s)\n";
  for (const auto& cell : ex.cells) {
    os << "  " << cell.id << "  seeds=[";
    for (std::size_t i = 0; i < cell.config.seeds.size(); ++i) {
      os << (i ? "," : "") << cell.config.seeds[i] + seed_offset;
    }
    os << "]";
    for (const auto& [path, value] : cell.assignment) os << "  " << path << "=" << value.dump();
    os << '\n';
  }
  return os.str();
}

namespace {

json manifest_for(const ScenarioConfig& cfg, std::uint64_t seed, const json& assignment) {
  const json cj = config_to_json(cfg);
  std::ostringstream hash;
  hash << std::hex << config_hash(cj);
  return json{{"version", kVersion},
              {"config_hash", hash.str()},
              {"seed", seed},
              {"cell", assignment},
              {"config", cj}};
}

// Std of Acc_M over the last few warmup rounds; the warmup counts as
// stable when it is at most kStableStd.
json warmup_stability(const std::vector<RoundRecord>& records) {
  constexpr std::size_t kWindow = 5;
  constexpr double kStableStd = 0.01;
  std::vector<double> acc;
  for (const auto& r : records) {
    if (r.phase == Phase::kWarmup) acc.push_back(r.acc_main);
  }
  if (acc.size() < kWindow) return json{{"window", kWindow}, {"stable", nullptr}};
  const double sd = stddev(std::span<const double>(acc).last(kWindow));
  return json{{"window", kWindow}, {"acc_main_std", sd}, {"stable", sd <= kStableStd}};
}

}  // namespace

void write_run_artifacts(const fs::path& dir, const ScenarioConfig& cfg,
                         const ScenarioResult& result, const json& cell_assignment) {
  fs::create_directories(dir / "checkpoints");
  {
    std::ofstream csv(dir / "rounds.csv");
    write_rounds_csv(csv, result, cfg.compromised_id);
  }
  {
    std::ofstream jl(dir / "rounds.jsonl");
    write_rounds_jsonl(jl, result.records, "main");
    write_rounds_jsonl(jl, result.normal_branch, "normal");
    write_rounds_jsonl(jl, result.benign_reference, "benign_reference");
  }
  std::size_t k = 0;
  for (const auto& ck : result.checkpoints) {
    const fs::path p = dir / "checkpoints" /
                       ("phase" + std::to_string(k++) + "_" + phase_name(ck.entering) + "_r" +
                        std::to_string(ck.state.round) + ".ckpt");
    save_checkpoint(p, Checkpoint{cfg, result.seed, ck.state});
  }
  json manifest = manifest_for(cfg, result.seed, cell_assignment);
  manifest["status"] = "completed";
  manifest["rounds"] = result.records.size();
  manifest["flags"] = result.flags;
  manifest["warmup_stability"] = warmup_stability(result.records);
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

MatrixReport run_experiment(const Experiment& ex, const fs::path& root,
                            const MatrixOptions& options) {
  struct Job {
    const ExperimentCell* cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& cell : ex.cells) {
    for (auto s : cell.config.seeds) jobs.push_back({&cell, s + options.seed_offset});
  }
  const fs::path scenario_dir = root / ex.name;
  MatrixReport report;
  report.runs.resize(jobs.size());

  const int threads = static_cast<int>(std::max<std::size_t>(1, options.jobs));
  const ExecutionMode mode = threads > 1 ? ExecutionMode::kSerial : ExecutionMode::kParallel;

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    RunStatus& st = report.runs[i];
    st.cell = job.cell->id;
    st.seed = job.seed;
    st.dir = scenario_dir / job.cell->id / std::to_string(job.seed);
    json assignment = json::object();
    for (const auto& [path, v] : job.cell->assignment) assignment[path] = v;
    try {
      fs::create_directories(st.dir);
      fs::remove(st.dir / "failed");
      json manifest = manifest_for(job.cell->config, job.seed, assignment);
      manifest["status"] = "running";
      std::ofstream(st.dir / "manifest.json") << manifest.dump(2) << '\n';

      RunOptions ro;
      ro.mode = mode;
      ro.benign_reference = options.benign_reference;
      std::ofstream diag;
      if (options.diagnostics) {
        diag.open(st.dir / "unlearn_diagnostics.jsonl");
        ro.observer = [&diag](std::uint64_t round, const IterationDiagnostics& d) {
          diag << diagnostics_to_json(round, d).dump() << '\n';
        };
      }
      const ScenarioResult result = run_scenario(job.cell->config, job.seed, ro);
      write_run_artifacts(st.dir, job.cell->config, result, assignment);
      st.ok = true;
    } catch (const std::exception& e) {
      st.error = e.what();
      std::error_code ec;
      fs::create_directories(st.dir, ec);
      std::ofstream(st.dir / "failed") << e.what() << '\n';
    }
    if (options.log) {
#pragma omp critical(fedforget_log)
      *options.log << (st.ok ? "done   " : "FAILED ") << st.cell << " seed " << st.seed
                   << (st.ok ? "" : ": " + st.error) << std::endl;
    }
  }

  json summary = summarize_directory(scenario_dir);
  std::ofstream(scenario_dir / "summary.json") << summary.dump(2) << '\n';
  return report;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

RunSummary summarize_rounds_csv(const fs::path& csv, std::uint64_t seed) {
  std::ifstream in(csv);
  if (!in) throw ArgumentError("cannot read " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != kRoundsCsvHeader) throw ArgumentError(csv.string() + ": unexpected header");
  RunSummary s;
  s.seed = seed;
  std::size_t stealth = 0, removal_with_adv = 0;
  bool any = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) throw ArgumentError(csv.string() + ": malformed row '" + line + "'");
    any = true;
    s.final_acc_main = std::stod(f[2]);
    s.final_acc_backdoor = std::stod(f[3]);
    s.final_acc_backdoor_normal = std::stod(f[4]);
    if (f[1] == "insert") ++s.insertion_rounds;
    if (f[1] == "remove") {
      ++s.removal_rounds;
      if (!f[5].empty() && !f[6].empty()) {
        ++removal_with_adv;
        const double c = std::stod(f[5]);
        if (c >= std::stod(f[6]) && c <= std::stod(f[7])) ++stealth;
      }
    }
  }
  if (!any) throw ArgumentError(csv.string() + ": no rounds");
  s.stealth_fraction =
      removal_with_adv ? static_cast<double>(stealth) / static_cast<double>(removal_with_adv) : 0.0;
  return s;
}

json summarize_directory(const fs::path& scenario_dir) {
  if (!fs::is_directory(scenario_dir)) {
    throw ArgumentError(scenario_dir.string() + " is not a directory");
  }
  json cells = json::object();
  std::size_t failed = 0, completed = 0;
  std::vector<fs::path> cell_dirs;
  for (const auto& e : fs::directory_iterator(scenario_dir)) {
    if (e.is_directory()) cell_dirs.push_back(e.path());
  }
  std::sort(cell_dirs.begin(), cell_dirs.end());
  // Per axis: value -> final Acc_B means, for trend reporting.
  std::map<std::string, std::vector<std::pair<json, double>>> axes;

  for (const auto& cdir : cell_dirs) {
    std::vector<RunSummary> runs;
    json assignment;
    std::vector<fs::path> seed_dirs;
    for (const auto& e : fs::directory_iterator(cdir)) {
      if (e.is_directory()) seed_dirs.push_back(e.path());
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());
    for (const auto& sdir : seed_dirs) {
      if (fs::exists(sdir / "failed") || !fs::exists(sdir / "rounds.csv")) {
        ++failed;
        continue;
      }
      std::uint64_t seed = 0;
      if (fs::exists(sdir / "manifest.json")) {
        std::ifstream mf(sdir / "manifest.json");
        const json m = json::parse(mf);
        seed = m.value("seed", std::uint64_t{0});
        assignment = m.value("cell", json::object());
      }
      runs.push_back(summarize_rounds_csv(sdir / "rounds.csv", seed));
      ++completed;
    }
    if (runs.empty()) continue;
    auto collect = [&](auto field) {
      std::vector<double> v;
      for (const auto& r : runs) v.push_back(static_cast<double>(r.*field));
      return json{{"mean", mean(v)}, {"std", stddev(v)}};
    };
    json c;
    c["runs"] = runs.size();
    c["assignment"] = assignment;
    c["final_acc_backdoor"] = collect(&RunSummary::final_acc_backdoor);
    c["final_acc_backdoor_normal"] = collect(&RunSummary::final_acc_backdoor_normal);
    c["final_acc_main"] = collect(&RunSummary::final_acc_main);
    c["insertion_rounds"] = collect(&RunSummary::insertion_rounds);
    c["removal_rounds"] = collect(&RunSummary::removal_rounds);
    c["stealth_fraction"] = collect(&RunSummary::stealth_fraction);
    cells[cdir.filename().string()] = c;
    if (assignment.is_object()) {
      for (const auto& [path, v] : assignment.items()) {
        axes[path].emplace_back(v, c["final_acc_backdoor"]["mean"].get<double>());
      }
    }
  }

  json trends = json::object();
  for (auto& [path, pts] : axes) {
    if (!std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.first.is_number(); })) {
      continue;
    }
    std::map<double, std::vector<double>> by_value;
    for (const auto& [v, y] : pts) by_value[v.template get<double>()].push_back(y);
    if (by_value.size() < 2) continue;
    std::vector<double> xs, ys;
    for (const auto& [x, yv] : by_value) {
      xs.push_back(x);
      ys.push_back(mean(yv));
    }
    trends[path] = {{"values", xs},
                    {"final_acc_backdoor_mean", ys},
                    {"weakly_increasing", trend_test(xs, ys, TrendDirection::kIncreasing)},
                    {"weakly_decreasing", trend_test(xs, ys, TrendDirection::kDecreasing)}};
  }
  return json{{"scenario", scenario_dir.filename().string()},
              {"completed_runs", completed},
              {"failed_runs", failed},
              {"cells", cells},
              {"trends", trends}};
}

}  // namespace fedforget
