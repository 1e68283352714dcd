#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eovsim/runner.hpp"

namespace {

using namespace eovsim;

constexpr int kExitOk = 0;
constexpr int kExitSafety = 1;
constexpr int kExitConfig = 2;

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  bool concurrent = false;
  std::string cache;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--seed", flags.seed, "workload seed override")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  auto* det = cmd->add_flag("--deterministic", flags.deterministic,
                            "single worker over a virtual clock (reproducible)");
  auto* conc = cmd->add_flag("--concurrent", flags.concurrent,
                             "worker pool over the wall clock");
  det->excludes(conc);
  conc->excludes(det);
  cmd->add_option("--cache", flags.cache,
                  "pending-write cache: baseline|mutex|lockfree|syncmap");
  cmd->add_option("--out", flags.out_dir,
                  "output directory (report.json, runs.csv, events.jsonl, "
                  "blocks.jsonl)");
}

RunConfig load_config(const CommonFlags& flags) {
  RunConfig config;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw ConfigError("config: cannot open " + flags.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: " + flags.config_path + ": " + e.what());
    }
    config = config_from_json(j);
  }
  if (flags.seed_set) config.workload.seed = flags.seed;
  if (!flags.cache.empty()) {
    try {
      config.cache_variant = parse_cache_variant(flags.cache);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--cache: ") + e.what());
    }
  }
  if (flags.deterministic) config.deterministic = true;
  if (flags.concurrent) config.deterministic = false;
  if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
  return config;
}

int cmd_run(const CommonFlags& flags) {
  const RunConfig config = load_config(flags);
  const RunOutput output = run(config);
  std::cout << output.to_json().dump(2) << '\n';
  if (!output.safety.ok()) {
    std::cerr << "safety violation: " << output.safety.detail << '\n';
    return kExitSafety;
  }
  return kExitOk;
}

int cmd_sweep(const CommonFlags& flags, const std::string& axis,
              const std::vector<std::string>& values) {
  RunConfig base = load_config(flags);
  if (base.label == "run") base.label = "sweep";
  const auto rows = sweep(base, axis, values);

  std::printf("%-12s %-10s %-10s %12s %12s %10s %8s %8s\n", axis.c_str(),
              "variant", "safety", "throughput", "goodput", "conflict",
              "fp", "status");
  bool all_ok = true;
  for (const auto& row : rows) {
    if (row.failed) {
      all_ok = false;
      std::printf("%-12s %-10s %-10s %s\n", row.value.c_str(),
                  row.variant.c_str(), "-", row.error.c_str());
      continue;
    }
    if (!row.safety_ok) all_ok = false;
    std::printf("%-12s %-10s %-10s %12.1f %12.1f %10.4f %8lld %8s\n",
                row.value.c_str(), row.variant.c_str(),
                row.safety_ok ? "ok" : "VIOLATED", row.report.throughput,
                row.report.goodput, row.report.measured_conflict_rate,
                static_cast<long long>(row.false_positives),
                row.safety_ok ? "done" : "fail");
  }
  return all_ok ? kExitOk : kExitSafety;
}

int cmd_validate_model(std::int64_t trials, std::uint64_t seed) {
  const auto rows = validate_model(trials, seed);
  std::cout << model_table(rows);
  return kExitOk;
}

int cmd_report(const std::string& events_path) {
  const MetricsReport report = reaggregate(events_path);
  std::cout << report.to_json().dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Execute-order-validate transaction pipeline simulator with "
               "early conflict detection"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  add_common(run_cmd, run_flags);

  CommonFlags sweep_flags;
  std::string axis;
  std::vector<std::string> values;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "run one experiment per axis value per "
                                  "cache variant");
  add_common(sweep_cmd, sweep_flags);
  sweep_cmd
      ->add_option("--axis", axis,
                   "conflict_rate|block_size|zipf_s|topology|cache_variant")
      ->required();
  sweep_cmd->add_option("--values", values, "comma-separated axis values")
      ->required()
      ->delimiter(',');

  std::int64_t trials = 100000;
  std::uint64_t model_seed = 42;
  auto* model_cmd = app.add_subcommand(
      "validate-model", "closed-form non-detection vs Monte Carlo");
  model_cmd->add_option("--trials", trials, "Monte Carlo pairs per row")
      ->check(CLI::Range(std::int64_t{10000}, std::int64_t{100000000}));
  model_cmd->add_option("--seed", model_seed, "Monte Carlo seed");

  std::string events_path;
  auto* report_cmd =
      app.add_subcommand("report", "re-aggregate an event stream");
  report_cmd->add_option("events", events_path, "events.jsonl path")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_flags);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, axis, values);
    if (model_cmd->parsed()) return cmd_validate_model(trials, model_seed);
    if (report_cmd->parsed()) return cmd_report(events_path);
  } catch (const eovsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
