#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eovsim/analytics.hpp"
#include "eovsim/network.hpp"
#include "eovsim/verify.hpp"

namespace eovsim {

// Configuration problems are reported with the offending key path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One experiment: topology, policy, cache variant, orderer, workload, engine.
struct RunConfig {
  std::vector<int> peers_per_org = {2, 2};
  std::string policy_text = "AND('Org1.member','Org2.member')";
  CacheVariant cache_variant = CacheVariant::SyncMap;
  int lockfree_batch = 64;
  std::int64_t cache_ttl_ms = 30000;
  std::size_t batch_size = 500;
  std::int64_t batch_timeout_ms = 2000;
  WorkloadConfig workload;
  bool deterministic = true;
  // concurrent engine service costs (ignored by the deterministic engine)
  std::int64_t endorse_cost_us = 30;
  std::int64_t validation_cost_us = 300;
  std::string out_dir;  // empty: no files written
  std::string label = "run";
};

// The default evaluation setup: 2 orgs x 2 peers, AND over both orgs, 500-tx
// blocks with a 2 s timeout, 40% conflicts at 5000 tx/s, 10k transactions.
RunConfig default_config();

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const RunConfig& config);

// Closed-form model parameters for plain AND/OR-over-orgs policies; nullopt
// when the policy has no closed form (OutOf, nesting).
std::optional<ModelParams> detect_model(const RunConfig& config);

struct RunOutput {
  RunConfig config;
  MetricsReport report;
  SafetyReport safety;
  FpReport fp;
  CacheCounters cache;
  std::vector<Event> events;
  std::vector<LoggedBlock> blocks;

  nlohmann::ordered_json to_json() const;
};

// Builds the network, drives the workload to drain, aggregates, audits, and
// (when out_dir is set) writes report.json, events.jsonl, blocks.jsonl, and
// appends a runs.csv row.
RunOutput run(const RunConfig& config);

std::string run_csv_header();
std::string run_csv_row(const RunOutput& output);

struct SweepRow {
  std::string axis;
  std::string value;
  std::string variant;
  bool failed = false;
  std::string error;
  MetricsReport report;
  bool safety_ok = false;
  std::int64_t false_positives = 0;
};

// One run per value per cache variant (the cache_variant axis runs each value
// once). Per-run failures are recorded and the sweep continues.
std::vector<SweepRow> sweep(const RunConfig& base, const std::string& axis,
                            const std::vector<std::string>& values);

struct ModelRow {
  std::string policy;  // "AND" | "OR"
  int n = 0;
  std::vector<int> m;
  double closed_form = 0.0;
  std::optional<double> complement;  // OR only
  double mc = 0.0;
  double abs_err = 0.0;
  double three_se = 0.0;
  bool pass = false;     // printed formula within 3 SE of the Monte Carlo
  bool flagged = false;  // divergence beyond 3 SE (documented ambiguity)
};

// Closed forms vs the Monte Carlo oracle over the standard configurations.
std::vector<ModelRow> validate_model(std::int64_t trials, std::uint64_t seed);

std::string model_table(const std::vector<ModelRow>& rows);

// Re-aggregates a previously written event stream.
MetricsReport reaggregate(const std::string& events_path);

}  // namespace eovsim
