#include "eovsim/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace eovsim {

namespace {

namespace fs = std::filesystem;

template <typename T>
T read_field(const nlohmann::json& j, const std::string& key,
             const T& fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig config_from_json(const nlohmann::json& j) {
  require_object(j, "config");
  RunConfig c;

  if (j.contains("topology")) {
    const auto& t = j.at("topology");
    require_object(t, "topology");
    if (t.contains("peers_per_org")) {
      const auto& m = t.at("peers_per_org");
      if (m.is_number_integer()) {
        const int orgs = read_field<int>(t, "orgs", 2, "topology");
        c.peers_per_org.assign(static_cast<std::size_t>(orgs), m.get<int>());
      } else {
        c.peers_per_org =
            read_field<std::vector<int>>(t, "peers_per_org", {}, "topology");
      }
    }
    if (c.peers_per_org.empty())
      throw ConfigError("topology.peers_per_org: must name at least one org");
    for (int m : c.peers_per_org)
      if (m < 1)
        throw ConfigError("topology.peers_per_org: peer counts must be >= 1");
  }

  c.policy_text = read_field<std::string>(j, "policy", c.policy_text, "config");

  if (j.contains("cache")) {
    const auto& cache = j.at("cache");
    require_object(cache, "cache");
    const auto variant =
        read_field<std::string>(cache, "variant", to_string(c.cache_variant),
                                "cache");
    try {
      c.cache_variant = parse_cache_variant(variant);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cache.variant: ") + e.what());
    }
    c.lockfree_batch =
        read_field<int>(cache, "lockfree_batch", c.lockfree_batch, "cache");
    if (c.lockfree_batch < 1)
      throw ConfigError("cache.lockfree_batch: must be >= 1");
    c.cache_ttl_ms =
        read_field<std::int64_t>(cache, "ttl_ms", c.cache_ttl_ms, "cache");
    if (c.cache_ttl_ms < 1) throw ConfigError("cache.ttl_ms: must be >= 1");
  }

  if (j.contains("orderer")) {
    const auto& o = j.at("orderer");
    require_object(o, "orderer");
    const auto batch =
        read_field<std::int64_t>(o, "batch_size",
                                 static_cast<std::int64_t>(c.batch_size),
                                 "orderer");
    if (batch < 1) throw ConfigError("orderer.batch_size: must be >= 1");
    c.batch_size = static_cast<std::size_t>(batch);
    c.batch_timeout_ms = read_field<std::int64_t>(o, "batch_timeout_ms",
                                                  c.batch_timeout_ms, "orderer");
    if (c.batch_timeout_ms < 1)
      throw ConfigError("orderer.batch_timeout_ms: must be >= 1");
  }

  if (j.contains("workload")) {
    const auto& w = j.at("workload");
    require_object(w, "workload");
    auto& wl = c.workload;
    wl.tx_rate = read_field<double>(w, "tx_rate", wl.tx_rate, "workload");
    if (wl.tx_rate < 0) throw ConfigError("workload.tx_rate: must be >= 0");
    wl.total_tx =
        read_field<std::int64_t>(w, "total_tx", wl.total_tx, "workload");
    if (wl.total_tx < 0) throw ConfigError("workload.total_tx: must be >= 0");
    wl.conflict_rate =
        read_field<double>(w, "conflict_rate", wl.conflict_rate, "workload");
    if (wl.conflict_rate < 0.0 || wl.conflict_rate > 1.0)
      throw ConfigError("workload.conflict_rate: must be in [0,1]");
    const auto mode = read_field<std::string>(
        w, "mode", wl.mode == WorkloadMode::Zipf ? "zipf" : "hotset-pairing",
        "workload");
    if (mode == "zipf") {
      wl.mode = WorkloadMode::Zipf;
    } else if (mode == "hotset-pairing" || mode == "hotset" ||
               mode == "pairing") {
      wl.mode = WorkloadMode::HotSetPairing;
    } else {
      throw ConfigError("workload.mode: unknown mode '" + mode + "'");
    }
    wl.zipf_s = read_field<double>(w, "zipf_s", wl.zipf_s, "workload");
    if (wl.zipf_s < 0) throw ConfigError("workload.zipf_s: must be >= 0");
    wl.key_universe =
        read_field<std::int64_t>(w, "key_universe", wl.key_universe, "workload");
    if (wl.key_universe < 1)
      throw ConfigError("workload.key_universe: must be >= 1");
    wl.retry_aborted =
        read_field<bool>(w, "retry_aborted", wl.retry_aborted, "workload");
    wl.retry_limit =
        read_field<int>(w, "retry_limit", wl.retry_limit, "workload");
    if (wl.retry_limit < 0) throw ConfigError("workload.retry_limit: must be >= 0");
    wl.seed = read_field<std::uint64_t>(w, "seed", wl.seed, "workload");
    wl.client_workers =
        read_field<int>(w, "client_workers", wl.client_workers, "workload");
    if (wl.client_workers < 1)
      throw ConfigError("workload.client_workers: must be >= 1");
  }

  if (j.contains("engine")) {
    const auto& e = j.at("engine");
    require_object(e, "engine");
    c.deterministic =
        read_field<bool>(e, "deterministic", c.deterministic, "engine");
    c.endorse_cost_us = read_field<std::int64_t>(e, "endorse_cost_us",
                                                 c.endorse_cost_us, "engine");
    c.validation_cost_us = read_field<std::int64_t>(
        e, "validation_cost_us", c.validation_cost_us, "engine");
    if (c.endorse_cost_us < 0 || c.validation_cost_us < 0)
      throw ConfigError("engine: service costs must be >= 0");
  }

  c.out_dir = read_field<std::string>(j, "out_dir", c.out_dir, "config");
  c.label = read_field<std::string>(j, "label", c.label, "config");

  try {
    auto policy = parse_policy(c.policy_text);
    validate_policy(policy, Topology::with_counts(c.peers_per_org));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
  return c;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["topology"] = {{"orgs", c.peers_per_org.size()},
                   {"peers_per_org", c.peers_per_org}};
  j["policy"] = c.policy_text;
  j["cache"] = {{"variant", to_string(c.cache_variant)},
                {"lockfree_batch", c.lockfree_batch},
                {"ttl_ms", c.cache_ttl_ms}};
  j["orderer"] = {{"batch_size", c.batch_size},
                  {"batch_timeout_ms", c.batch_timeout_ms}};
  j["workload"] = {
      {"tx_rate", c.workload.tx_rate},
      {"total_tx", c.workload.total_tx},
      {"conflict_rate", c.workload.conflict_rate},
      {"mode", c.workload.mode == WorkloadMode::Zipf ? "zipf" : "hotset-pairing"},
      {"zipf_s", c.workload.zipf_s},
      {"key_universe", c.workload.key_universe},
      {"retry_aborted", c.workload.retry_aborted},
      {"retry_limit", c.workload.retry_limit},
      {"seed", c.workload.seed},
      {"client_workers", c.workload.client_workers}};
  j["engine"] = {{"deterministic", c.deterministic},
                 {"endorse_cost_us", c.endorse_cost_us},
                 {"validation_cost_us", c.validation_cost_us}};
  j["out_dir"] = c.out_dir;
  j["label"] = c.label;
  return j;
}

std::optional<ModelParams> detect_model(const RunConfig& config) {
  EndorsementPolicy policy;
  try {
    policy = parse_policy(config.policy_text);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (policy->kind != PolicyNode::Kind::And &&
      policy->kind != PolicyNode::Kind::Or)
    return std::nullopt;
  for (const auto& child : policy->children)
    if (child->kind != PolicyNode::Kind::Principal) return std::nullopt;
  if (policy->children.size() != config.peers_per_org.size())
    return std::nullopt;

  ModelParams params;
  params.n = static_cast<int>(config.peers_per_org.size());
  params.m = config.peers_per_org;
  params.tx_per_block = static_cast<double>(config.batch_size);
  params.conflict_rate = config.workload.conflict_rate;
  params.tx_rate = config.workload.tx_rate;
  params.policy_kind = policy->kind == PolicyNode::Kind::And ? PolicyKind::And
                                                             : PolicyKind::Or;
  return params;
}

nlohmann::ordered_json RunOutput::to_json() const {
  nlohmann::ordered_json j;
  j["label"] = config.label;
  j["config"] = config_to_json(config);
  j["metrics"] = report.to_json();
  j["safety"] = {{"ok", safety.ok()},
                 {"replay_ok", safety.replay_ok},
                 {"convergence_ok", safety.convergence_ok},
                 {"accounting_ok", safety.accounting_ok},
                 {"stale_commits", safety.stale_commits},
                 {"stuck", safety.stuck},
                 {"detail", safety.detail}};
  j["counterfactual"] = {{"emvcc_aborts", fp.emvcc_aborts},
                         {"false_positives", fp.false_positives}};
  j["cache"] = {{"probes", cache.probes},
                {"conflicts", cache.conflicts},
                {"reservations", cache.reservations},
                {"releases", cache.releases},
                {"evictions", cache.evictions},
                {"live_entries", cache.live_entries}};
  if (auto model = detect_model(config)) {
    const double p = model->policy_kind == PolicyKind::And ? p_nd_and(*model)
                                                           : p_nd_or(*model);
    j["model"] = {
        {"p_nd", p},
        {"fp_per_block",
         fp_estimate(model->tx_per_block, model->conflict_rate, p)},
        {"fn_per_second",
         fn_estimate(model->tx_rate, model->conflict_rate, p)},
        {"fn_per_block",
         fn_estimate_per_block(model->tx_per_block, model->conflict_rate, p)}};
  }
  return j;
}

RunOutput run(const RunConfig& config) {
  NetworkConfig net;
  net.topology = Topology::with_counts(config.peers_per_org);
  net.policy_text = config.policy_text;
  net.cache_variant = config.cache_variant;
  net.cache_options.lockfree_batch =
      static_cast<std::size_t>(config.lockfree_batch);
  net.orderer.batch_size = config.batch_size;
  net.orderer.batch_timeout = config.batch_timeout_ms * kMillisecond;
  net.cache_ttl = config.cache_ttl_ms * kMillisecond;
  net.endorse_cost = config.endorse_cost_us * kMicrosecond;
  net.validation_cost = config.validation_cost_us * kMicrosecond;
  net.deterministic = config.deterministic;

  std::string events_path;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    events_path = (fs::path(config.out_dir) / "events.jsonl").string();
  }

  RunOutput out;
  out.config = config;
  {
    EventSink sink =
        events_path.empty() ? EventSink() : EventSink(events_path);
    SimNetwork network(net, &sink);
    OpGenerator gen(config.workload, Rng::derive(config.workload.seed, 3));
    drive(gen, network, config.workload);
    sink.flush();

    out.events = sink.take_events();
    out.blocks = network.block_log();
    out.cache = network.cache_totals();
    out.report = aggregate(out.events);
    out.safety = verify_run(network.policy(), out.blocks, out.events,
                            network.replicas());
    out.fp = counterfactual_fp(out.blocks, out.events);
  }

  if (!config.out_dir.empty()) {
    const fs::path dir(config.out_dir);
    {
      std::ofstream report_file(dir / "report.json");
      report_file << out.to_json().dump(2) << '\n';
    }
    write_blocks_jsonl((dir / "blocks.jsonl").string(), out.blocks);
    const fs::path csv = dir / "runs.csv";
    const bool fresh = !fs::exists(csv);
    std::ofstream csv_file(csv, std::ios::app);
    if (fresh) csv_file << run_csv_header() << '\n';
    csv_file << run_csv_row(out) << '\n';
  }
  return out;
}

std::string run_csv_header() {
  return "label,cache,mode,seed,policy,orgs,peers_per_org,batch_size,"
         "batch_timeout_ms,tx_rate,total_tx,conflict_rate,workload_mode,"
         "zipf_s,retry_aborted,key_universe," +
         metrics_csv_header() +
         ",safety_ok,stale_commits,stuck,cf_emvcc_aborts,cf_false_positives";
}

std::string run_csv_row(const RunOutput& out) {
  const auto& c = out.config;
  std::ostringstream row;
  std::string peers;
  for (std::size_t i = 0; i < c.peers_per_org.size(); ++i) {
    if (i) peers += '|';
    peers += std::to_string(c.peers_per_org[i]);
  }
  row << c.label << ',' << to_string(c.cache_variant) << ','
      << (c.deterministic ? "deterministic" : "concurrent") << ','
      << c.workload.seed << ',' << '"' << c.policy_text << '"' << ','
      << c.peers_per_org.size() << ',' << peers << ',' << c.batch_size << ','
      << c.batch_timeout_ms << ',' << format_double(c.workload.tx_rate) << ','
      << c.workload.total_tx << ',' << format_double(c.workload.conflict_rate)
      << ','
      << (c.workload.mode == WorkloadMode::Zipf ? "zipf" : "hotset-pairing")
      << ',' << format_double(c.workload.zipf_s) << ','
      << (c.workload.retry_aborted ? "true" : "false") << ','
      << c.workload.key_universe << ',' << metrics_csv_row(out.report) << ','
      << (out.safety.ok() ? "true" : "false") << ',' << out.safety.stale_commits
      << ',' << out.safety.stuck << ',' << out.fp.emvcc_aborts << ','
      << out.fp.false_positives;
  return row.str();
}

std::vector<SweepRow> sweep(const RunConfig& base, const std::string& axis,
                            const std::vector<std::string>& values) {
  static const std::vector<CacheVariant> kAllVariants = {
      CacheVariant::Baseline, CacheVariant::MutexLock, CacheVariant::LockFree,
      CacheVariant::SyncMap};

  auto apply_axis = [&](RunConfig& config, const std::string& value) {
    if (axis == "conflict_rate") {
      config.workload.conflict_rate = std::stod(value);
    } else if (axis == "block_size") {
      const long size = std::stol(value);
      if (size < 1) throw ConfigError("sweep: block_size must be >= 1");
      config.batch_size = static_cast<std::size_t>(size);
    } else if (axis == "zipf_s") {
      config.workload.mode = WorkloadMode::Zipf;
      config.workload.zipf_s = std::stod(value);
    } else if (axis == "topology") {
      const int m = static_cast<int>(std::stol(value));
      if (m < 1) throw ConfigError("sweep: topology peer count must be >= 1");
      config.peers_per_org.assign(config.peers_per_org.size(),
                                  static_cast<int>(m));
    } else if (axis == "cache_variant") {
      config.cache_variant = parse_cache_variant(value);
    } else {
      throw ConfigError("sweep: unknown axis '" + axis + "'");
    }
  };

  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    const auto variants = axis == "cache_variant"
                              ? std::vector<CacheVariant>{}
                              : kAllVariants;
    const std::size_t runs = variants.empty() ? 1 : variants.size();
    for (std::size_t v = 0; v < runs; ++v) {
      RunConfig config = base;
      SweepRow row;
      row.axis = axis;
      row.value = value;
      try {
        apply_axis(config, value);
        if (!variants.empty()) config.cache_variant = variants[v];
        row.variant = to_string(config.cache_variant);
        config.label = base.label + "-" + axis + "=" + value + "-" +
                       row.variant;
        auto output = run(config);
        row.report = output.report;
        row.safety_ok = output.safety.ok();
        row.false_positives = output.fp.false_positives;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ModelRow> validate_model(std::int64_t trials, std::uint64_t seed) {
  struct Config {
    PolicyKind kind;
    std::vector<int> m;
  };
  const std::vector<Config> configs = {
      {PolicyKind::And, {2, 2}},    {PolicyKind::And, {2, 2, 2}},
      {PolicyKind::And, {3, 3}},    {PolicyKind::And, {2, 3, 4}},
      {PolicyKind::And, {1, 2}},    {PolicyKind::Or, {2, 2}},
      {PolicyKind::Or, {3, 3}},     {PolicyKind::Or, {2, 2, 2}},
      {PolicyKind::Or, {1, 4}},
  };

  std::vector<ModelRow> rows;
  std::uint64_t salt = 0;
  for (const auto& config : configs) {
    ModelRow row;
    row.policy = config.kind == PolicyKind::And ? "AND" : "OR";
    row.n = static_cast<int>(config.m.size());
    row.m = config.m;

    ModelParams params;
    params.n = row.n;
    params.m = config.m;
    params.policy_kind = config.kind;
    row.closed_form = config.kind == PolicyKind::And ? p_nd_and(params)
                                                     : p_nd_or(params);
    if (config.kind == PolicyKind::Or)
      row.complement = p_nd_or_complement(params);

    std::string text = row.policy + "(";
    for (int i = 0; i < row.n; ++i) {
      if (i) text += ',';
      text += "'Org" + std::to_string(i + 1) + ".member'";
    }
    text += ")";
    const auto topology = Topology::with_counts(config.m);
    const auto policy = parse_policy(text);
    row.mc = estimate_nondetection_mc(policy, topology, trials,
                                      Rng::derive(seed, salt++).next_u64());
    row.abs_err = std::abs(row.closed_form - row.mc);
    row.three_se = 3.0 * std::sqrt(row.closed_form * (1.0 - row.closed_form) /
                                   static_cast<double>(trials));
    row.pass = row.abs_err <= row.three_se;
    row.flagged = !row.pass;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string model_table(const std::vector<ModelRow>& rows) {
  std::ostringstream out;
  out << "policy  N  M           closed    mc        abs_err   3se       verdict\n";
  for (const auto& row : rows) {
    std::string m = "[";
    for (std::size_t i = 0; i < row.m.size(); ++i) {
      if (i) m += ',';
      m += std::to_string(row.m[i]);
    }
    m += "]";
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-6s  %d  %-10s  %.6f  %.6f  %.6f  %.6f  %s\n",
                  row.policy.c_str(), row.n, m.c_str(), row.closed_form,
                  row.mc, row.abs_err, row.three_se,
                  row.pass ? "pass" : "FLAGGED");
    out << line;
    if (row.flagged && row.complement) {
      std::snprintf(line, sizeof(line),
                    "        complement form %.6f (|err| vs mc %.6f)\n",
                    *row.complement, std::abs(*row.complement - row.mc));
      out << line;
    }
  }
  return out.str();
}

MetricsReport reaggregate(const std::string& events_path) {
  return aggregate(read_events_jsonl(events_path));
}

}  // namespace eovsim
