#include "eovsim/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace eovsim {

namespace {

void check_params(const ModelParams& params) {
  if (params.n < 1) throw std::invalid_argument("org count must be >= 1");
  if (static_cast<int>(params.m.size()) != params.n)
    throw std::invalid_argument("peer-count list must have one entry per org");
  for (int m : params.m)
    if (m < 1) throw std::invalid_argument("peer counts must be >= 1");
  if (params.conflict_rate < 0.0 || params.conflict_rate > 1.0)
    throw std::invalid_argument("conflict_rate must be in [0,1]");
}

bool equal_m(const std::vector<int>& m) {
  return std::all_of(m.begin(), m.end(), [&](int v) { return v == m.front(); });
}

}  // namespace

double p_nd_and(const ModelParams& params) {
  check_params(params);
  if (params.policy_kind != PolicyKind::And)
    throw std::invalid_argument("p_nd_and requires an AND policy");
  double p = 1.0;
  for (int m : params.m) p *= static_cast<double>(m - 1) / m;
  return p;
}

double p_nd_or(const ModelParams& params) {
  check_params(params);
  if (params.policy_kind != PolicyKind::Or)
    throw std::invalid_argument("p_nd_or requires an OR policy");
  const double n = params.n;
  if (equal_m(params.m)) {
    const double nm = n * params.m.front();
    return (nm - 1.0) / nm;
  }
  double sum = 0.0;
  for (int m : params.m) sum += 1.0 / m;
  return sum / n;
}

double p_nd_or_complement(const ModelParams& params) {
  check_params(params);
  if (params.policy_kind != PolicyKind::Or)
    throw std::invalid_argument("p_nd_or_complement requires an OR policy");
  const double n = params.n;
  double sum = 0.0;
  for (int m : params.m) sum += 1.0 / (n * m);
  return 1.0 - sum / n;
}

double fp_estimate(double tx_per_block, double conflict_rate, double p_nd) {
  const double c = conflict_rate;
  const double denominator = c * p_nd - c + 1.0;
  if (denominator <= 0.0)
    throw std::logic_error("false-positive estimate denominator is not positive");
  return tx_per_block * c * c * p_nd * (1.0 - p_nd) / denominator;
}

double fp_estimate(const ModelParams& params) {
  const double p = params.policy_kind == PolicyKind::And ? p_nd_and(params)
                                                         : p_nd_or(params);
  return fp_estimate(params.tx_per_block, params.conflict_rate, p);
}

double fn_estimate(double tx_rate, double conflict_rate, double p_nd) {
  return tx_rate * conflict_rate * p_nd;
}

double fn_estimate_per_block(double tx_per_block, double conflict_rate,
                             double p_nd) {
  return tx_per_block * conflict_rate * p_nd;
}

double fn_estimate(const ModelParams& params) {
  const double p = params.policy_kind == PolicyKind::And ? p_nd_and(params)
                                                         : p_nd_or(params);
  return fn_estimate(params.tx_rate, params.conflict_rate, p);
}

double fn_estimate_per_block(const ModelParams& params) {
  const double p = params.policy_kind == PolicyKind::And ? p_nd_and(params)
                                                         : p_nd_or(params);
  return fn_estimate_per_block(params.tx_per_block, params.conflict_rate, p);
}

double goodput(double valid_tx, double total_tx, double throughput) {
  if (total_tx <= 0.0) return 0.0;
  return valid_tx / total_tx * throughput;
}

double estimate_nondetection_mc(const EndorsementPolicy& policy,
                                const Topology& topology, std::int64_t trials,
                                std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  Rng rng(seed);
  std::int64_t nondetected = 0;
  for (std::int64_t i = 0; i < trials; ++i) {
    const auto first = select_endorsers(policy, topology, rng);
    const auto second = select_endorsers(policy, topology, rng);
    bool overlap = false;
    for (const auto& peer : first) {
      if (second.count(peer)) {
        overlap = true;
        break;
      }
    }
    if (!overlap) ++nondetected;
  }
  return static_cast<double>(nondetected) / static_cast<double>(trials);
}

// ---------------------------------------------------------------------------

namespace {

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// nearest-rank percentile over a sorted vector
double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  if (rank < 1) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  return sorted[rank - 1];
}

double guarded_fp(double tx_per_block, double conflict_rate, double p_nd) {
  const double denominator = conflict_rate * p_nd - conflict_rate + 1.0;
  if (denominator <= 1e-12) return 0.0;
  return tx_per_block * conflict_rate * conflict_rate * p_nd * (1.0 - p_nd) /
         denominator;
}

}  // namespace

MetricsReport aggregate(const std::vector<Event>& events) {
  MetricsReport r;
  if (events.empty()) return r;

  struct Chain {
    Nanos submit = -1;
    Nanos terminal = -1;
    EventKind kind = EventKind::Submitted;
    bool has_terminal = false;
  };
  std::unordered_map<std::string, Chain> chains;
  std::set<std::int64_t> block_numbers;
  std::int64_t delivered_terminals = 0;

  Nanos t_min = events.front().t;
  Nanos t_max = events.front().t;
  for (const auto& e : events) {
    t_min = std::min(t_min, e.t);
    t_max = std::max(t_max, e.t);
    auto& chain = chains[e.tx_id];
    switch (e.kind) {
      case EventKind::Submitted:
        chain.submit = e.t;
        ++r.total_tx;
        break;
      case EventKind::Ordered:
        ++r.ordered;
        break;
      default:
        break;
    }
    if (is_terminal(e)) {
      chain.terminal = e.t;
      chain.kind = e.kind;
      chain.has_terminal = true;
      if (e.block_number >= 0) {
        block_numbers.insert(e.block_number);
        ++delivered_terminals;
      }
    }
  }

  std::vector<double> latencies_ms;
  std::vector<double> td_emvcc_ms;
  std::vector<double> td_mvcc_ms;
  for (const auto& [tx_id, chain] : chains) {
    (void)tx_id;
    if (!chain.has_terminal) {
      if (chain.submit >= 0) ++r.stuck;
      continue;
    }
    const bool timed = chain.submit >= 0;
    const double elapsed_ms =
        timed ? static_cast<double>(chain.terminal - chain.submit) / 1e6 : 0.0;
    switch (chain.kind) {
      case EventKind::Committed:
        ++r.committed;
        if (timed) latencies_ms.push_back(elapsed_ms);
        break;
      case EventKind::MvccRejected:
        ++r.mvcc_aborted;
        if (timed) td_mvcc_ms.push_back(elapsed_ms);
        break;
      case EventKind::EmvccRejected:
        ++r.emvcc_aborted;
        if (timed) td_emvcc_ms.push_back(elapsed_ms);
        break;
      default:
        ++r.policy_aborted;
        break;
    }
  }

  // value-sorted accumulation keeps the report independent of map layout
  std::sort(latencies_ms.begin(), latencies_ms.end());
  std::sort(td_emvcc_ms.begin(), td_emvcc_ms.end());
  std::sort(td_mvcc_ms.begin(), td_mvcc_ms.end());

  const std::int64_t terminal =
      r.committed + r.mvcc_aborted + r.emvcc_aborted + r.policy_aborted;
  r.blocks = static_cast<std::int64_t>(block_numbers.size());
  r.duration_s =
      static_cast<double>(std::max<Nanos>(t_max - t_min, 1)) / 1e9;
  r.throughput = static_cast<double>(terminal) / r.duration_s;
  r.goodput = goodput(static_cast<double>(r.committed),
                      static_cast<double>(terminal), r.throughput);
  r.latency.mean_ms = mean_of(latencies_ms);
  r.latency.p50_ms = percentile(latencies_ms, 0.50);
  r.latency.p95_ms = percentile(latencies_ms, 0.95);
  r.td_emvcc_ms = mean_of(td_emvcc_ms);
  r.td_mvcc_ms = mean_of(td_mvcc_ms);

  const std::int64_t conflict_aborts = r.mvcc_aborted + r.emvcc_aborted;
  r.measured_nondetection =
      conflict_aborts > 0
          ? static_cast<double>(r.mvcc_aborted) / conflict_aborts
          : 0.0;
  r.measured_conflict_rate =
      terminal > 0 ? static_cast<double>(conflict_aborts) / terminal : 0.0;
  r.mean_block_tx = r.blocks > 0 ? static_cast<double>(delivered_terminals) /
                                       static_cast<double>(r.blocks)
                                 : 0.0;
  r.fp_estimate = guarded_fp(r.mean_block_tx, r.measured_conflict_rate,
                             r.measured_nondetection);
  r.fn_estimate = fn_estimate(r.throughput, r.measured_conflict_rate,
                              r.measured_nondetection);
  r.fn_estimate_per_block = fn_estimate_per_block(
      r.mean_block_tx, r.measured_conflict_rate, r.measured_nondetection);
  return r;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["total_tx"] = total_tx;
  j["blocks"] = blocks;
  j["duration_s"] = duration_s;
  j["throughput"] = throughput;
  j["goodput"] = goodput;
  j["latency"] = {{"mean_ms", latency.mean_ms},
                  {"p50_ms", latency.p50_ms},
                  {"p95_ms", latency.p95_ms}};
  j["committed"] = committed;
  j["mvcc_aborted"] = mvcc_aborted;
  j["emvcc_aborted"] = emvcc_aborted;
  j["policy_aborted"] = policy_aborted;
  j["ordered"] = ordered;
  j["stuck"] = stuck;
  j["td_emvcc_ms"] = td_emvcc_ms;
  j["td_mvcc_ms"] = td_mvcc_ms;
  j["measured_nondetection"] = measured_nondetection;
  j["measured_conflict_rate"] = measured_conflict_rate;
  j["mean_block_tx"] = mean_block_tx;
  j["fp_estimate"] = fp_estimate;
  j["fn_estimate"] = fn_estimate;
  j["fn_estimate_per_block"] = fn_estimate_per_block;
  return j;
}

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return buffer;
}

std::string metrics_csv_header() {
  return "total_tx,blocks,duration_s,throughput,goodput,latency_mean_ms,"
         "latency_p50_ms,latency_p95_ms,committed,mvcc_aborted,emvcc_aborted,"
         "policy_aborted,ordered,stuck,td_emvcc_ms,td_mvcc_ms,"
         "measured_nondetection,measured_conflict_rate,mean_block_tx,"
         "fp_estimate,fn_estimate,fn_estimate_per_block";
}

std::string metrics_csv_row(const MetricsReport& r) {
  std::string row;
  auto add_int = [&](std::int64_t v) {
    if (!row.empty()) row += ',';
    row += std::to_string(v);
  };
  auto add_dbl = [&](double v) {
    if (!row.empty()) row += ',';
    row += format_double(v);
  };
  add_int(r.total_tx);
  add_int(r.blocks);
  add_dbl(r.duration_s);
  add_dbl(r.throughput);
  add_dbl(r.goodput);
  add_dbl(r.latency.mean_ms);
  add_dbl(r.latency.p50_ms);
  add_dbl(r.latency.p95_ms);
  add_int(r.committed);
  add_int(r.mvcc_aborted);
  add_int(r.emvcc_aborted);
  add_int(r.policy_aborted);
  add_int(r.ordered);
  add_int(r.stuck);
  add_dbl(r.td_emvcc_ms);
  add_dbl(r.td_mvcc_ms);
  add_dbl(r.measured_nondetection);
  add_dbl(r.measured_conflict_rate);
  add_dbl(r.mean_block_tx);
  add_dbl(r.fp_estimate);
  add_dbl(r.fn_estimate);
  add_dbl(r.fn_estimate_per_block);
  return row;
}

}  // namespace eovsim
