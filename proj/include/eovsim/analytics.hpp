#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eovsim/events.hpp"
#include "eovsim/policy.hpp"
#include "eovsim/rng.hpp"

namespace eovsim {

enum class PolicyKind { And, Or };

// Inputs to the closed-form model: N organizations with m[i] peers each,
// block size, conflict share, and submission rate.
struct ModelParams {
  int n = 2;
  std::vector<int> m = {2, 2};
  double tx_per_block = 500.0;
  double conflict_rate = 0.4;
  double tx_rate = 5000.0;
  PolicyKind policy_kind = PolicyKind::And;
};

// Probability that two conflicting transactions share no endorsing peer.
// AND form: prod_i (m_i - 1) / m_i.
double p_nd_and(const ModelParams& params);

// OR form as printed in the reference model: (N*M - 1)/(N*M) when all m_i are
// equal, otherwise (1/N) * sum_i 1/m_i. The unequal branch does not reduce to
// the equal branch (it reads like a detection probability); the Monte Carlo
// estimator is the authority there, and validate-model flags the divergence.
double p_nd_or(const ModelParams& params);

// Complement form for the unequal-M case: 1 - (1/N) * sum_i 1/(N * m_i).
// Reduces to (N*M - 1)/(N*M) when all m_i are equal.
double p_nd_or_complement(const ModelParams& params);

// Expected false positives per block:
// (tx_per_block * c^2 * p * (1-p)) / (c*p - c + 1). Throws when the
// denominator is not positive (impossible for c < 1).
double fp_estimate(double tx_per_block, double conflict_rate, double p_nd);
double fp_estimate(const ModelParams& params);

// Expected false negatives, rate form (per second) and per-block form. The
// reference model states the rate form but derives the per-block one; both
// are exposed.
double fn_estimate(double tx_rate, double conflict_rate, double p_nd);
double fn_estimate_per_block(double tx_per_block, double conflict_rate,
                             double p_nd);
double fn_estimate(const ModelParams& params);
double fn_estimate_per_block(const ModelParams& params);

// (valid / total) * throughput; zero when total is zero.
double goodput(double valid_tx, double total_tx, double throughput);

// Brute-force oracle for the non-detection probability: draws `trials`
// independent pairs of endorser selections and returns the fraction of pairs
// with no peer in common. Deterministic given the seed.
double estimate_nondetection_mc(const EndorsementPolicy& policy,
                                const Topology& topology, std::int64_t trials,
                                std::uint64_t seed);

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

// Everything measured from one run's event stream, plus the closed-form
// estimates evaluated at the measured operating point (so the report is a
// pure function of the stream).
struct MetricsReport {
  std::int64_t total_tx = 0;  // submitted
  std::int64_t blocks = 0;    // distinct delivered blocks seen by terminals
  double duration_s = 0.0;
  double throughput = 0.0;  // terminal tx/s
  double goodput = 0.0;
  LatencyStats latency;  // committed txs only
  std::int64_t committed = 0;
  std::int64_t mvcc_aborted = 0;
  std::int64_t emvcc_aborted = 0;
  std::int64_t policy_aborted = 0;  // validation policy/syntax + client aborts
  std::int64_t ordered = 0;
  std::int64_t stuck = 0;  // submitted, never terminal (harness diagnostics)
  double td_emvcc_ms = 0.0;
  double td_mvcc_ms = 0.0;
  double measured_nondetection = 0.0;  // mvcc / (mvcc + emvcc)
  double measured_conflict_rate = 0.0;
  double mean_block_tx = 0.0;
  double fp_estimate = 0.0;            // per block, at measured operating point
  double fn_estimate = 0.0;            // per second
  double fn_estimate_per_block = 0.0;

  nlohmann::ordered_json to_json() const;
};

// Single pass over a drained event stream; pure (same stream, same report,
// bit for bit). Unterminated transactions land in `stuck`.
MetricsReport aggregate(const std::vector<Event>& events);

// Flat CSV fragment for one report; the runner prepends the run parameters.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);

// Deterministic double formatting shared by the CSV writers.
std::string format_double(double value);

}  // namespace eovsim
