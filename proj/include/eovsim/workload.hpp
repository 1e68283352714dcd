#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eovsim/rng.hpp"
#include "eovsim/types.hpp"

namespace eovsim {

enum class WorkloadMode { HotSetPairing, Zipf };

struct WorkloadConfig {
  double tx_rate = 5000;          // tx/s; 0 = as fast as possible
  std::int64_t total_tx = 10000;
  double conflict_rate = 0.40;    // fraction of ops aimed at an in-flight key
  std::int64_t key_universe = 20000;
  WorkloadMode mode = WorkloadMode::HotSetPairing;
  double zipf_s = 1.0;
  bool retry_aborted = false;
  int retry_limit = 5;            // attempts per original tx when retrying
  std::uint64_t seed = 42;
  int client_workers = 8;         // concurrent engine only
};

// Zipf(s) over ranks 1..n via the inverse CDF; s = 0 degenerates to uniform.
class ZipfSampler {
 public:
  ZipfSampler(std::int64_t n, double s);

  std::int64_t sample(Rng& rng) const;  // 0-based index
  std::int64_t size() const { return static_cast<std::int64_t>(cdf_.size()); }

 private:
  std::vector<double> cdf_;
};

// Key-targeting strategy. HotSetPairing aims the configured fraction of ops
// at keys with an in-flight writer: each fresh op registers its key as a
// pairing partner, each conflict op consumes one; when no partner is
// available it chains onto the most recent in-flight key, and only then
// falls back to a fresh key. Zipf mode draws keys from the skewed
// distribution and lets conflicts emerge on their own.
class OpGenerator {
 public:
  struct Next {
    ChaincodeOp op;
    bool conflict_intent = false;
  };

  OpGenerator(const WorkloadConfig& config, Rng rng);

  Next next_op();

  // bookkeeping hooks driven by the engines
  void on_submitted(const std::string& tx_id, const ChaincodeOp& op,
                    bool conflict_intent);
  void on_terminal(const std::string& tx_id);

  static std::string key_name(std::int64_t index);

 private:
  std::string pick_key_locked();

  WorkloadConfig config_;
  Rng rng_;
  ZipfSampler zipf_;

  std::mutex mu_;
  std::int64_t fresh_cursor_ = 0;
  std::int64_t value_serial_ = 0;
  // key -> number of in-flight writers
  std::unordered_map<std::string, int> inflight_writers_;
  // tx -> keys it writes (to undo the counts at terminal)
  std::unordered_map<std::string, std::vector<std::string>> inflight_tx_;
  // most-recent-first candidates for chained fallback (lazily pruned)
  std::vector<std::string> inflight_stack_;
  // fresh keys awaiting a conflict partner
  std::deque<std::string> partner_pool_;
  std::unordered_set<std::string> partner_set_;
};

}  // namespace eovsim
