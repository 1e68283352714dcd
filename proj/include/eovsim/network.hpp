#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "eovsim/cache.hpp"
#include "eovsim/clock.hpp"
#include "eovsim/events.hpp"
#include "eovsim/ordering.hpp"
#include "eovsim/peer.hpp"
#include "eovsim/policy.hpp"
#include "eovsim/workload.hpp"

namespace eovsim {

struct NetworkConfig {
  Topology topology = Topology::with_counts({2, 2});
  std::string policy_text = "AND('Org1.member','Org2.member')";
  CacheVariant cache_variant = CacheVariant::SyncMap;
  CacheOptions cache_options;
  OrdererConfig orderer;
  Nanos cache_ttl = 30 * kSecond;
  // concurrent engine service-time model; ignored by the deterministic engine
  Nanos endorse_cost = 0;     // per endorsement call
  Nanos validation_cost = 0;  // per transaction at block delivery
  bool deterministic = true;
};

// The assembled system: peers (one cache each), one orderer, and the client
// loop. Deterministic mode runs everything on the calling thread over a
// virtual clock, so equal seeds give byte-identical event streams; concurrent
// mode runs real client workers, a batch-timeout timer, and a delivery
// dispatcher over a wall clock.
class SimNetwork {
 public:
  SimNetwork(NetworkConfig config, EventSink* sink);

  // Pre-creates keys CAR0..CAR<n-1> with synthetic blind-write blocks
  // endorsed by one peer per org, delivered before the orderer starts. No
  // events are emitted; the blocks do enter the block log.
  void warmup(std::int64_t universe);

  // Drives the full workload to drain.
  void run(OpGenerator& gen, const WorkloadConfig& workload);

  const std::vector<std::unique_ptr<Peer>>& peers() const { return peers_; }
  Peer* peer(const std::string& peer_id);
  const std::vector<LoggedBlock>& block_log() const { return block_log_; }
  const EndorsementPolicy& policy() const { return policy_; }
  const Topology& topology() const { return config_.topology; }
  const Clock& clock() const { return *clock_; }

  // true when two replicas ever disagreed on a block's flags
  bool flag_divergence() const { return flag_divergence_.load(); }

  CacheCounters cache_totals() const;
  std::vector<const WorldState*> replicas() const;

 private:
  struct RetryItem {
    ChaincodeOp op;
    int attempt = 0;
    bool conflict_intent = false;
  };

  void run_deterministic(OpGenerator& gen, const WorkloadConfig& workload);
  void run_concurrent(OpGenerator& gen, const WorkloadConfig& workload);

  // endorse -> assemble -> order (or abort early); the whole client path
  void process_proposal(OpGenerator& gen, const WorkloadConfig& workload,
                        const ChaincodeOp& op, int attempt,
                        bool conflict_intent, Rng& selection_rng);

  void on_block_cut(Block&& block);
  void deliver_everywhere(const Block& block, bool record);
  // Retires a transaction: workload bookkeeping, then (for retryable aborts,
  // when enabled) a retry enqueue strictly before the in-flight decrement so
  // the drain check can never miss it.
  void finish_terminal(const std::string& tx_id, bool retryable);
  bool pop_retry(RetryItem& out);
  void evict_all(Nanos ttl);

  NetworkConfig config_;
  EventSink* sink_;
  EndorsementPolicy policy_;
  std::unique_ptr<VirtualClock> virtual_clock_;
  std::unique_ptr<WallClock> wall_clock_;
  Clock* clock_ = nullptr;
  std::vector<std::unique_ptr<Peer>> peers_;
  std::unique_ptr<Orderer> orderer_;

  OpGenerator* active_gen_ = nullptr;
  const WorkloadConfig* active_workload_ = nullptr;

  std::atomic<std::int64_t> id_serial_{0};
  std::atomic<std::int64_t> in_flight_{0};
  std::atomic<bool> flag_divergence_{false};

  struct TxMeta {
    ChaincodeOp op;
    int attempt = 0;
    bool conflict_intent = false;
  };
  std::mutex meta_mu_;
  std::unordered_map<std::string, TxMeta> inflight_meta_;

  std::mutex retry_mu_;
  std::deque<RetryItem> retry_q_;

  std::mutex log_mu_;
  std::vector<LoggedBlock> block_log_;

  // concurrent-engine delivery queue
  std::mutex dq_mu_;
  std::condition_variable dq_cv_;
  std::deque<Block> delivery_q_;
  std::atomic<bool> stop_{false};
};

// Client loop: warms up the key universe, then submits total_tx proposals at
// tx_rate (0 = as fast as possible) and runs the network to drain.
void drive(OpGenerator& gen, SimNetwork& network,
           const WorkloadConfig& workload);

}  // namespace eovsim
