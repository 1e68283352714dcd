#include "eovsim/network.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>

namespace eovsim {

namespace {

Event make_event(Nanos t, EventKind kind, std::string tx_id) {
  Event e;
  e.t = t;
  e.kind = kind;
  e.tx_id = std::move(tx_id);
  return e;
}

}  // namespace

SimNetwork::SimNetwork(NetworkConfig config, EventSink* sink)
    : config_(std::move(config)), sink_(sink) {
  policy_ = parse_policy(config_.policy_text);
  validate_policy(policy_, config_.topology);

  if (config_.deterministic) {
    virtual_clock_ = std::make_unique<VirtualClock>();
    clock_ = virtual_clock_.get();
  } else {
    wall_clock_ = std::make_unique<WallClock>();
    clock_ = wall_clock_.get();
  }

  for (const auto& org : config_.topology.orgs) {
    for (const auto& peer_id : org.peers) {
      peers_.push_back(std::make_unique<Peer>(
          peer_id, org.org_id,
          make_cache(config_.cache_variant, config_.cache_options), clock_));
    }
  }
}

Peer* SimNetwork::peer(const std::string& peer_id) {
  for (auto& p : peers_)
    if (p->peer_id() == peer_id) return p.get();
  throw std::invalid_argument("unknown peer: " + peer_id);
}

std::vector<const WorldState*> SimNetwork::replicas() const {
  std::vector<const WorldState*> out;
  out.reserve(peers_.size());
  for (const auto& p : peers_) out.push_back(&p->replica());
  return out;
}

CacheCounters SimNetwork::cache_totals() const {
  CacheCounters totals;
  for (const auto& p : peers_)
    if (p->has_cache()) totals += p->cache()->counters();
  return totals;
}

void SimNetwork::warmup(std::int64_t universe) {
  if (orderer_)
    throw std::logic_error("warmup must run before the workload starts");
  std::vector<Endorsement> endorsements;
  for (const auto& org : config_.topology.orgs)
    endorsements.push_back({org.peers.front(), org.org_id});

  const auto chunk = static_cast<std::int64_t>(config_.orderer.batch_size);
  std::int64_t created = 0;
  while (created < universe) {
    Block block;
    block.number = static_cast<std::int64_t>(block_log_.size());
    block.cut_time = clock_->now();
    const auto count = std::min<std::int64_t>(universe - created, chunk);
    block.cut_reason =
        count == chunk ? CutReason::SizeReached : CutReason::TimeoutExpired;
    for (std::int64_t i = 0; i < count; ++i, ++created) {
      EndorsedTransaction tx;
      tx.tx_id = "W" + std::to_string(created);
      tx.write_set.push_back({OpGenerator::key_name(created), "init"});
      tx.endorsements = endorsements;
      block.transactions.push_back(std::move(tx));
    }
    deliver_everywhere(block, /*record=*/false);
  }
}

void SimNetwork::run(OpGenerator& gen, const WorkloadConfig& workload) {
  orderer_ = std::make_unique<Orderer>(
      config_.orderer, clock_,
      [this](Block&& block) { on_block_cut(std::move(block)); },
      static_cast<std::int64_t>(block_log_.size()));
  active_gen_ = &gen;
  active_workload_ = &workload;
  if (config_.deterministic) {
    run_deterministic(gen, workload);
  } else {
    run_concurrent(gen, workload);
  }
  active_gen_ = nullptr;
  active_workload_ = nullptr;
}

// ---------------------------------------------------------------------------

void SimNetwork::process_proposal(OpGenerator& gen,
                                  const WorkloadConfig& workload,
                                  const ChaincodeOp& op, int attempt,
                                  bool conflict_intent, Rng& selection_rng) {
  (void)workload;
  const Nanos t = clock_->now();
  TransactionProposal proposal;
  proposal.tx_id = "T" + std::to_string(id_serial_.fetch_add(1));
  proposal.op = op;
  proposal.client_id = "client";
  proposal.submit_time = t;

  sink_->emit(make_event(t, EventKind::Submitted, proposal.tx_id));
  gen.on_submitted(proposal.tx_id, op, conflict_intent);
  {
    std::lock_guard<std::mutex> lock(meta_mu_);
    inflight_meta_[proposal.tx_id] = TxMeta{op, attempt, conflict_intent};
  }
  in_flight_.fetch_add(1);

  auto endorsers = select_endorsers(policy_, config_.topology, selection_rng);
  std::vector<EndorsementResponse> responses;
  responses.reserve(endorsers.size());
  for (const auto& peer_id : endorsers) {
    if (!config_.deterministic && config_.endorse_cost > 0)
      std::this_thread::sleep_for(
          std::chrono::nanoseconds(config_.endorse_cost));
    auto response = peer(peer_id)->endorse(proposal);
    Event e = make_event(clock_->now(),
                         response.outcome == EndorseOutcome::Endorsed
                             ? EventKind::Endorsed
                             : EventKind::EmvccRejected,
                         proposal.tx_id);
    e.peer_id = peer_id;
    e.conflict_key = response.conflict_key;
    e.blocking_tx = response.blocking_tx;
    sink_->emit(std::move(e));
    responses.push_back(std::move(response));
  }

  auto result = assemble_endorsed_tx(responses, policy_);
  if (std::holds_alternative<ClientAbort>(result)) {
    const auto& abort = std::get<ClientAbort>(result);
    const bool early = abort.reason == ClientAbortReason::EmvccDetected;
    Event e = make_event(clock_->now(),
                         early ? EventKind::EmvccRejected
                               : EventKind::ClientAborted,
                         proposal.tx_id);
    e.conflict_key = abort.conflict_key;
    e.blocking_tx = abort.blocking_tx;
    if (early) {
      // keep the read versions the rejecting peer saw; the counterfactual
      // check replays them later
      for (const auto& r : responses) {
        if (r.outcome == EndorseOutcome::EmvccRejected) {
          e.read_set = r.read_set;
          break;
        }
      }
    }
    sink_->emit(std::move(e));
    finish_terminal(proposal.tx_id, /*retryable=*/early);
    return;
  }

  auto tx = std::get<EndorsedTransaction>(std::move(result));
  tx.submit_time = t;
  // emitted before submit: an inline size-reached cut delivers (and emits
  // commit events) before submit returns
  sink_->emit(make_event(clock_->now(), EventKind::Ordered, proposal.tx_id));
  if (!orderer_->submit(std::move(tx)))
    throw std::logic_error("duplicate tx id " + proposal.tx_id);
}

void SimNetwork::on_block_cut(Block&& block) {
  if (config_.deterministic) {
    deliver_everywhere(block, /*record=*/true);
  } else {
    {
      std::lock_guard<std::mutex> lock(dq_mu_);
      delivery_q_.push_back(std::move(block));
    }
    dq_cv_.notify_one();
  }
}

void SimNetwork::deliver_everywhere(const Block& block, bool record) {
  if (!config_.deterministic && config_.validation_cost > 0)
    std::this_thread::sleep_for(std::chrono::nanoseconds(
        config_.validation_cost *
        static_cast<Nanos>(block.transactions.size())));

  ValidationFlags reference;
  bool first = true;
  for (auto& p : peers_) {
    auto flags = p->deliver_block(block, policy_);
    if (first) {
      reference = std::move(flags);
      first = false;
    } else if (flags != reference) {
      flag_divergence_.store(true);
    }
  }
  {
    std::lock_guard<std::mutex> lock(log_mu_);
    block_log_.push_back({block, reference});
  }
  if (!record) return;

  const Nanos t = clock_->now();
  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    const auto& tx = block.transactions[i];
    EventKind kind;
    switch (reference[i]) {
      case TxStatus::Valid: kind = EventKind::Committed; break;
      case TxStatus::MvccConflict: kind = EventKind::MvccRejected; break;
      default: kind = EventKind::PolicyRejected; break;
    }
    Event e = make_event(t, kind, tx.tx_id);
    e.block_number = block.number;
    sink_->emit(std::move(e));
    finish_terminal(tx.tx_id, reference[i] == TxStatus::MvccConflict);
  }
}

void SimNetwork::finish_terminal(const std::string& tx_id, bool retryable) {
  if (active_gen_) active_gen_->on_terminal(tx_id);
  TxMeta meta;
  bool found = false;
  {
    std::lock_guard<std::mutex> lock(meta_mu_);
    auto it = inflight_meta_.find(tx_id);
    if (it != inflight_meta_.end()) {
      meta = std::move(it->second);
      found = true;
      inflight_meta_.erase(it);
    }
  }
  if (found && retryable && active_workload_ &&
      active_workload_->retry_aborted &&
      meta.attempt < active_workload_->retry_limit) {
    std::lock_guard<std::mutex> lock(retry_mu_);
    retry_q_.push_back({meta.op, meta.attempt + 1, meta.conflict_intent});
  }
  in_flight_.fetch_sub(1);
}

bool SimNetwork::pop_retry(RetryItem& out) {
  std::lock_guard<std::mutex> lock(retry_mu_);
  if (retry_q_.empty()) return false;
  out = std::move(retry_q_.front());
  retry_q_.pop_front();
  return true;
}

void SimNetwork::evict_all(Nanos ttl) {
  for (auto& p : peers_) p->evict_expired(ttl);
}

// ---------------------------------------------------------------------------

void SimNetwork::run_deterministic(OpGenerator& gen,
                                   const WorkloadConfig& workload) {
  const Nanos per_tx =
      workload.tx_rate > 0 ? static_cast<Nanos>(1e9 / workload.tx_rate) : 0;
  std::int64_t submitted = 0;
  Rng selection_rng = Rng::derive(workload.seed, 7);
  Nanos next_evict = kSecond;

  auto maybe_evict = [&](Nanos now) {
    while (now >= next_evict) {
      evict_all(config_.cache_ttl);
      next_evict += kSecond;
    }
  };

  for (;;) {
    // retries first, at the current virtual time
    RetryItem item;
    if (pop_retry(item)) {
      process_proposal(gen, workload, item.op, item.attempt,
                       item.conflict_intent, selection_rng);
      continue;
    }

    const bool have_submission = submitted < workload.total_tx;
    const Nanos t_sub = have_submission ? submitted * per_tx : 0;
    const auto deadline = orderer_->timeout_deadline();

    if (have_submission && (!deadline || t_sub < *deadline)) {
      virtual_clock_->advance_to(t_sub);
      maybe_evict(t_sub);
      auto next = gen.next_op();
      process_proposal(gen, workload, next.op, 0, next.conflict_intent,
                       selection_rng);
      ++submitted;
    } else if (deadline) {
      virtual_clock_->advance_to(*deadline);
      maybe_evict(*deadline);
      orderer_->on_timeout(*deadline);
    } else {
      break;  // no retries, no submissions, nothing pending
    }
  }
}

void SimNetwork::run_concurrent(OpGenerator& gen,
                                const WorkloadConfig& workload) {
  stop_.store(false);
  std::atomic<std::int64_t> next_index{0};
  const Nanos start = clock_->now();
  const double rate = workload.tx_rate;

  auto drained = [&]() {
    if (next_index.load() < workload.total_tx) return false;
    {
      std::lock_guard<std::mutex> lock(retry_mu_);
      if (!retry_q_.empty()) return false;
    }
    return in_flight_.load() == 0 && orderer_->pending() == 0;
  };

  auto worker_loop = [&](int worker_id) {
    Rng selection_rng = Rng::derive(workload.seed, 1000 + worker_id);
    for (;;) {
      RetryItem item;
      if (pop_retry(item)) {
        process_proposal(gen, workload, item.op, item.attempt,
                         item.conflict_intent, selection_rng);
        continue;
      }

      std::int64_t index = next_index.load();
      bool claimed = false;
      while (index < workload.total_tx) {
        if (next_index.compare_exchange_weak(index, index + 1)) {
          claimed = true;
          break;
        }
      }
      if (claimed) {
        if (rate > 0) {
          const Nanos target =
              start +
              static_cast<Nanos>(static_cast<double>(index) * 1e9 / rate);
          const Nanos now = clock_->now();
          if (target > now)
            std::this_thread::sleep_for(
                std::chrono::nanoseconds(target - now));
        }
        auto next = gen.next_op();
        process_proposal(gen, workload, next.op, 0, next.conflict_intent,
                         selection_rng);
        continue;
      }

      if (drained()) return;
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  };

  std::thread timer([&] {
    Nanos next_evict = clock_->now() + kSecond;
    while (!stop_.load()) {
      orderer_->on_timeout(clock_->now());
      if (clock_->now() >= next_evict) {
        evict_all(config_.cache_ttl);
        next_evict += kSecond;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  });

  std::thread dispatcher([&] {
    for (;;) {
      Block block;
      {
        std::unique_lock<std::mutex> lock(dq_mu_);
        dq_cv_.wait(lock, [&] { return stop_.load() || !delivery_q_.empty(); });
        if (delivery_q_.empty()) {
          if (stop_.load()) return;
          continue;
        }
        block = std::move(delivery_q_.front());
        delivery_q_.pop_front();
      }
      deliver_everywhere(block, /*record=*/true);
    }
  });

  std::vector<std::thread> workers;
  const int worker_count = std::max(1, workload.client_workers);
  workers.reserve(static_cast<std::size_t>(worker_count));
  for (int w = 0; w < worker_count; ++w) workers.emplace_back(worker_loop, w);
  for (auto& thread : workers) thread.join();

  stop_.store(true);
  dq_cv_.notify_all();
  dispatcher.join();
  timer.join();
}

void drive(OpGenerator& gen, SimNetwork& network,
           const WorkloadConfig& workload) {
  network.warmup(workload.key_universe);
  network.run(gen, workload);
}

}  // namespace eovsim
