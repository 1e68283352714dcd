#include "eovsim/peer.hpp"

#include <mutex>
#include <set>
#include <stdexcept>

namespace eovsim {

Peer::Peer(std::string peer_id, std::string org_id,
           std::unique_ptr<PendingWriteCache> cache, const Clock* clock)
    : peer_id_(std::move(peer_id)),
      org_id_(std::move(org_id)),
      cache_(std::move(cache)),
      clock_(clock) {}

std::int64_t Peer::height() const {
  std::shared_lock<std::shared_mutex> lock(replica_mu_);
  return replica_.height();
}

std::string Peer::replica_fingerprint() const {
  std::shared_lock<std::shared_mutex> lock(replica_mu_);
  return replica_.fingerprint();
}

EndorsementResponse Peer::endorse(const TransactionProposal& proposal) {
  EndorsementResponse response;
  response.tx_id = proposal.tx_id;
  response.peer_id = peer_id_;
  response.org_id = org_id_;

  // chaincode model: Create writes blind, ChangeOwner reads then rewrites
  {
    std::shared_lock<std::shared_mutex> lock(replica_mu_);
    switch (proposal.op.kind) {
      case OpKind::Create:
        response.write_set.push_back({proposal.op.key, proposal.op.value});
        break;
      case OpKind::ChangeOwner: {
        auto current = replica_.read(proposal.op.key);
        ReadItem read{proposal.op.key, std::nullopt};
        if (current) read.version = current->version;
        response.read_set.push_back(std::move(read));
        response.write_set.push_back({proposal.op.key, proposal.op.value});
        break;
      }
      default:
        throw std::invalid_argument("unknown chaincode op for " +
                                    proposal.tx_id);
    }
  }

  if (cache_) {
    std::vector<std::string> read_keys;
    read_keys.reserve(response.read_set.size());
    for (const auto& r : response.read_set) read_keys.push_back(r.key);
    std::vector<std::string> write_keys;
    write_keys.reserve(response.write_set.size());
    for (const auto& w : response.write_set) write_keys.push_back(w.key);

    auto decision = cache_->check_and_reserve(proposal.tx_id, read_keys,
                                              write_keys, clock_->now());
    if (!decision.reserved()) {
      response.outcome = EndorseOutcome::EmvccRejected;
      response.conflict_key = decision.conflicting_key;
      response.blocking_tx = decision.blocking_tx;
      return response;
    }
  }
  response.outcome = EndorseOutcome::Endorsed;
  return response;
}

ValidationFlags Peer::deliver_block(const Block& block,
                                    const EndorsementPolicy& policy) {
  ValidationFlags flags;
  {
    std::unique_lock<std::shared_mutex> lock(replica_mu_);
    flags = replica_.commit_block(block, [&](const EndorsedTransaction& tx) {
      std::multiset<std::string> orgs;
      for (const auto& e : tx.endorsements) orgs.insert(e.org_id);
      return is_satisfied(policy, orgs);
    });
  }
  if (cache_) {
    for (const auto& tx : block.transactions) cache_->release(tx.tx_id);
  }
  return flags;
}

std::size_t Peer::evict_expired(Nanos ttl) {
  if (!cache_) return 0;
  return cache_->evict_expired(ttl, clock_->now());
}

AssembleResult assemble_endorsed_tx(
    const std::vector<EndorsementResponse>& responses,
    const EndorsementPolicy& policy) {
  if (responses.empty())
    throw std::invalid_argument("assembling a transaction with no responses");

  for (const auto& r : responses) {
    if (r.outcome == EndorseOutcome::EmvccRejected)
      return ClientAbort{ClientAbortReason::EmvccDetected, r.conflict_key,
                         r.blocking_tx, r.peer_id};
  }

  const auto& reference = responses.front();
  EndorsedTransaction tx;
  tx.tx_id = reference.tx_id;
  tx.read_set = reference.read_set;
  tx.write_set = reference.write_set;

  std::multiset<std::string> orgs;
  for (const auto& r : responses) {
    if (r.tx_id != reference.tx_id)
      throw std::invalid_argument("mixed responses for " + reference.tx_id +
                                  " and " + r.tx_id);
    if (r.read_set != reference.read_set || r.write_set != reference.write_set)
      return ClientAbort{ClientAbortReason::NonDeterminism, "", "", r.peer_id};
    tx.endorsements.push_back({r.peer_id, r.org_id});
    orgs.insert(r.org_id);
  }
  if (!is_satisfied(policy, orgs))
    return ClientAbort{ClientAbortReason::NonDeterminism, "", "", ""};
  return tx;
}

}  // namespace eovsim
