#pragma once

#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "eovsim/cache.hpp"
#include "eovsim/clock.hpp"
#include "eovsim/ledger.hpp"
#include "eovsim/policy.hpp"
#include "eovsim/types.hpp"

namespace eovsim {

// Endorsing/validating peer: executes chaincode against its replica, probes
// the pending-write cache before responding, and commits delivered blocks
// (releasing cache entries for every transaction in the block).
class Peer {
 public:
  Peer(std::string peer_id, std::string org_id,
       std::unique_ptr<PendingWriteCache> cache, const Clock* clock);

  // Chaincode execution against the committed replica, then the cache probe.
  // Reserved -> Endorsed; ConflictDetected -> EmvccRejected with the key and
  // blocking transaction (and nothing reserved).
  EndorsementResponse endorse(const TransactionProposal& proposal);

  // Commits the block (policy predicate = the policy evaluated over each
  // transaction's collected endorsements), then releases every transaction in
  // the block from the cache, valid or not. Blocks must arrive in order.
  ValidationFlags deliver_block(const Block& block,
                                const EndorsementPolicy& policy);

  std::size_t evict_expired(Nanos ttl);

  const std::string& peer_id() const { return peer_id_; }
  const std::string& org_id() const { return org_id_; }
  const WorldState& replica() const { return replica_; }
  PendingWriteCache* cache() { return cache_.get(); }
  const PendingWriteCache* cache() const { return cache_.get(); }
  bool has_cache() const { return cache_ != nullptr; }
  std::int64_t height() const;
  std::string replica_fingerprint() const;

 private:
  std::string peer_id_;
  std::string org_id_;
  std::unique_ptr<PendingWriteCache> cache_;
  const Clock* clock_;

  // endorsement reads race with delivery at block granularity only
  mutable std::shared_mutex replica_mu_;
  WorldState replica_;
};

enum class ClientAbortReason { EmvccDetected, NonDeterminism };

struct ClientAbort {
  ClientAbortReason reason = ClientAbortReason::EmvccDetected;
  std::string conflict_key;
  std::string blocking_tx;
  std::string peer_id;
};

using AssembleResult = std::variant<EndorsedTransaction, ClientAbort>;

// Client-side step: any early rejection aborts the transaction; otherwise the
// Endorsed responses must carry identical read/write sets and satisfy the
// policy to proceed to ordering.
AssembleResult assemble_endorsed_tx(
    const std::vector<EndorsementResponse>& responses,
    const EndorsementPolicy& policy);

}  // namespace eovsim
