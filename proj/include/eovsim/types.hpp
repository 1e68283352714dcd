#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eovsim/clock.hpp"

namespace eovsim {

// Version of a committed key: which block wrote it and where in that block.
// Totally ordered; a key's version strictly increases across commits.
struct Version {
  std::int64_t block_height = 0;
  std::int32_t tx_index = 0;

  auto operator<=>(const Version&) const = default;
};

// One read observed at endorsement time. nullopt version = key was absent.
struct ReadItem {
  std::string key;
  std::optional<Version> version;

  bool operator==(const ReadItem&) const = default;
};

struct WriteItem {
  std::string key;
  std::string value;

  bool operator==(const WriteItem&) const = default;
};

enum class OpKind { Create, ChangeOwner };

// Fabcar-style chaincode call: Create is a blind write of a new asset,
// ChangeOwner is a read-modify-write on one existing key.
struct ChaincodeOp {
  OpKind kind = OpKind::Create;
  std::string key;
  std::string value;
};

struct TransactionProposal {
  std::string tx_id;
  ChaincodeOp op;
  std::string client_id;
  Nanos submit_time = 0;
};

struct Endorsement {
  std::string peer_id;
  std::string org_id;

  bool operator==(const Endorsement&) const = default;
};

enum class EndorseOutcome { Endorsed, EmvccRejected };

struct EndorsementResponse {
  std::string tx_id;
  std::string peer_id;
  std::string org_id;
  std::vector<ReadItem> read_set;
  std::vector<WriteItem> write_set;
  EndorseOutcome outcome = EndorseOutcome::Endorsed;
  // set when outcome == EmvccRejected
  std::string conflict_key;
  std::string blocking_tx;
};

struct EndorsedTransaction {
  std::string tx_id;
  std::vector<ReadItem> read_set;
  std::vector<WriteItem> write_set;
  std::vector<Endorsement> endorsements;
  Nanos submit_time = 0;
};

enum class TxStatus { Valid, MvccConflict, PolicyFailure, SyntaxFailure };

using ValidationFlags = std::vector<TxStatus>;

enum class CutReason { SizeReached, TimeoutExpired };

struct Block {
  std::int64_t number = 0;
  std::vector<EndorsedTransaction> transactions;
  CutReason cut_reason = CutReason::SizeReached;
  Nanos cut_time = 0;
};

// Block plus the validation verdicts the peers agreed on; unit of the block
// log that the replay checker re-derives from scratch.
struct LoggedBlock {
  Block block;
  ValidationFlags flags;
};

inline const char* to_string(TxStatus s) {
  switch (s) {
    case TxStatus::Valid: return "valid";
    case TxStatus::MvccConflict: return "mvcc_conflict";
    case TxStatus::PolicyFailure: return "policy_failure";
    case TxStatus::SyntaxFailure: return "syntax_failure";
  }
  return "?";
}

inline const char* to_string(CutReason r) {
  return r == CutReason::SizeReached ? "size" : "timeout";
}

inline const char* to_string(OpKind k) {
  return k == OpKind::Create ? "create" : "change_owner";
}

}  // namespace eovsim
