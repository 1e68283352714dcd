#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>

#include "eovsim/types.hpp"

namespace eovsim {

struct StateEntry {
  std::string value;
  Version version;
};

// Versioned world state plus MVCC block commit. This is the ground truth the
// endorsement-time conflict cache tries to predict early: whatever the cache
// says, the version check here has the final word.
class WorldState {
 public:
  using PolicyCheck = std::function<bool(const EndorsedTransaction&)>;

  std::optional<StateEntry> read(const std::string& key) const;

  std::int64_t height() const { return height_; }

  // Validates and applies one block. Per transaction, in block order: syntax,
  // then the supplied policy predicate, then the MVCC read-set version check.
  // Valid transactions apply their writes immediately, so a later transaction
  // in the same block sees earlier intra-block writes (and conflicts on them).
  // Throws if block.number != height(); state is untouched in that case.
  ValidationFlags commit_block(const Block& block, const PolicyCheck& policy_ok);

  const std::unordered_map<std::string, StateEntry>& entries() const {
    return entries_;
  }

  // Canonical serialization (keys sorted) for replica-identity checks.
  std::string fingerprint() const;

 private:
  std::unordered_map<std::string, StateEntry> entries_;
  std::int64_t height_ = 0;
};

// Structural well-formedness: non-empty id, no duplicate keys within either
// set, no empty key names. Stands in for the real syntax/VSCC plumbing.
bool well_formed(const EndorsedTransaction& tx);

}  // namespace eovsim
