#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eovsim/events.hpp"
#include "eovsim/ledger.hpp"
#include "eovsim/policy.hpp"

namespace eovsim {

// Outcome of the post-run safety audit. Everything here is computed from the
// block log and event stream by independent code paths, not by the engine
// that produced them.
struct SafetyReport {
  bool replay_ok = true;       // recorded flags match a serial replay
  bool convergence_ok = true;  // all replicas (and the replay) agree
  bool accounting_ok = true;   // every submitted tx terminal exactly once
  std::int64_t stale_commits = 0;  // committed txs the replay rejects
  std::int64_t stuck = 0;          // submitted txs that never terminated
  std::string detail;              // first failure, for diagnostics

  bool ok() const {
    return replay_ok && convergence_ok && accounting_ok && stale_commits == 0 &&
           stuck == 0;
  }
};

// Replays the block log against a fresh state, checks recorded validation
// flags, replica agreement, and exactly-once accounting over the events.
SafetyReport verify_run(const EndorsementPolicy& policy,
                        const std::vector<LoggedBlock>& log,
                        const std::vector<Event>& events,
                        const std::vector<const WorldState*>& replicas);

struct FpReport {
  std::int64_t emvcc_aborts = 0;
  std::int64_t false_positives = 0;  // aborts that would have committed
};

// Counterfactual check of every early-aborted transaction: had it not been
// rejected, it would have entered the first block cut at or after its
// rejection, behind the transactions ordered before it. The abort was a false
// positive when its recorded read versions are still current at that point
// (prior blocks fully applied, plus the valid earlier-ordered writes of the
// insertion block).
FpReport counterfactual_fp(const std::vector<LoggedBlock>& log,
                           const std::vector<Event>& events);

}  // namespace eovsim
