#include "eovsim/verify.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

namespace eovsim {

namespace {

// Deliberately re-derived here (not shared with the ledger): the audit is
// only worth something if it cannot inherit the engine's bugs.
struct ReplayEntry {
  std::string value;
  Version version;
};

using ReplayState = std::map<std::string, ReplayEntry>;

bool replay_well_formed(const EndorsedTransaction& tx) {
  if (tx.tx_id.empty()) return false;
  std::set<std::string> keys;
  for (const auto& r : tx.read_set)
    if (r.key.empty() || !keys.insert(r.key).second) return false;
  keys.clear();
  for (const auto& w : tx.write_set)
    if (w.key.empty() || !keys.insert(w.key).second) return false;
  return true;
}

TxStatus replay_validate(const ReplayState& state,
                         const EndorsedTransaction& tx,
                         const EndorsementPolicy& policy) {
  if (!replay_well_formed(tx)) return TxStatus::SyntaxFailure;
  std::multiset<std::string> orgs;
  for (const auto& e : tx.endorsements) orgs.insert(e.org_id);
  if (!is_satisfied(policy, orgs)) return TxStatus::PolicyFailure;
  for (const auto& r : tx.read_set) {
    auto it = state.find(r.key);
    std::optional<Version> current;
    if (it != state.end()) current = it->second.version;
    if (current != r.version) return TxStatus::MvccConflict;
  }
  return TxStatus::Valid;
}

std::string replay_fingerprint(const ReplayState& state, std::int64_t height) {
  std::ostringstream out;
  out << "h=" << height << ';';
  for (const auto& [key, entry] : state) {
    out << key << '=' << entry.value << '@' << entry.version.block_height
        << '.' << entry.version.tx_index << ';';
  }
  return out.str();
}

}  // namespace

SafetyReport verify_run(const EndorsementPolicy& policy,
                        const std::vector<LoggedBlock>& log,
                        const std::vector<Event>& events,
                        const std::vector<const WorldState*>& replicas) {
  SafetyReport report;
  auto fail = [&](bool& flag, const std::string& message) {
    flag = false;
    if (report.detail.empty()) report.detail = message;
  };

  // --- serial replay of the block log -------------------------------------
  ReplayState state;
  std::set<std::string> block_tx_ids;
  for (std::size_t b = 0; b < log.size(); ++b) {
    const auto& logged = log[b];
    if (logged.block.number != static_cast<std::int64_t>(b)) {
      fail(report.replay_ok,
           "block numbering gap at log index " + std::to_string(b));
      break;
    }
    if (logged.flags.size() != logged.block.transactions.size()) {
      fail(report.replay_ok,
           "flag count mismatch in block " + std::to_string(b));
      break;
    }
    for (std::size_t i = 0; i < logged.block.transactions.size(); ++i) {
      const auto& tx = logged.block.transactions[i];
      if (!block_tx_ids.insert(tx.tx_id).second)
        fail(report.accounting_ok, "tx " + tx.tx_id + " appears twice in the log");
      const TxStatus derived = replay_validate(state, tx, policy);
      if (derived != logged.flags[i]) {
        if (logged.flags[i] == TxStatus::Valid &&
            derived == TxStatus::MvccConflict)
          ++report.stale_commits;
        fail(report.replay_ok, "block " + std::to_string(b) + " tx " +
                                   tx.tx_id + " recorded " +
                                   to_string(logged.flags[i]) + " but replays " +
                                   to_string(derived));
      }
      // the recorded verdict drives the applied state: the replay must track
      // what the network actually did to judge later blocks fairly
      if (logged.flags[i] == TxStatus::Valid) {
        for (const auto& w : tx.write_set)
          state[w.key] = ReplayEntry{
              w.value,
              Version{logged.block.number, static_cast<std::int32_t>(i)}};
      }
    }
  }

  // --- replica convergence -------------------------------------------------
  const std::string expected =
      replay_fingerprint(state, static_cast<std::int64_t>(log.size()));
  for (const auto* replica : replicas) {
    if (replica->fingerprint() != expected) {
      fail(report.convergence_ok, "replica state diverges from the replay");
      break;
    }
  }

  // --- exactly-once accounting over the event stream -----------------------
  std::unordered_map<std::string, int> submitted;
  std::unordered_map<std::string, int> terminal;
  std::unordered_map<std::string, int> ordered;
  for (const auto& e : events) {
    if (e.kind == EventKind::Submitted) ++submitted[e.tx_id];
    if (e.kind == EventKind::Ordered) ++ordered[e.tx_id];
    if (is_terminal(e)) ++terminal[e.tx_id];
  }
  for (const auto& [tx_id, count] : submitted) {
    if (count != 1)
      fail(report.accounting_ok, "tx " + tx_id + " submitted " +
                                     std::to_string(count) + " times");
    auto it = terminal.find(tx_id);
    const int terminals = it == terminal.end() ? 0 : it->second;
    if (terminals == 0) {
      ++report.stuck;
    } else if (terminals != 1) {
      fail(report.accounting_ok, "tx " + tx_id + " has " +
                                     std::to_string(terminals) +
                                     " terminal events");
    }
  }
  for (const auto& [tx_id, count] : terminal) {
    if (!submitted.count(tx_id))
      fail(report.accounting_ok, "tx " + tx_id + " terminal without submission");
    (void)count;
  }
  for (const auto& [tx_id, count] : ordered) {
    if (count != 1)
      fail(report.accounting_ok,
           "tx " + tx_id + " ordered " + std::to_string(count) + " times");
    if (!block_tx_ids.count(tx_id))
      fail(report.accounting_ok, "tx " + tx_id + " ordered but in no block");
  }
  if (report.stuck > 0 && report.detail.empty())
    report.detail = std::to_string(report.stuck) + " transactions never terminated";

  return report;
}

// ---------------------------------------------------------------------------

FpReport counterfactual_fp(const std::vector<LoggedBlock>& log,
                           const std::vector<Event>& events) {
  FpReport report;

  std::unordered_map<std::string, std::size_t> ordered_pos;
  for (std::size_t i = 0; i < events.size(); ++i)
    if (events[i].kind == EventKind::Ordered) ordered_pos[events[i].tx_id] = i;

  struct Abort {
    std::size_t pos = 0;  // position of the terminal event in the stream
    Nanos t = 0;
    const std::vector<ReadItem>* reads = nullptr;
  };
  std::vector<Abort> aborts;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.kind == EventKind::EmvccRejected && is_terminal(e))
      aborts.push_back({i, e.t, &e.read_set});
  }
  report.emvcc_aborts = static_cast<std::int64_t>(aborts.size());
  if (aborts.empty()) return report;

  // warmup blocks (no ordered transactions) are never insertion candidates
  std::size_t first_candidate = log.size();
  for (std::size_t b = 0; b < log.size(); ++b) {
    for (const auto& tx : log[b].block.transactions) {
      if (ordered_pos.count(tx.tx_id)) {
        first_candidate = b;
        break;
      }
    }
    if (first_candidate != log.size()) break;
  }

  std::sort(aborts.begin(), aborts.end(), [](const Abort& a, const Abort& b) {
    return a.t != b.t ? a.t < b.t : a.pos < b.pos;
  });

  // cut times are non-decreasing, so one forward pass applies each block once
  ReplayState base;
  std::size_t applied = 0;
  auto apply_block = [&](const LoggedBlock& logged) {
    for (std::size_t i = 0; i < logged.block.transactions.size(); ++i) {
      if (logged.flags[i] != TxStatus::Valid) continue;
      for (const auto& w : logged.block.transactions[i].write_set)
        base[w.key] = ReplayEntry{
            w.value, Version{logged.block.number, static_cast<std::int32_t>(i)}};
    }
  };

  for (const auto& abort : aborts) {
    std::size_t insertion = std::max(first_candidate, applied);
    while (insertion < log.size() && log[insertion].block.cut_time < abort.t)
      ++insertion;
    while (applied < insertion) apply_block(log[applied++]);

    // writes of valid transactions that were ordered before this abort and
    // land in the insertion block itself
    std::map<std::string, std::optional<Version>> overlay;
    if (insertion < log.size()) {
      const auto& logged = log[insertion];
      for (std::size_t i = 0; i < logged.block.transactions.size(); ++i) {
        if (logged.flags[i] != TxStatus::Valid) continue;
        const auto& tx = logged.block.transactions[i];
        auto it = ordered_pos.find(tx.tx_id);
        if (it == ordered_pos.end() || it->second > abort.pos) continue;
        for (const auto& w : tx.write_set)
          overlay[w.key] =
              Version{logged.block.number, static_cast<std::int32_t>(i)};
      }
    }

    bool still_current = true;
    for (const auto& r : *abort.reads) {
      std::optional<Version> current;
      auto ov = overlay.find(r.key);
      if (ov != overlay.end()) {
        current = ov->second;
      } else {
        auto it = base.find(r.key);
        if (it != base.end()) current = it->second.version;
      }
      if (current != r.version) {
        still_current = false;
        break;
      }
    }
    if (still_current) ++report.false_positives;
  }
  return report;
}

}  // namespace eovsim
