#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eovsim/types.hpp"

namespace eovsim {

// Per-transaction lifecycle records. A transaction's chain is:
//   submitted -> {endorsed | emvcc-rejected}* per contacted peer
//             -> terminal: emvcc-rejected client abort is terminal at
//                assembly; otherwise ordered -> committed/mvcc-rejected/
//                policy-rejected at delivery; client-aborted covers
//                non-deterministic endorsement results.
enum class EventKind {
  Submitted,
  Endorsed,
  EmvccRejected,
  Ordered,
  Committed,
  MvccRejected,
  PolicyRejected,
  ClientAborted,
};

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& text);

struct Event {
  Nanos t = 0;
  EventKind kind = EventKind::Submitted;
  std::string tx_id;
  std::string peer_id;              // endorse-phase events
  std::int64_t block_number = -1;   // ordered/committed/rejected
  std::string conflict_key;         // emvcc-rejected
  std::string blocking_tx;          // emvcc-rejected
  std::vector<ReadItem> read_set;   // emvcc-rejected (counterfactual input)
};

// Terminal events end a transaction's chain exactly once. emvcc-rejected is
// terminal only in its client-abort form (no peer_id); with a peer_id it is
// the per-peer response record.
bool is_terminal(const Event& event);

nlohmann::ordered_json event_to_json(const Event& event);
Event event_from_json(const nlohmann::json& j);

// Collects events in order; optionally mirrors them to a JSONL file.
class EventSink {
 public:
  EventSink() = default;
  explicit EventSink(const std::string& jsonl_path);

  void emit(Event event);

  // Call only after all workers stopped.
  const std::vector<Event>& events() const { return events_; }
  std::vector<Event> take_events();
  void flush();

 private:
  std::mutex mu_;
  std::vector<Event> events_;
  std::ofstream file_;
  bool to_file_ = false;
};

// Block-log serialization: one block per line with transactions, their
// read/write sets, endorsements, and the agreed validation flags — enough for
// an independent replayer to re-derive every verdict.
nlohmann::ordered_json logged_block_to_json(const LoggedBlock& block);
LoggedBlock logged_block_from_json(const nlohmann::json& j);

void write_events_jsonl(const std::string& path,
                        const std::vector<Event>& events);
std::vector<Event> read_events_jsonl(const std::string& path);

void write_blocks_jsonl(const std::string& path,
                        const std::vector<LoggedBlock>& blocks);
std::vector<LoggedBlock> read_blocks_jsonl(const std::string& path);

}  // namespace eovsim
