#include "eovsim/events.hpp"

#include <stdexcept>

namespace eovsim {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Submitted: return "submitted";
    case EventKind::Endorsed: return "endorsed";
    case EventKind::EmvccRejected: return "emvcc-rejected";
    case EventKind::Ordered: return "ordered";
    case EventKind::Committed: return "committed";
    case EventKind::MvccRejected: return "mvcc-rejected";
    case EventKind::PolicyRejected: return "policy-rejected";
    case EventKind::ClientAborted: return "client-aborted";
  }
  return "?";
}

EventKind event_kind_from_string(const std::string& text) {
  if (text == "submitted") return EventKind::Submitted;
  if (text == "endorsed") return EventKind::Endorsed;
  if (text == "emvcc-rejected") return EventKind::EmvccRejected;
  if (text == "ordered") return EventKind::Ordered;
  if (text == "committed") return EventKind::Committed;
  if (text == "mvcc-rejected") return EventKind::MvccRejected;
  if (text == "policy-rejected") return EventKind::PolicyRejected;
  if (text == "client-aborted") return EventKind::ClientAborted;
  throw std::invalid_argument("unknown event kind: " + text);
}

bool is_terminal(const Event& event) {
  switch (event.kind) {
    case EventKind::EmvccRejected:
      return event.peer_id.empty();  // client abort, not a per-peer response
    case EventKind::Committed:
    case EventKind::MvccRejected:
    case EventKind::PolicyRejected:
    case EventKind::ClientAborted:
      return true;
    default:
      return false;
  }
}

namespace {

ordered_json reads_to_json(const std::vector<ReadItem>& reads) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reads) {
    ordered_json item;
    item["key"] = r.key;
    if (r.version) {
      item["h"] = r.version->block_height;
      item["i"] = r.version->tx_index;
    } else {
      item["absent"] = true;
    }
    arr.push_back(std::move(item));
  }
  return arr;
}

std::vector<ReadItem> reads_from_json(const json& arr) {
  std::vector<ReadItem> reads;
  for (const auto& item : arr) {
    ReadItem r;
    r.key = item.at("key").get<std::string>();
    if (!item.value("absent", false))
      r.version = Version{item.at("h").get<std::int64_t>(),
                          item.at("i").get<std::int32_t>()};
    reads.push_back(std::move(r));
  }
  return reads;
}

}  // namespace

ordered_json event_to_json(const Event& event) {
  ordered_json j;
  j["t"] = event.t;
  j["kind"] = to_string(event.kind);
  j["tx"] = event.tx_id;
  if (!event.peer_id.empty()) j["peer"] = event.peer_id;
  if (event.block_number >= 0) j["block"] = event.block_number;
  if (!event.conflict_key.empty()) j["key"] = event.conflict_key;
  if (!event.blocking_tx.empty()) j["blocking"] = event.blocking_tx;
  if (!event.read_set.empty()) j["reads"] = reads_to_json(event.read_set);
  return j;
}

Event event_from_json(const json& j) {
  Event event;
  event.t = j.at("t").get<Nanos>();
  event.kind = event_kind_from_string(j.at("kind").get<std::string>());
  event.tx_id = j.at("tx").get<std::string>();
  event.peer_id = j.value("peer", "");
  event.block_number = j.value("block", std::int64_t{-1});
  event.conflict_key = j.value("key", "");
  event.blocking_tx = j.value("blocking", "");
  if (j.contains("reads")) event.read_set = reads_from_json(j.at("reads"));
  return event;
}

EventSink::EventSink(const std::string& jsonl_path) {
  if (!jsonl_path.empty()) {
    file_.open(jsonl_path, std::ios::trunc);
    if (!file_) throw std::runtime_error("cannot open " + jsonl_path);
    to_file_ = true;
  }
}

void EventSink::emit(Event event) {
  std::lock_guard<std::mutex> lock(mu_);
  if (to_file_) file_ << event_to_json(event).dump() << '\n';
  events_.push_back(std::move(event));
}

std::vector<Event> EventSink::take_events() {
  std::lock_guard<std::mutex> lock(mu_);
  return std::move(events_);
}

void EventSink::flush() {
  std::lock_guard<std::mutex> lock(mu_);
  if (to_file_) file_.flush();
}

ordered_json logged_block_to_json(const LoggedBlock& logged) {
  ordered_json j;
  j["number"] = logged.block.number;
  j["cut_reason"] = to_string(logged.block.cut_reason);
  j["cut_time"] = logged.block.cut_time;
  ordered_json txs = ordered_json::array();
  for (std::size_t i = 0; i < logged.block.transactions.size(); ++i) {
    const auto& tx = logged.block.transactions[i];
    ordered_json tj;
    tj["id"] = tx.tx_id;
    tj["reads"] = reads_to_json(tx.read_set);
    ordered_json writes = ordered_json::array();
    for (const auto& w : tx.write_set)
      writes.push_back({{"key", w.key}, {"value", w.value}});
    tj["writes"] = std::move(writes);
    ordered_json endorsements = ordered_json::array();
    for (const auto& e : tx.endorsements)
      endorsements.push_back({{"peer", e.peer_id}, {"org", e.org_id}});
    tj["endorsements"] = std::move(endorsements);
    tj["submit_time"] = tx.submit_time;
    tj["flag"] = to_string(logged.flags[i]);
    txs.push_back(std::move(tj));
  }
  j["txs"] = std::move(txs);
  return j;
}

namespace {

TxStatus flag_from_string(const std::string& text) {
  if (text == "valid") return TxStatus::Valid;
  if (text == "mvcc_conflict") return TxStatus::MvccConflict;
  if (text == "policy_failure") return TxStatus::PolicyFailure;
  if (text == "syntax_failure") return TxStatus::SyntaxFailure;
  throw std::invalid_argument("unknown validation flag: " + text);
}

}  // namespace

LoggedBlock logged_block_from_json(const json& j) {
  LoggedBlock logged;
  logged.block.number = j.at("number").get<std::int64_t>();
  logged.block.cut_reason = j.at("cut_reason").get<std::string>() == "size"
                                ? CutReason::SizeReached
                                : CutReason::TimeoutExpired;
  logged.block.cut_time = j.at("cut_time").get<Nanos>();
  for (const auto& tj : j.at("txs")) {
    EndorsedTransaction tx;
    tx.tx_id = tj.at("id").get<std::string>();
    tx.read_set = reads_from_json(tj.at("reads"));
    for (const auto& wj : tj.at("writes"))
      tx.write_set.push_back({wj.at("key").get<std::string>(),
                              wj.at("value").get<std::string>()});
    for (const auto& ej : tj.at("endorsements"))
      tx.endorsements.push_back({ej.at("peer").get<std::string>(),
                                 ej.at("org").get<std::string>()});
    tx.submit_time = tj.value("submit_time", Nanos{0});
    logged.block.transactions.push_back(std::move(tx));
    logged.flags.push_back(flag_from_string(tj.at("flag").get<std::string>()));
  }
  return logged;
}

void write_events_jsonl(const std::string& path,
                        const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& event : events) out << event_to_json(event).dump() << '\n';
}

std::vector<Event> read_events_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Event> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(event_from_json(json::parse(line)));
  }
  return events;
}

void write_blocks_jsonl(const std::string& path,
                        const std::vector<LoggedBlock>& blocks) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& block : blocks)
    out << logged_block_to_json(block).dump() << '\n';
}

std::vector<LoggedBlock> read_blocks_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<LoggedBlock> blocks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    blocks.push_back(logged_block_from_json(json::parse(line)));
  }
  return blocks;
}

}  // namespace eovsim
