#include "eovsim/ledger.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace eovsim {

std::optional<StateEntry> WorldState::read(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool well_formed(const EndorsedTransaction& tx) {
  if (tx.tx_id.empty()) return false;
  std::unordered_set<std::string> seen;
  for (const auto& r : tx.read_set) {
    if (r.key.empty() || !seen.insert(r.key).second) return false;
  }
  seen.clear();
  for (const auto& w : tx.write_set) {
    if (w.key.empty() || !seen.insert(w.key).second) return false;
  }
  return true;
}

ValidationFlags WorldState::commit_block(const Block& block,
                                         const PolicyCheck& policy_ok) {
  if (block.number != height_) {
    std::ostringstream msg;
    msg << "block " << block.number << " delivered at height " << height_;
    throw std::invalid_argument(msg.str());
  }

  ValidationFlags flags;
  flags.reserve(block.transactions.size());
  std::int32_t index = 0;
  for (const auto& tx : block.transactions) {
    TxStatus status = TxStatus::Valid;
    if (!well_formed(tx)) {
      status = TxStatus::SyntaxFailure;
    } else if (!policy_ok(tx)) {
      status = TxStatus::PolicyFailure;
    } else {
      for (const auto& r : tx.read_set) {
        auto current = read(r.key);
        std::optional<Version> current_version;
        if (current) current_version = current->version;
        if (current_version != r.version) {
          status = TxStatus::MvccConflict;
          break;
        }
      }
    }
    if (status == TxStatus::Valid) {
      for (const auto& w : tx.write_set)
        entries_[w.key] = StateEntry{w.value, Version{block.number, index}};
    }
    flags.push_back(status);
    ++index;
  }
  ++height_;
  return flags;
}

std::string WorldState::fingerprint() const {
  // std::map gives the sorted order; the result is identical iff the states are.
  std::map<std::string, const StateEntry*> sorted;
  for (const auto& [key, entry] : entries_) sorted.emplace(key, &entry);
  std::ostringstream out;
  out << "h=" << height_ << ';';
  for (const auto& [key, entry] : sorted) {
    out << key << '=' << entry->value << '@' << entry->version.block_height
        << '.' << entry->version.tx_index << ';';
  }
  return out.str();
}

}  // namespace eovsim
