#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "eovsim/types.hpp"

namespace eovsim {

// Verdict of a cache probe. ConflictDetected names the first read key (in
// argument order) held by a pending transaction, and the lexicographically
// smallest holder of that key, so every implementation reports identically.
struct CacheDecision {
  enum class Kind { Reserved, ConflictDetected };

  Kind kind = Kind::Reserved;
  std::string conflicting_key;
  std::string blocking_tx;

  bool reserved() const { return kind == Kind::Reserved; }

  static CacheDecision ok() { return {}; }
  static CacheDecision conflict(std::string key, std::string tx) {
    return {Kind::ConflictDetected, std::move(key), std::move(tx)};
  }
};

// Monotonic operation counters; snapshots are approximate while workers are
// still running.
struct CacheCounters {
  std::uint64_t probes = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t reservations = 0;
  std::uint64_t releases = 0;
  std::uint64_t evictions = 0;
  std::uint64_t live_entries = 0;

  CacheCounters& operator+=(const CacheCounters& other) {
    probes += other.probes;
    conflicts += other.conflicts;
    reservations += other.reservations;
    releases += other.releases;
    evictions += other.evictions;
    live_entries += other.live_entries;
    return *this;
  }
};

// Reserving a tx_id that is already live is a caller bug, not a conflict.
struct DuplicateReservation : std::logic_error {
  explicit DuplicateReservation(const std::string& tx_id)
      : std::logic_error("duplicate reservation for " + tx_id) {}
};

// Per-peer cache of pending write keys, probed with the read keys of every
// incoming endorsement between chaincode execution and the response.
class PendingWriteCache {
 public:
  virtual ~PendingWriteCache() = default;

  // Atomically: if any read key is held by a live entry, report the conflict
  // and insert nothing; otherwise make (tx_id, write_keys) live. A transaction
  // never conflicts with itself. Throws DuplicateReservation when tx_id is
  // already live.
  virtual CacheDecision check_and_reserve(
      const std::string& tx_id, const std::vector<std::string>& read_keys,
      const std::vector<std::string>& write_keys, Nanos now) = 0;

  // Removes tx_id if live; false when unknown (idempotent).
  virtual bool release(const std::string& tx_id) = 0;

  // Removes live entries older than ttl; returns how many.
  virtual std::size_t evict_expired(Nanos ttl, Nanos now) = 0;

  virtual CacheCounters counters() const = 0;
  virtual const char* name() const = 0;
};

enum class CacheVariant { Baseline, MutexLock, LockFree, SyncMap };

CacheVariant parse_cache_variant(const std::string& text);
const char* to_string(CacheVariant variant);

struct CacheOptions {
  // LockFree: buffered mutations are applied to the main map in batches of
  // this size.
  std::size_t lockfree_batch = 64;
};

// Baseline (detection off) yields nullptr.
std::unique_ptr<PendingWriteCache> make_cache(CacheVariant variant,
                                              const CacheOptions& options = {});

}  // namespace eovsim
