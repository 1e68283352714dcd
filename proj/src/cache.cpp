#include "eovsim/cache.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

namespace eovsim {

namespace {

struct Entry {
  std::vector<std::string> write_keys;
  Nanos inserted_at = 0;
};

using LiveMap = std::unordered_map<std::string, Entry>;
// key -> ids of pending writers; std::set keeps the smallest id at begin()
using WriterIndex = std::unordered_map<std::string, std::set<std::string>>;

void index_insert(WriterIndex& writers, const std::string& tx_id,
                  const std::vector<std::string>& write_keys) {
  for (const auto& key : write_keys) writers[key].insert(tx_id);
}

void index_erase(WriterIndex& writers, const std::string& tx_id,
                 const std::vector<std::string>& write_keys) {
  for (const auto& key : write_keys) {
    auto it = writers.find(key);
    if (it == writers.end()) continue;
    it->second.erase(tx_id);
    if (it->second.empty()) writers.erase(it);
  }
}

// ---------------------------------------------------------------------------
// MutexLock: one exclusive lock around the whole map; the probe's check and
// insert happen in a single critical section.
// ---------------------------------------------------------------------------

class MutexLockCache final : public PendingWriteCache {
 public:
  CacheDecision check_and_reserve(const std::string& tx_id,
                                  const std::vector<std::string>& read_keys,
                                  const std::vector<std::string>& write_keys,
                                  Nanos now) override {
    std::lock_guard<std::mutex> lock(mu_);
    ++counters_.probes;
    if (live_.count(tx_id)) throw DuplicateReservation(tx_id);
    for (const auto& key : read_keys) {
      auto it = writers_.find(key);
      if (it != writers_.end() && !it->second.empty()) {
        ++counters_.conflicts;
        return CacheDecision::conflict(key, *it->second.begin());
      }
    }
    if (!write_keys.empty()) {
      live_.emplace(tx_id, Entry{write_keys, now});
      index_insert(writers_, tx_id, write_keys);
      ++counters_.reservations;
    }
    return CacheDecision::ok();
  }

  bool release(const std::string& tx_id) override {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = live_.find(tx_id);
    if (it == live_.end()) return false;
    index_erase(writers_, tx_id, it->second.write_keys);
    live_.erase(it);
    ++counters_.releases;
    return true;
  }

  std::size_t evict_expired(Nanos ttl, Nanos now) override {
    std::lock_guard<std::mutex> lock(mu_);
    std::size_t removed = 0;
    for (auto it = live_.begin(); it != live_.end();) {
      if (now - it->second.inserted_at > ttl) {
        index_erase(writers_, it->first, it->second.write_keys);
        it = live_.erase(it);
        ++removed;
      } else {
        ++it;
      }
    }
    counters_.evictions += removed;
    return removed;
  }

  CacheCounters counters() const override {
    std::lock_guard<std::mutex> lock(mu_);
    CacheCounters out = counters_;
    out.live_entries = live_.size();
    return out;
  }

  const char* name() const override { return "mutex"; }

 private:
  mutable std::mutex mu_;
  LiveMap live_;
  WriterIndex writers_;
  CacheCounters counters_;
};

// ---------------------------------------------------------------------------
// LockFree: mutations (inserts and releases) go into a fixed-size slot buffer
// claimed with a fetch_add, and are applied to the main map in one batch once
// the buffer fills. Probes take only the shared side of the map lock and scan
// the unapplied slots as well, so a single worker sees exactly the MutexLock
// semantics; concurrent probes may miss a mutation that is mid-append.
// ---------------------------------------------------------------------------

class LockFreeCache final : public PendingWriteCache {
 public:
  explicit LockFreeCache(std::size_t batch)
      : capacity_(batch < 1 ? 1 : batch),
        slots_(std::make_unique<Slot[]>(capacity_)) {}

  CacheDecision check_and_reserve(const std::string& tx_id,
                                  const std::vector<std::string>& read_keys,
                                  const std::vector<std::string>& write_keys,
                                  Nanos now) override {
    probes_.fetch_add(1, std::memory_order_relaxed);
    {
      std::shared_lock<std::shared_mutex> lock(map_mu_);
      if (effective_live(tx_id)) throw DuplicateReservation(tx_id);
      for (const auto& key : read_keys) {
        auto holders = effective_writers(key);
        if (!holders.empty()) {
          conflicts_.fetch_add(1, std::memory_order_relaxed);
          return CacheDecision::conflict(key, *holders.begin());
        }
      }
    }
    if (!write_keys.empty()) {
      append(Mutation{true, tx_id, write_keys, now});
      reservations_.fetch_add(1, std::memory_order_relaxed);
    }
    return CacheDecision::ok();
  }

  bool release(const std::string& tx_id) override {
    {
      std::shared_lock<std::shared_mutex> lock(map_mu_);
      if (!effective_live(tx_id)) return false;
    }
    append(Mutation{false, tx_id, {}, 0});
    releases_.fetch_add(1, std::memory_order_relaxed);
    return true;
  }

  std::size_t evict_expired(Nanos ttl, Nanos now) override {
    apply_batch(/*only_if_full=*/false);
    std::unique_lock<std::shared_mutex> lock(map_mu_);
    std::size_t removed = 0;
    for (auto it = live_.begin(); it != live_.end();) {
      if (now - it->second.inserted_at > ttl) {
        index_erase(writers_, it->first, it->second.write_keys);
        it = live_.erase(it);
        ++removed;
      } else {
        ++it;
      }
    }
    evictions_.fetch_add(removed, std::memory_order_relaxed);
    return removed;
  }

  CacheCounters counters() const override {
    CacheCounters out;
    out.probes = probes_.load(std::memory_order_relaxed);
    out.conflicts = conflicts_.load(std::memory_order_relaxed);
    out.reservations = reservations_.load(std::memory_order_relaxed);
    out.releases = releases_.load(std::memory_order_relaxed);
    out.evictions = evictions_.load(std::memory_order_relaxed);
    std::shared_lock<std::shared_mutex> lock(map_mu_);
    std::int64_t live = static_cast<std::int64_t>(live_.size());
    scan_buffer([&](const Mutation& m) {
      if (m.insert) {
        ++live;
      } else if (live > 0) {
        --live;
      }
    });
    out.live_entries = static_cast<std::uint64_t>(live < 0 ? 0 : live);
    return out;
  }

  const char* name() const override { return "lockfree"; }

 private:
  struct Mutation {
    bool insert = true;
    std::string tx_id;
    std::vector<std::string> write_keys;
    Nanos at = 0;
  };

  struct Slot {
    std::atomic<bool> ready{false};
    Mutation op;
  };

  static constexpr std::size_t kFrozen = static_cast<std::size_t>(-1) / 2;

  void append(Mutation op) {
    for (;;) {
      std::uint64_t generation = gen_.load(std::memory_order_acquire);
      std::size_t i = claimed_.fetch_add(1, std::memory_order_acq_rel);
      if (i < capacity_) {
        slots_[i].op = std::move(op);
        slots_[i].ready.store(true, std::memory_order_release);
        if (i + 1 == capacity_) apply_batch(/*only_if_full=*/true);
        return;
      }
      // buffer full or mid-apply; wait out this generation
      while (gen_.load(std::memory_order_acquire) == generation)
        std::this_thread::yield();
    }
  }

  void apply_batch(bool only_if_full) {
    std::lock_guard<std::mutex> apply_lock(apply_mu_);
    std::size_t claimed = claimed_.load(std::memory_order_acquire);
    if (claimed == 0 || claimed >= kFrozen) return;
    if (only_if_full && claimed < capacity_) return;  // already consumed
    claimed = claimed_.exchange(kFrozen, std::memory_order_acq_rel);
    std::size_t count = std::min(claimed, capacity_);
    for (std::size_t i = 0; i < count; ++i)
      while (!slots_[i].ready.load(std::memory_order_acquire))
        std::this_thread::yield();
    {
      std::unique_lock<std::shared_mutex> lock(map_mu_);
      for (std::size_t i = 0; i < count; ++i) {
        Mutation& m = slots_[i].op;
        if (m.insert) {
          auto [it, inserted] =
              live_.emplace(m.tx_id, Entry{std::move(m.write_keys), m.at});
          if (inserted) index_insert(writers_, m.tx_id, it->second.write_keys);
        } else {
          auto it = live_.find(m.tx_id);
          if (it != live_.end()) {
            index_erase(writers_, m.tx_id, it->second.write_keys);
            live_.erase(it);
          }
        }
        slots_[i].op = Mutation{};
      }
      for (std::size_t i = 0; i < count; ++i)
        slots_[i].ready.store(false, std::memory_order_relaxed);
      claimed_.store(0, std::memory_order_release);
    }
    gen_.fetch_add(1, std::memory_order_release);
  }

  // Walks the ready prefix of the buffer in append order. Callers hold
  // map_mu_ in at least shared mode.
  template <typename Fn>
  void scan_buffer(Fn&& fn) const {
    std::size_t claimed = claimed_.load(std::memory_order_acquire);
    std::size_t count = std::min(claimed, capacity_);
    for (std::size_t i = 0; i < count; ++i) {
      if (!slots_[i].ready.load(std::memory_order_acquire)) continue;
      fn(slots_[i].op);
    }
  }

  // main map overlaid with the unapplied mutations, in order
  std::set<std::string> effective_writers(const std::string& key) const {
    std::set<std::string> holders;
    auto it = writers_.find(key);
    if (it != writers_.end()) holders = it->second;
    scan_buffer([&](const Mutation& m) {
      if (m.insert) {
        if (std::find(m.write_keys.begin(), m.write_keys.end(), key) !=
            m.write_keys.end())
          holders.insert(m.tx_id);
      } else {
        holders.erase(m.tx_id);
      }
    });
    return holders;
  }

  bool effective_live(const std::string& tx_id) const {
    bool live = live_.count(tx_id) > 0;
    scan_buffer([&](const Mutation& m) {
      if (m.tx_id == tx_id) live = m.insert;
    });
    return live;
  }

  const std::size_t capacity_;
  std::unique_ptr<Slot[]> slots_;
  std::atomic<std::size_t> claimed_{0};
  std::atomic<std::uint64_t> gen_{0};
  std::mutex apply_mu_;

  mutable std::shared_mutex map_mu_;
  LiveMap live_;
  WriterIndex writers_;

  std::atomic<std::uint64_t> probes_{0}, conflicts_{0}, reservations_{0},
      releases_{0}, evictions_{0};
};

// ---------------------------------------------------------------------------
// SyncMap: an immutable snapshot serves probes without any lock while the
// dirty overlay is empty; mutations collect in the locked overlay and are
// promoted into a fresh snapshot once overlay lookups outnumber the overlay.
// Mirror of Go's sync.Map read/dirty split.
// ---------------------------------------------------------------------------

class SyncMapCache final : public PendingWriteCache {
 public:
  SyncMapCache() : snapshot_(std::make_shared<const Snapshot>()) {}

  CacheDecision check_and_reserve(const std::string& tx_id,
                                  const std::vector<std::string>& read_keys,
                                  const std::vector<std::string>& write_keys,
                                  Nanos now) override {
    probes_.fetch_add(1, std::memory_order_relaxed);
    if (overlay_size_.load(std::memory_order_acquire) == 0) {
      // fast path: decide from the snapshot alone
      auto snap = std::atomic_load(&snapshot_);
      if (snap->live.count(tx_id)) throw DuplicateReservation(tx_id);
      for (const auto& key : read_keys) {
        auto it = snap->writers.find(key);
        if (it != snap->writers.end() && !it->second.empty()) {
          conflicts_.fetch_add(1, std::memory_order_relaxed);
          return CacheDecision::conflict(key, *it->second.begin());
        }
      }
      // no conflict seen; fall through to reserve under the overlay lock,
      // re-checking there (another writer may have slipped in)
    }
    std::lock_guard<std::mutex> lock(mu_);
    auto snap = std::atomic_load(&snapshot_);
    if (merged_live(*snap, tx_id)) throw DuplicateReservation(tx_id);
    for (const auto& key : read_keys) {
      ++lookups_;
      auto holders = merged_writers(*snap, key);
      if (!holders.empty()) {
        conflicts_.fetch_add(1, std::memory_order_relaxed);
        maybe_promote_locked(*snap);
        return CacheDecision::conflict(key, *holders.begin());
      }
    }
    if (!write_keys.empty()) {
      OverlayRec rec;
      rec.tombstone = false;
      rec.entry = Entry{write_keys, now};
      for (const auto& key : write_keys) owriters_[key].added.insert(tx_id);
      orecs_[tx_id] = std::move(rec);
      overlay_size_.store(orecs_.size(), std::memory_order_release);
      reservations_.fetch_add(1, std::memory_order_relaxed);
    }
    maybe_promote_locked(*snap);
    return CacheDecision::ok();
  }

  bool release(const std::string& tx_id) override {
    std::lock_guard<std::mutex> lock(mu_);
    auto snap = std::atomic_load(&snapshot_);
    if (!merged_live(*snap, tx_id)) return false;
    release_locked(*snap, tx_id);
    overlay_size_.store(orecs_.size(), std::memory_order_release);
    releases_.fetch_add(1, std::memory_order_relaxed);
    return true;
  }

  std::size_t evict_expired(Nanos ttl, Nanos now) override {
    std::lock_guard<std::mutex> lock(mu_);
    auto snap = std::atomic_load(&snapshot_);
    std::vector<std::string> expired;
    for (const auto& [tx_id, entry] : snap->live) {
      if (orecs_.count(tx_id)) continue;  // overlay rec is authoritative
      if (now - entry.inserted_at > ttl) expired.push_back(tx_id);
    }
    for (const auto& [tx_id, rec] : orecs_) {
      if (!rec.tombstone && now - rec.entry.inserted_at > ttl)
        expired.push_back(tx_id);
    }
    for (const auto& tx_id : expired) release_locked(*snap, tx_id);
    overlay_size_.store(orecs_.size(), std::memory_order_release);
    evictions_.fetch_add(expired.size(), std::memory_order_relaxed);
    return expired.size();
  }

  CacheCounters counters() const override {
    CacheCounters out;
    out.probes = probes_.load(std::memory_order_relaxed);
    out.conflicts = conflicts_.load(std::memory_order_relaxed);
    out.reservations = reservations_.load(std::memory_order_relaxed);
    out.releases = releases_.load(std::memory_order_relaxed);
    out.evictions = evictions_.load(std::memory_order_relaxed);
    std::lock_guard<std::mutex> lock(mu_);
    auto snap = std::atomic_load(&snapshot_);
    std::int64_t live = static_cast<std::int64_t>(snap->live.size());
    for (const auto& [tx_id, rec] : orecs_) {
      if (rec.tombstone) {
        --live;
      } else {
        ++live;
      }
    }
    out.live_entries = static_cast<std::uint64_t>(live < 0 ? 0 : live);
    return out;
  }

  const char* name() const override { return "syncmap"; }

 private:
  struct Snapshot {
    LiveMap live;
    WriterIndex writers;
  };

  struct OverlayRec {
    bool tombstone = false;
    Entry entry;
  };

  struct OverlayWriters {
    std::set<std::string> added;
    std::set<std::string> removed;
  };

  std::set<std::string> merged_writers(const Snapshot& snap,
                                       const std::string& key) const {
    std::set<std::string> holders;
    auto it = snap.writers.find(key);
    if (it != snap.writers.end()) holders = it->second;
    auto ow = owriters_.find(key);
    if (ow != owriters_.end()) {
      for (const auto& tx : ow->second.removed) holders.erase(tx);
      for (const auto& tx : ow->second.added) holders.insert(tx);
    }
    return holders;
  }

  bool merged_live(const Snapshot& snap, const std::string& tx_id) const {
    auto rec = orecs_.find(tx_id);
    if (rec != orecs_.end()) return !rec->second.tombstone;
    return snap.live.count(tx_id) > 0;
  }

  // caller holds mu_ and has checked merged_live
  void release_locked(const Snapshot& snap, const std::string& tx_id) {
    auto rec = orecs_.find(tx_id);
    if (rec != orecs_.end() && !rec->second.tombstone) {
      for (const auto& key : rec->second.entry.write_keys) {
        auto ow = owriters_.find(key);
        if (ow != owriters_.end()) {
          ow->second.added.erase(tx_id);
          if (ow->second.added.empty() && ow->second.removed.empty())
            owriters_.erase(ow);
        }
      }
      auto it = snap.live.find(tx_id);
      if (it != snap.live.end()) {
        // the id was re-reserved over a promoted-then-released entry; keep
        // the stale snapshot entry suppressed
        rec->second.tombstone = true;
        rec->second.entry = it->second;
        for (const auto& key : it->second.write_keys)
          owriters_[key].removed.insert(tx_id);
      } else {
        orecs_.erase(rec);
      }
      return;
    }
    auto it = snap.live.find(tx_id);
    if (it != snap.live.end()) {
      OverlayRec tomb;
      tomb.tombstone = true;
      tomb.entry = it->second;
      for (const auto& key : it->second.write_keys)
        owriters_[key].removed.insert(tx_id);
      orecs_[tx_id] = std::move(tomb);
    }
  }

  // caller holds mu_
  void maybe_promote_locked(const Snapshot& snap) {
    if (orecs_.empty() || lookups_ <= orecs_.size()) return;
    auto next = std::make_shared<Snapshot>();
    next->live = snap.live;
    next->writers = snap.writers;
    for (const auto& [tx_id, rec] : orecs_) {
      if (rec.tombstone) {
        auto it = next->live.find(tx_id);
        if (it != next->live.end()) {
          index_erase(next->writers, tx_id, it->second.write_keys);
          next->live.erase(it);
        }
      } else {
        auto it = next->live.find(tx_id);
        if (it != next->live.end())
          index_erase(next->writers, tx_id, it->second.write_keys);
        next->live[tx_id] = rec.entry;
        index_insert(next->writers, tx_id, rec.entry.write_keys);
      }
    }
    std::atomic_store(&snapshot_,
                      std::shared_ptr<const Snapshot>(std::move(next)));
    orecs_.clear();
    owriters_.clear();
    overlay_size_.store(0, std::memory_order_release);
    lookups_ = 0;
  }

  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::unordered_map<std::string, OverlayRec> orecs_;
  std::unordered_map<std::string, OverlayWriters> owriters_;
  std::atomic<std::size_t> overlay_size_{0};
  std::size_t lookups_ = 0;

  std::atomic<std::uint64_t> probes_{0}, conflicts_{0}, reservations_{0},
      releases_{0}, evictions_{0};
};

}  // namespace

CacheVariant parse_cache_variant(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::tolower(c));
  if (t == "baseline" || t == "off" || t == "none") return CacheVariant::Baseline;
  if (t == "mutex" || t == "mutexlock") return CacheVariant::MutexLock;
  if (t == "lockfree" || t == "lock-free") return CacheVariant::LockFree;
  if (t == "syncmap" || t == "sync-map") return CacheVariant::SyncMap;
  throw std::invalid_argument("unknown cache variant: " + text);
}

const char* to_string(CacheVariant variant) {
  switch (variant) {
    case CacheVariant::Baseline: return "baseline";
    case CacheVariant::MutexLock: return "mutex";
    case CacheVariant::LockFree: return "lockfree";
    case CacheVariant::SyncMap: return "syncmap";
  }
  return "?";
}

std::unique_ptr<PendingWriteCache> make_cache(CacheVariant variant,
                                              const CacheOptions& options) {
  switch (variant) {
    case CacheVariant::Baseline: return nullptr;
    case CacheVariant::MutexLock: return std::make_unique<MutexLockCache>();
    case CacheVariant::LockFree:
      return std::make_unique<LockFreeCache>(options.lockfree_batch);
    case CacheVariant::SyncMap: return std::make_unique<SyncMapCache>();
  }
  return nullptr;
}

}  // namespace eovsim
