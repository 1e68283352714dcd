#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "eovsim/cache.hpp"

using namespace eovsim;

namespace {

const CacheVariant kVariants[] = {CacheVariant::MutexLock,
                                  CacheVariant::LockFree,
                                  CacheVariant::SyncMap};

std::unique_ptr<PendingWriteCache> fresh(CacheVariant v,
                                         std::size_t batch = 16) {
  CacheOptions opts;
  opts.lockfree_batch = batch;  // small batch: many applies under contention
  return make_cache(v, opts);
}

}  // namespace

TEST_CASE("parallel reserve/release on disjoint keys loses nothing") {
  const int kThreads = 8;
  const int kCycles = 1500;
  for (auto v : kVariants) {
    auto cache = fresh(v);
    std::atomic<int> failures{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < kThreads; ++w) {
      workers.emplace_back([&, w] {
        for (int i = 0; i < kCycles; ++i) {
          std::string id = "w" + std::to_string(w) + "_" + std::to_string(i);
          std::string key = "K" + std::to_string(w);  // per-thread key
          auto d = cache->check_and_reserve(id, {key}, {key}, i);
          if (!d.reserved()) {
            ++failures;  // nobody else ever writes this key
            continue;
          }
          if (!cache->release(id)) ++failures;
        }
      });
    }
    for (auto& t : workers) t.join();
    CHECK_MESSAGE(failures == 0, to_string(v));
    auto c = cache->counters();
    CHECK_MESSAGE(c.live_entries == 0, to_string(v));
    CHECK_MESSAGE(c.reservations == c.releases, to_string(v));
  }
}

TEST_CASE("mutex variant admits one holder per key at a time") {
  auto cache = fresh(CacheVariant::MutexLock);
  const int kThreads = 8;
  const int kAttempts = 2000;
  std::atomic<int> holders{0};
  std::atomic<int> overlaps{0};
  std::atomic<std::int64_t> granted{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < kThreads; ++w) {
    workers.emplace_back([&, w] {
      for (int i = 0; i < kAttempts; ++i) {
        std::string id = "t" + std::to_string(w) + "_" + std::to_string(i);
        auto d = cache->check_and_reserve(id, {"HOT"}, {"HOT"}, 0);
        if (!d.reserved()) continue;
        if (holders.fetch_add(1) != 0) ++overlaps;
        ++granted;
        holders.fetch_sub(1);
        cache->release(id);
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(overlaps == 0);
  CHECK(granted > 0);  // the lock never starved everyone out
  CHECK(cache->counters().live_entries == 0);
}

TEST_CASE("reservations stay visible until released in every variant") {
  const int kThreads = 8;
  const int kPerThread = 400;
  for (auto v : kVariants) {
    auto cache = fresh(v);
    std::atomic<int> failures{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < kThreads; ++w) {
      workers.emplace_back([&, w] {
        for (int i = 0; i < kPerThread; ++i) {
          std::string id = "w" + std::to_string(w) + "_" + std::to_string(i);
          std::string key = "K" + std::to_string(w) + "_" + std::to_string(i);
          if (!cache->check_and_reserve(id, {}, {key}, 0).reserved())
            ++failures;
        }
      });
    }
    for (auto& t : workers) t.join();
    CHECK_MESSAGE(failures == 0, to_string(v));

    // after the dust settles, every reservation must block its key
    CHECK(cache->counters().live_entries ==
          static_cast<std::uint64_t>(kThreads * kPerThread));
    for (int w = 0; w < kThreads; ++w) {
      for (int i = 0; i < kPerThread; ++i) {
        std::string id = "w" + std::to_string(w) + "_" + std::to_string(i);
        std::string key = "K" + std::to_string(w) + "_" + std::to_string(i);
        auto d = cache->check_and_reserve("probe", {key}, {}, 1);
        REQUIRE_FALSE(d.reserved());
        CHECK(d.blocking_tx == id);
        CHECK(cache->release(id));
      }
    }
    CHECK(cache->counters().live_entries == 0);
  }
}

TEST_CASE("probes never blame a transaction for a key it did not write") {
  // Writers churn their own keys while a prober hammers a mix of hot and
  // never-written keys. Any conflict must name a plausible holder; a key
  // nobody writes must never conflict.
  const int kWriters = 4;
  for (auto v : kVariants) {
    auto cache = fresh(v);
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < kWriters; ++w) {
      workers.emplace_back([&, w] {
        int i = 0;
        while (!stop.load(std::memory_order_relaxed)) {
          std::string id = "w" + std::to_string(w) + "_" + std::to_string(i++);
          std::string key = "HOT" + std::to_string(w);
          if (cache->check_and_reserve(id, {}, {key}, 0).reserved())
            cache->release(id);
        }
      });
    }
    std::thread prober([&] {
      for (int i = 0; i < 30000; ++i) {
        auto quiet = cache->check_and_reserve("q", {"COLD"}, {}, 0);
        if (!quiet.reserved()) ++bad;
        std::string hot = "HOT" + std::to_string(i % kWriters);
        auto d = cache->check_and_reserve("q", {hot}, {}, 0);
        if (!d.reserved()) {
          if (d.conflicting_key != hot) ++bad;
          // holder ids for HOTn all start with "wn_"
          std::string prefix = "w" + std::to_string(i % kWriters) + "_";
          if (d.blocking_tx.compare(0, prefix.size(), prefix) != 0) ++bad;
        }
      }
      stop = true;
    });
    prober.join();
    for (auto& t : workers) t.join();
    CHECK_MESSAGE(bad == 0, to_string(v));
  }
}

TEST_CASE("lock-free buffer applies cleanly under concurrent mutation") {
  // Tiny batch, heavy mutation traffic: counts must reconcile exactly once
  // the workers are done, whatever interleaving the buffer saw.
  auto cache = fresh(CacheVariant::LockFree, 8);
  const int kThreads = 8;
  const int kCycles = 1200;
  std::vector<std::thread> workers;
  std::atomic<int> reserve_failures{0};
  for (int w = 0; w < kThreads; ++w) {
    workers.emplace_back([&, w] {
      for (int i = 0; i < kCycles; ++i) {
        std::string id = "w" + std::to_string(w) + "_" + std::to_string(i);
        std::string key = "K" + std::to_string(w);
        if (!cache->check_and_reserve(id, {}, {key}, 0).reserved()) {
          ++reserve_failures;
          continue;
        }
        if (i % 3 != 0) cache->release(id);
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(reserve_failures == 0);
  // one final sweep releases the survivors
  std::size_t released = 0;
  for (int w = 0; w < kThreads; ++w)
    for (int i = 0; i < kCycles; ++i)
      if (cache->release("w" + std::to_string(w) + "_" + std::to_string(i)))
        ++released;
  CHECK(released == static_cast<std::size_t>(kThreads * (kCycles / 3)));
  CHECK(cache->counters().live_entries == 0);
}
