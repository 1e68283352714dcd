#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <stdexcept>

namespace eovsim {

using Nanos = std::int64_t;

constexpr Nanos kMicrosecond = 1'000;
constexpr Nanos kMillisecond = 1'000'000;
constexpr Nanos kSecond = 1'000'000'000;

// Time source: virtual time for the deterministic engine, a monotonic wall
// clock for the concurrent one. Everything downstream takes Nanos.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Nanos now() const = 0;
};

class VirtualClock final : public Clock {
 public:
  Nanos now() const override { return now_.load(std::memory_order_relaxed); }

  void advance_to(Nanos t) {
    if (t < now_.load(std::memory_order_relaxed))
      throw std::logic_error("virtual clock moved backwards");
    now_.store(t, std::memory_order_relaxed);
  }

 private:
  std::atomic<Nanos> now_{0};
};

class WallClock final : public Clock {
 public:
  WallClock() : epoch_(std::chrono::steady_clock::now()) {}

  Nanos now() const override {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now() - epoch_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point epoch_;
};

}  // namespace eovsim
