#pragma once

#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "eovsim/clock.hpp"
#include "eovsim/types.hpp"

namespace eovsim {

struct OrdererConfig {
  std::size_t batch_size = 500;
  Nanos batch_timeout = 2 * kSecond;
};

// Single logical sequencer: collects endorsed transactions in arrival order
// and cuts a block when the batch fills or the timeout (measured from the
// first transaction of an empty batch) expires. Cut blocks are handed to the
// deliver callback in consecutive order under the same lock, so delivery
// order is the cut order.
class Orderer {
 public:
  using DeliverFn = std::function<void(Block&&)>;

  Orderer(OrdererConfig config, const Clock* clock, DeliverFn deliver,
          std::int64_t first_block_number = 0);

  // False (and no effect) for a duplicate tx_id. Cuts inline when the batch
  // reaches batch_size.
  bool submit(EndorsedTransaction tx);

  // Cuts the pending batch unconditionally; throws when it is empty.
  Block cut_block(CutReason reason);

  // Timeout check used by the engines; cuts when a deadline has passed.
  void on_timeout(Nanos now);

  // Deadline of the pending batch, if any.
  std::optional<Nanos> timeout_deadline() const;

  std::size_t pending() const;
  std::int64_t next_block_number() const;

 private:
  Block cut_locked(CutReason reason);

  OrdererConfig config_;
  const Clock* clock_;
  DeliverFn deliver_;

  mutable std::mutex mu_;
  std::vector<EndorsedTransaction> batch_;
  std::optional<Nanos> batch_started_;
  std::unordered_set<std::string> seen_ids_;
  std::int64_t next_number_;
};

}  // namespace eovsim
