#include "eovsim/ordering.hpp"

#include <stdexcept>
#include <utility>

namespace eovsim {

Orderer::Orderer(OrdererConfig config, const Clock* clock, DeliverFn deliver,
                 std::int64_t first_block_number)
    : config_(std::move(config)),
      clock_(clock),
      deliver_(std::move(deliver)),
      next_number_(first_block_number) {
  if (config_.batch_size < 1)
    throw std::invalid_argument("batch_size must be >= 1");
  if (config_.batch_timeout <= 0)
    throw std::invalid_argument("batch_timeout must be positive");
}

bool Orderer::submit(EndorsedTransaction tx) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!seen_ids_.insert(tx.tx_id).second) return false;
  if (batch_.empty()) batch_started_ = clock_->now();
  batch_.push_back(std::move(tx));
  if (batch_.size() >= config_.batch_size) {
    Block block = cut_locked(CutReason::SizeReached);
    deliver_(std::move(block));
  }
  return true;
}

Block Orderer::cut_locked(CutReason reason) {
  Block block;
  block.number = next_number_++;
  block.transactions = std::move(batch_);
  block.cut_reason = reason;
  block.cut_time = clock_->now();
  batch_.clear();
  batch_started_.reset();
  return block;
}

Block Orderer::cut_block(CutReason reason) {
  std::lock_guard<std::mutex> lock(mu_);
  if (batch_.empty()) throw std::logic_error("cutting an empty batch");
  Block block = cut_locked(reason);
  Block copy = block;  // the caller inspects it; peers get the original
  deliver_(std::move(block));
  return copy;
}

void Orderer::on_timeout(Nanos now) {
  std::lock_guard<std::mutex> lock(mu_);
  if (batch_.empty() || !batch_started_) return;
  if (now - *batch_started_ < config_.batch_timeout) return;
  Block block = cut_locked(CutReason::TimeoutExpired);
  deliver_(std::move(block));
}

std::optional<Nanos> Orderer::timeout_deadline() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (!batch_started_) return std::nullopt;
  return *batch_started_ + config_.batch_timeout;
}

std::size_t Orderer::pending() const {
  std::lock_guard<std::mutex> lock(mu_);
  return batch_.size();
}

std::int64_t Orderer::next_block_number() const {
  std::lock_guard<std::mutex> lock(mu_);
  return next_number_;
}

}  // namespace eovsim
