#include "eovsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eovsim {

ZipfSampler::ZipfSampler(std::int64_t n, double s) {
  if (n < 1) throw std::invalid_argument("Zipf universe must be >= 1");
  if (s < 0) throw std::invalid_argument("Zipf s must be >= 0");
  cdf_.resize(static_cast<std::size_t>(n));
  double total = 0;
  for (std::int64_t rank = 1; rank <= n; ++rank) {
    total += 1.0 / std::pow(static_cast<double>(rank), s);
    cdf_[static_cast<std::size_t>(rank - 1)] = total;
  }
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;  // guard against rounding at the top
}

std::int64_t ZipfSampler::sample(Rng& rng) const {
  double u = rng.uniform01();
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::int64_t>(it - cdf_.begin());
}

std::string OpGenerator::key_name(std::int64_t index) {
  return "CAR" + std::to_string(index);
}

OpGenerator::OpGenerator(const WorkloadConfig& config, Rng rng)
    : config_(config),
      rng_(rng),
      zipf_(config.key_universe,
            config.mode == WorkloadMode::Zipf ? config.zipf_s : 0.0) {
  if (config_.conflict_rate < 0 || config_.conflict_rate > 1)
    throw std::invalid_argument("conflict_rate must be in [0,1]");
  if (config_.key_universe < 1)
    throw std::invalid_argument("key_universe must be >= 1");
}

std::string OpGenerator::pick_key_locked() {
  if (config_.mode == WorkloadMode::Zipf) return key_name(zipf_.sample(rng_));

  bool want_conflict = rng_.uniform01() < config_.conflict_rate;
  if (want_conflict) {
    // preferred: a registered partner that is still in flight
    while (!partner_pool_.empty()) {
      std::string key = partner_pool_.front();
      partner_pool_.pop_front();
      partner_set_.erase(key);
      auto it = inflight_writers_.find(key);
      if (it != inflight_writers_.end() && it->second > 0) return key;
    }
    // chained fallback: the most recent key that still has a pending writer
    while (!inflight_stack_.empty()) {
      const std::string& key = inflight_stack_.back();
      auto it = inflight_writers_.find(key);
      if (it != inflight_writers_.end() && it->second > 0) return key;
      inflight_stack_.pop_back();
    }
    // nothing in flight at all: fall through to a fresh key
  }
  return key_name(fresh_cursor_++ % config_.key_universe);
}

OpGenerator::Next OpGenerator::next_op() {
  std::lock_guard<std::mutex> lock(mu_);
  Next next;
  std::string key = pick_key_locked();
  next.op.kind = OpKind::ChangeOwner;
  next.op.key = key;
  next.op.value = "owner" + std::to_string(value_serial_++);
  next.conflict_intent =
      config_.mode == WorkloadMode::HotSetPairing &&
      inflight_writers_.count(key) && inflight_writers_[key] > 0;
  return next;
}

void OpGenerator::on_submitted(const std::string& tx_id, const ChaincodeOp& op,
                               bool conflict_intent) {
  std::lock_guard<std::mutex> lock(mu_);
  inflight_tx_[tx_id] = {op.key};
  ++inflight_writers_[op.key];
  inflight_stack_.push_back(op.key);
  if (config_.mode == WorkloadMode::HotSetPairing && !conflict_intent &&
      partner_set_.insert(op.key).second) {
    partner_pool_.push_back(op.key);
  }
}

void OpGenerator::on_terminal(const std::string& tx_id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = inflight_tx_.find(tx_id);
  if (it == inflight_tx_.end()) return;
  for (const auto& key : it->second) {
    auto w = inflight_writers_.find(key);
    if (w != inflight_writers_.end() && --w->second <= 0)
      inflight_writers_.erase(w);
  }
  inflight_tx_.erase(it);
}

}  // namespace eovsim
