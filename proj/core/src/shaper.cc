#include "vidlink/shaper.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vidlink/errors.h"

namespace vidlink {

TokenBucketShaper::TokenBucketShaper(CapacitySchedule schedule,
                                     size_t queue_limit, double prop_delay,
                                     size_t burst_bytes, double tick)
    : schedule_(std::move(schedule)),
      queue_limit_(queue_limit),
      prop_delay_(prop_delay),
      burst_bytes_(static_cast<double>(burst_bytes)),
      tick_(tick) {
  if (!(tick_ > 0.0))
    throw ConfigError("shaper tick must be positive");
  if (prop_delay_ < 0.0)
    throw ConfigError("shaper delay must be >= 0");
  if (burst_bytes == 0)
    throw ConfigError("shaper burst must be positive");
}

std::optional<uint64_t> TokenBucketShaper::Offer(size_t bytes, double t) {
  if (queued_bytes_ + bytes > queue_limit_) {
    ++dropped_;
    return std::nullopt;
  }
  const uint64_t id = next_id_++;
  queue_.push_back({id, bytes, t});
  queued_bytes_ += bytes;
  return id;
}

std::vector<TokenBucketShaper::Released> TokenBucketShaper::AdvanceTo(
    double t) {
  std::vector<Released> out;
  while (next_tick_ * tick_ <= t + 1e-12) {
    const double now = next_tick_ * tick_;
    const double rate = schedule_.CapacityAt(now - tick_);
    const double quota = rate * tick_ / 8.0;
    // The bucket holds at most one tick of quota plus the burst allowance.
    tokens_ = std::min(tokens_ + quota, quota + burst_bytes_);
    while (!queue_.empty() &&
           tokens_ >= static_cast<double>(queue_.front().bytes)) {
      const Entry e = queue_.front();
      queue_.pop_front();
      queued_bytes_ -= e.bytes;
      tokens_ -= static_cast<double>(e.bytes);
      out.push_back({e.id, e.bytes, e.enqueue_time, now, now + prop_delay_});
    }
    ++next_tick_;
  }
  return out;
}

double TokenBucketShaper::NextWakeTime() const {
  if (queue_.empty())
    return std::numeric_limits<double>::infinity();
  return next_tick_ * tick_;
}

}  // namespace vidlink
