#ifndef VIDLINK_SHAPER_H_
#define VIDLINK_SHAPER_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "vidlink/netem.h"

namespace vidlink {

// Token-bucket emulation of the uplink bottleneck for live mode.
//
// Time is whatever clock the caller uses, in seconds from the start of the
// schedule. Tokens accrue at the scheduled capacity in fixed ticks; at each
// tick, queued packets are released in FIFO order while tokens cover them.
// A released packet is handed back with a due time `prop_delay` later.
class TokenBucketShaper {
 public:
  static constexpr double kDefaultTick = 0.001;

  struct Released {
    uint64_t id = 0;
    size_t bytes = 0;
    double enqueue_time = 0.0;
    double release_time = 0.0;
    double due_time = 0.0;
  };

  TokenBucketShaper(CapacitySchedule schedule, size_t queue_limit,
                    double prop_delay, size_t burst_bytes,
                    double tick = kDefaultTick);

  // Returns the packet id, or nothing when the queue would exceed its limit.
  std::optional<uint64_t> Offer(size_t bytes, double t);

  // Processes every tick boundary <= t and returns the packets they release.
  std::vector<Released> AdvanceTo(double t);

  // Next tick at which something can happen, or +inf when idle.
  double NextWakeTime() const;

  size_t queued_bytes() const { return queued_bytes_; }
  uint64_t dropped() const { return dropped_; }

 private:
  struct Entry {
    uint64_t id;
    size_t bytes;
    double enqueue_time;
  };

  CapacitySchedule schedule_;
  size_t queue_limit_;
  double prop_delay_;
  double burst_bytes_;
  double tick_;
  uint64_t next_tick_ = 1;
  double tokens_ = 0.0;
  uint64_t next_id_ = 0;
  uint64_t dropped_ = 0;
  size_t queued_bytes_ = 0;
  std::deque<Entry> queue_;
};

}  // namespace vidlink

#endif  // VIDLINK_SHAPER_H_
