#ifndef VIDLINK_NETEM_H_
#define VIDLINK_NETEM_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

namespace vidlink {

inline constexpr double kInfiniteRate = std::numeric_limits<double>::infinity();

// Piecewise-constant uplink capacity. Segment i covers
// [start_time_i, start_time_{i+1}); the last segment extends forever.
class CapacitySchedule {
 public:
  struct Segment {
    double start_time = 0.0;
    double capacity_bps = 0.0;
  };

  // Throws ConfigError unless start times are strictly increasing from 0 and
  // every capacity is positive.
  explicit CapacitySchedule(std::vector<Segment> segments);
  static CapacitySchedule Constant(double capacity_bps);

  double CapacityAt(double t) const;
  // Start of the first segment beginning strictly after t, or +inf.
  double NextChangeAfter(double t) const;
  // Largest capacity over [begin, end).
  double MaxOver(double begin, double end) const;
  // Time at which `bits` finish draining when service starts at `start`.
  // Integrates across capacity changes.
  double DrainEnd(double start, double bits) const;

  const std::vector<Segment>& segments() const { return segments_; }

 private:
  size_t IndexAt(double t) const;

  std::vector<Segment> segments_;
};

struct LinkParams {
  double prop_delay_up = 0.010;
  double prop_delay_down = 0.010;
  size_t queue_limit = 2'000'000;
  double downlink_capacity_bps = 50e6;

  // Throws ConfigError. `mtu` is used for the queue_limit lower bound.
  void Validate(size_t mtu) const;
};

struct LinkEvent {
  enum class Kind { kDelivered, kDropped };

  Kind kind = Kind::kDelivered;
  uint64_t packet_id = 0;
  size_t bytes = 0;
  double enqueue_time = 0.0;
  double depart_time = 0.0;
  double deliver_time = 0.0;
};

// Single FIFO bottleneck with tail drop. Service is work conserving: a packet
// starts draining as soon as it reaches the head, at whatever capacity the
// schedule gives, and a capacity switch mid-packet drains the remaining bits at
// the new rate.
class BottleneckLink {
 public:
  BottleneckLink(CapacitySchedule schedule, LinkParams params);

  // Offers a packet at time t. Returns the drop event when the packet does not
  // fit, otherwise the id under which its delivery will be reported. Throws
  // ClockError when t precedes the link clock.
  struct OfferResult {
    uint64_t packet_id = 0;
    std::optional<LinkEvent> drop;
  };
  OfferResult Offer(size_t bytes, double t);

  // Returns delivery events with deliver_time <= t, in delivery order.
  std::vector<LinkEvent> AdvanceTo(double t);
  // Time of the next pending delivery, or +inf.
  double NextDeliveryTime() const;

  // Downlink is uncongested: serialization of the message plus propagation.
  double FeedbackDeliveryTime(size_t message_bytes, double t) const;

  // Bytes accepted but not yet departed the bottleneck at time t (t >= clock).
  size_t QueuedBytes(double t);

  const CapacitySchedule& schedule() const { return schedule_; }
  const LinkParams& params() const { return params_; }
  uint64_t offered() const { return offered_; }
  uint64_t delivered() const { return delivered_; }
  uint64_t dropped() const { return dropped_; }
  uint64_t in_flight() const { return in_flight_.size(); }

 private:
  void CheckClock(double t);
  void ReleaseDeparted(double t);

  CapacitySchedule schedule_;
  LinkParams params_;
  double clock_ = 0.0;
  double busy_until_ = 0.0;
  uint64_t next_id_ = 0;
  uint64_t offered_ = 0;
  uint64_t delivered_ = 0;
  uint64_t dropped_ = 0;
  size_t queued_bytes_ = 0;
  std::deque<LinkEvent> queued_;     // not yet departed, FIFO
  std::deque<LinkEvent> in_flight_;  // accepted, not yet reported delivered
};

}  // namespace vidlink

#endif  // VIDLINK_NETEM_H_
