#include "vidlink/netem.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "vidlink/errors.h"

namespace vidlink {

CapacitySchedule::CapacitySchedule(std::vector<Segment> segments)
    : segments_(std::move(segments)) {
  if (segments_.empty())
    throw ConfigError("capacity schedule needs at least one segment");
  if (segments_.front().start_time != 0.0)
    throw ConfigError("capacity schedule must start at t = 0");
  for (size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (!(s.capacity_bps > 0.0))
      throw ConfigError("capacity must be positive (segment " +
                        std::to_string(i) + ")");
    if (i > 0 && !(s.start_time > segments_[i - 1].start_time))
      throw ConfigError("segment start times must be strictly increasing");
  }
}

CapacitySchedule CapacitySchedule::Constant(double capacity_bps) {
  return CapacitySchedule({{0.0, capacity_bps}});
}

size_t CapacitySchedule::IndexAt(double t) const {
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), t,
      [](double value, const Segment& s) { return value < s.start_time; });
  return it == segments_.begin() ? 0 : (it - segments_.begin()) - 1;
}

double CapacitySchedule::CapacityAt(double t) const {
  return segments_[IndexAt(t)].capacity_bps;
}

double CapacitySchedule::NextChangeAfter(double t) const {
  const size_t i = IndexAt(t) + 1;
  return i < segments_.size() ? segments_[i].start_time : kInfiniteRate;
}

double CapacitySchedule::MaxOver(double begin, double end) const {
  double best = CapacityAt(begin);
  for (size_t i = IndexAt(begin) + 1;
       i < segments_.size() && segments_[i].start_time < end; ++i)
    best = std::max(best, segments_[i].capacity_bps);
  return best;
}

double CapacitySchedule::DrainEnd(double start, double bits) const {
  double t = start;
  size_t i = IndexAt(t);
  while (true) {
    const double rate = segments_[i].capacity_bps;
    const double next = i + 1 < segments_.size() ? segments_[i + 1].start_time
                                                 : kInfiniteRate;
    const double finish = t + bits / rate;
    if (finish <= next)
      return finish;
    bits -= rate * (next - t);
    t = next;
    ++i;
  }
}

void LinkParams::Validate(size_t mtu) const {
  if (!(prop_delay_up >= 0.0) || !(prop_delay_down >= 0.0))
    throw ConfigError("propagation delays must be >= 0");
  if (queue_limit <= mtu)
    throw ConfigError("queue_limit must exceed the MTU");
  if (!(downlink_capacity_bps > 0.0))
    throw ConfigError("downlink capacity must be positive");
}

BottleneckLink::BottleneckLink(CapacitySchedule schedule, LinkParams params)
    : schedule_(std::move(schedule)), params_(params) {}

void BottleneckLink::CheckClock(double t) {
  if (t < clock_)
    throw ClockError("link clock moved backwards: " + std::to_string(t) +
                     " < " + std::to_string(clock_));
  clock_ = t;
}

void BottleneckLink::ReleaseDeparted(double t) {
  while (!queued_.empty() && queued_.front().depart_time <= t) {
    queued_bytes_ -= queued_.front().bytes;
    queued_.pop_front();
  }
}

BottleneckLink::OfferResult BottleneckLink::Offer(size_t bytes, double t) {
  CheckClock(t);
  ReleaseDeparted(t);
  ++offered_;
  LinkEvent e;
  e.packet_id = next_id_++;
  e.bytes = bytes;
  e.enqueue_time = t;
  if (queued_bytes_ + bytes > params_.queue_limit) {
    ++dropped_;
    e.kind = LinkEvent::Kind::kDropped;
    e.depart_time = e.deliver_time = t;
    return {e.packet_id, e};
  }
  const double start = std::max(t, busy_until_);
  e.depart_time = schedule_.DrainEnd(start, 8.0 * static_cast<double>(bytes));
  e.deliver_time = e.depart_time + params_.prop_delay_up;
  busy_until_ = e.depart_time;
  queued_bytes_ += bytes;
  queued_.push_back(e);
  in_flight_.push_back(e);
  return {e.packet_id, std::nullopt};
}

std::vector<LinkEvent> BottleneckLink::AdvanceTo(double t) {
  CheckClock(t);
  ReleaseDeparted(t);
  std::vector<LinkEvent> out;
  while (!in_flight_.empty() && in_flight_.front().deliver_time <= t) {
    out.push_back(in_flight_.front());
    in_flight_.pop_front();
    ++delivered_;
  }
  return out;
}

double BottleneckLink::NextDeliveryTime() const {
  return in_flight_.empty() ? kInfiniteRate : in_flight_.front().deliver_time;
}

double BottleneckLink::FeedbackDeliveryTime(size_t message_bytes,
                                            double t) const {
  double serialization = 0.0;
  if (std::isfinite(params_.downlink_capacity_bps))
    serialization = 8.0 * static_cast<double>(message_bytes) /
                    params_.downlink_capacity_bps;
  return t + serialization + params_.prop_delay_down;
}

size_t BottleneckLink::QueuedBytes(double t) {
  CheckClock(t);
  ReleaseDeparted(t);
  return queued_bytes_;
}

}  // namespace vidlink
