#include "vidlink/transport.h"

#include <cmath>
#include <limits>
#include <string>

#include "vidlink/errors.h"

namespace vidlink {
namespace {

class Writer {
 public:
  explicit Writer(size_t size) { out_.reserve(size); }

  template <typename T>
  void Put(T value) {
    for (size_t i = 0; i < sizeof(T); ++i)
      out_.push_back(static_cast<uint8_t>(static_cast<uint64_t>(value) >>
                                          (8 * i)));
  }
  void Append(std::span<const uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }
  void Zeros(size_t n) { out_.resize(out_.size() + n, 0); }

  std::vector<uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  template <typename T>
  T Get() {
    uint64_t value = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }
  std::span<const uint8_t> Rest() const { return in_.subspan(pos_); }

 private:
  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

void RequireSize(std::span<const uint8_t> buffer, size_t needed,
                 const char* what) {
  if (buffer.size() < needed)
    throw FramingError(std::string(what) + ": need " + std::to_string(needed) +
                       " bytes, got " + std::to_string(buffer.size()));
}

}  // namespace

uint64_t SecondsToMicros(double seconds) {
  return static_cast<uint64_t>(std::llround(std::max(0.0, seconds) * 1e6));
}

double MicrosToSeconds(uint64_t micros) {
  return static_cast<double>(micros) / 1e6;
}

std::vector<MediaPacket> Packetize(const FrameDescriptor& frame, size_t mtu,
                                   uint8_t extra_flags) {
  if (mtu <= kMediaHeaderSize)
    throw ConfigError("mtu must exceed the 20-byte media header");
  if (frame.size == 0)
    throw ConfigError("frame size must be positive");
  const size_t max_payload =
      std::min<size_t>(mtu - kMediaHeaderSize,
                       std::numeric_limits<uint16_t>::max());
  const size_t count = (frame.size + max_payload - 1) / max_payload;
  if (count > std::numeric_limits<uint16_t>::max())
    throw ConfigError("frame needs more than 65535 fragments");

  std::vector<MediaPacket> packets;
  packets.reserve(count);
  size_t remaining = frame.size;
  for (size_t i = 0; i < count; ++i) {
    MediaPacket p;
    p.stream_id = static_cast<uint8_t>(frame.stream_id);
    p.flags = extra_flags;
    if (frame.is_keyframe)
      p.flags |= kFlagKeyframe;
    if (i + 1 == count)
      p.flags |= kFlagLastFragment;
    p.frame_seq = frame.frame_seq;
    p.fragment_index = static_cast<uint16_t>(i);
    p.fragment_count = static_cast<uint16_t>(count);
    p.capture_time_us = SecondsToMicros(frame.capture_time);
    p.payload_len = static_cast<uint16_t>(std::min(remaining, max_payload));
    remaining -= p.payload_len;
    packets.push_back(std::move(p));
  }
  return packets;
}

std::vector<uint8_t> Encode(const MediaPacket& packet) {
  if (!packet.payload.empty() && packet.payload.size() != packet.payload_len)
    throw FramingError("payload size disagrees with payload_len");
  Writer w(packet.wire_size());
  w.Put<uint8_t>(packet.stream_id);
  w.Put<uint8_t>(packet.flags);
  w.Put<uint32_t>(packet.frame_seq);
  w.Put<uint16_t>(packet.fragment_index);
  w.Put<uint16_t>(packet.fragment_count);
  w.Put<uint64_t>(packet.capture_time_us);
  w.Put<uint16_t>(packet.payload_len);
  if (packet.payload.empty())
    w.Zeros(packet.payload_len);
  else
    w.Append(packet.payload);
  return w.Take();
}

std::vector<uint8_t> Encode(const FeedbackMessage& message) {
  Writer w(kFeedbackMessageSize);
  w.Put<uint32_t>(message.epoch_index);
  w.Put<uint64_t>(message.estimate_bps);
  w.Put<uint64_t>(message.server_time_us);
  return w.Take();
}

std::vector<uint8_t> Encode(const ResultMessage& message) {
  Writer w(kResultMessageSize);
  w.Put<uint32_t>(message.frame_seq);
  w.Put<uint8_t>(message.stream_id);
  w.Put<uint8_t>(message.service);
  w.Put<uint16_t>(0);
  w.Put<uint64_t>(message.capture_time_us);
  w.Put<uint64_t>(message.server_hold_us);
  return w.Take();
}

MediaPacket DecodeMediaPacket(std::span<const uint8_t> buffer) {
  RequireSize(buffer, kMediaHeaderSize, "media packet header");
  Reader r(buffer);
  MediaPacket p;
  p.stream_id = r.Get<uint8_t>();
  p.flags = r.Get<uint8_t>();
  p.frame_seq = r.Get<uint32_t>();
  p.fragment_index = r.Get<uint16_t>();
  p.fragment_count = r.Get<uint16_t>();
  p.capture_time_us = r.Get<uint64_t>();
  p.payload_len = r.Get<uint16_t>();
  if (p.fragment_count == 0 || p.fragment_index >= p.fragment_count)
    throw FramingError("fragment_index out of range");
  RequireSize(buffer, kMediaHeaderSize + p.payload_len, "media packet");
  auto rest = r.Rest().first(p.payload_len);
  p.payload.assign(rest.begin(), rest.end());
  return p;
}

FeedbackMessage DecodeFeedbackMessage(std::span<const uint8_t> buffer) {
  RequireSize(buffer, kFeedbackMessageSize, "feedback message");
  Reader r(buffer);
  FeedbackMessage m;
  m.epoch_index = r.Get<uint32_t>();
  m.estimate_bps = r.Get<uint64_t>();
  m.server_time_us = r.Get<uint64_t>();
  return m;
}

ResultMessage DecodeResultMessage(std::span<const uint8_t> buffer) {
  RequireSize(buffer, kResultMessageSize, "result message");
  Reader r(buffer);
  ResultMessage m;
  m.frame_seq = r.Get<uint32_t>();
  m.stream_id = r.Get<uint8_t>();
  m.service = r.Get<uint8_t>();
  r.Get<uint16_t>();
  m.capture_time_us = r.Get<uint64_t>();
  m.server_hold_us = r.Get<uint64_t>();
  return m;
}

std::optional<FrameArrival> Reassembler::OnPacket(const MediaPacket& packet,
                                                  double arrival_time) {
  if (packet.fragment_count == 0 ||
      packet.fragment_index >= packet.fragment_count)
    throw ProtocolError("fragment_index out of range");
  const Key key{packet.stream_id, packet.frame_seq};
  if (closed_.contains(key))
    return std::nullopt;

  auto [it, inserted] = pending_.try_emplace(key);
  Pending& p = it->second;
  if (inserted) {
    p.fragment_count = packet.fragment_count;
    p.capture_time_us = packet.capture_time_us;
    p.first_arrival = arrival_time;
    p.seen.assign(packet.fragment_count, false);
  } else if (p.fragment_count != packet.fragment_count) {
    throw ProtocolError("fragment_count mismatch for stream " +
                        std::to_string(packet.stream_id) + " frame " +
                        std::to_string(packet.frame_seq));
  }
  if (p.seen[packet.fragment_index])
    return std::nullopt;
  p.seen[packet.fragment_index] = true;
  ++p.received;
  p.bytes += packet.payload_len;
  p.flags |= packet.flags & ~kFlagLastFragment;
  if (p.received < p.fragment_count)
    return std::nullopt;

  FrameArrival arrival;
  arrival.stream_id = packet.stream_id;
  arrival.frame_seq = packet.frame_seq;
  arrival.capture_time = MicrosToSeconds(p.capture_time_us);
  arrival.first_arrival = p.first_arrival;
  arrival.completion_time = arrival_time;
  arrival.bytes = p.bytes;
  arrival.fragment_count = p.fragment_count;
  arrival.flags = p.flags;
  pending_.erase(it);
  closed_.emplace(key, arrival_time);
  return arrival;
}

std::vector<ExpiredFrame> Reassembler::Expire(double now) {
  std::vector<ExpiredFrame> out;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->second.first_arrival + expiry_ <= now) {
      out.push_back({it->first.first, it->first.second, it->second.received,
                     it->second.fragment_count});
      closed_.emplace(it->first, now);
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  Forget(now);
  return out;
}

std::vector<ExpiredFrame> Reassembler::ExpireAll() {
  std::vector<ExpiredFrame> out;
  for (const auto& [key, p] : pending_)
    out.push_back({key.first, key.second, p.received, p.fragment_count});
  pending_.clear();
  return out;
}

void Reassembler::Forget(double now) {
  // Keep closed keys long enough that stragglers from the link are still
  // recognized; ten expiry periods is far beyond any queueing delay we model.
  const double horizon = now - 10.0 * expiry_;
  for (auto it = closed_.begin(); it != closed_.end();) {
    if (it->second < horizon)
      it = closed_.erase(it);
    else
      ++it;
  }
}

}  // namespace vidlink
