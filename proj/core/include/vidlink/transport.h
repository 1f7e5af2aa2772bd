#ifndef VIDLINK_TRANSPORT_H_
#define VIDLINK_TRANSPORT_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "vidlink/media.h"

namespace vidlink {

// Wire layout, all fields little-endian:
//
//   MediaPacket (20-byte header + payload)
//     0  u8   stream_id
//     1  u8   flags          bit 0 keyframe, bit 1 last fragment,
//                            bit 2 secondary stream active at capture
//     2  u32  frame_seq
//     6  u16  fragment_index
//     8  u16  fragment_count
//    10  u64  capture_time_us
//    18  u16  payload_len
//    20  ...  payload
//
//   FeedbackMessage (20 bytes)
//     0  u32  epoch_index
//     4  u64  estimate_bps   (0 means the epoch carried no data)
//    12  u64  server_time_us
//
//   ResultMessage (24 bytes), inference completion sent to the client
//     0  u32  frame_seq
//     4  u8   stream_id
//     5  u8   service
//     6  u16  reserved (0)
//     8  u64  capture_time_us
//    16  u64  server_hold_us  (frame completion to inference finish)
inline constexpr size_t kMediaHeaderSize = 20;
inline constexpr size_t kFeedbackMessageSize = 20;
inline constexpr size_t kResultMessageSize = 24;
inline constexpr size_t kDefaultMtu = 1220;

enum PacketFlags : uint8_t {
  kFlagKeyframe = 1 << 0,
  kFlagLastFragment = 1 << 1,
  kFlagSecondaryActive = 1 << 2,
};

struct MediaPacket {
  uint8_t stream_id = 0;
  uint8_t flags = 0;
  uint32_t frame_seq = 0;
  uint16_t fragment_index = 0;
  uint16_t fragment_count = 1;
  uint64_t capture_time_us = 0;
  uint16_t payload_len = 0;
  // Empty in simulation; payload_len alone describes the fragment. When
  // non-empty its size equals payload_len.
  std::vector<uint8_t> payload;

  size_t wire_size() const { return kMediaHeaderSize + payload_len; }
  bool is_last_fragment() const { return flags & kFlagLastFragment; }

  friend bool operator==(const MediaPacket&, const MediaPacket&) = default;
};

struct FeedbackMessage {
  uint32_t epoch_index = 0;
  uint64_t estimate_bps = 0;
  uint64_t server_time_us = 0;

  friend bool operator==(const FeedbackMessage&,
                         const FeedbackMessage&) = default;
};

struct ResultMessage {
  uint32_t frame_seq = 0;
  uint8_t stream_id = 0;
  uint8_t service = 0;
  uint64_t capture_time_us = 0;
  uint64_t server_hold_us = 0;

  friend bool operator==(const ResultMessage&, const ResultMessage&) = default;
};

uint64_t SecondsToMicros(double seconds);
double MicrosToSeconds(uint64_t micros);

// Splits a frame into ceil(size / (mtu - 20)) fragments. Throws ConfigError
// when mtu <= 20 and when size is 0 or needs more than 65535 fragments.
std::vector<MediaPacket> Packetize(const FrameDescriptor& frame, size_t mtu,
                                   uint8_t extra_flags = 0);

// Encoding writes payload_len bytes of payload, zero-filled when the packet
// carries none.
std::vector<uint8_t> Encode(const MediaPacket& packet);
std::vector<uint8_t> Encode(const FeedbackMessage& message);
std::vector<uint8_t> Encode(const ResultMessage& message);

// Decoders throw FramingError on short or inconsistent buffers.
MediaPacket DecodeMediaPacket(std::span<const uint8_t> buffer);
FeedbackMessage DecodeFeedbackMessage(std::span<const uint8_t> buffer);
ResultMessage DecodeResultMessage(std::span<const uint8_t> buffer);

struct FrameArrival {
  int stream_id = 0;
  uint32_t frame_seq = 0;
  double capture_time = 0.0;
  double first_arrival = 0.0;
  double completion_time = 0.0;
  uint32_t bytes = 0;
  uint16_t fragment_count = 0;
  uint8_t flags = 0;
};

struct ExpiredFrame {
  int stream_id = 0;
  uint32_t frame_seq = 0;
  uint16_t fragments_received = 0;
  uint16_t fragment_count = 0;
};

// Receiver-side fragment collector. Accepts fragments in any order, ignores
// duplicates, and discards frames still incomplete `expiry` seconds after their
// first fragment.
class Reassembler {
 public:
  static constexpr double kDefaultExpiry = 0.5;

  explicit Reassembler(double expiry = kDefaultExpiry) : expiry_(expiry) {}

  // Returns the arrival exactly once, when the final missing fragment lands.
  // Throws ProtocolError when fragment_count disagrees with earlier fragments.
  std::optional<FrameArrival> OnPacket(const MediaPacket& packet,
                                       double arrival_time);

  // Removes and returns frames whose expiry deadline is <= now.
  std::vector<ExpiredFrame> Expire(double now);
  // Removes and returns every incomplete frame.
  std::vector<ExpiredFrame> ExpireAll();

  size_t pending_frames() const { return pending_.size(); }

 private:
  using Key = std::pair<int, uint32_t>;
  struct Pending {
    uint16_t fragment_count = 0;
    uint8_t flags = 0;
    uint64_t capture_time_us = 0;
    double first_arrival = 0.0;
    uint32_t bytes = 0;
    std::vector<bool> seen;
    uint16_t received = 0;
  };

  void Forget(double now);

  double expiry_;
  std::map<Key, Pending> pending_;
  // Frames already completed or expired, with the time they were closed.
  // Late fragments for these are ignored.
  std::map<Key, double> closed_;
};

}  // namespace vidlink

#endif  // VIDLINK_TRANSPORT_H_
