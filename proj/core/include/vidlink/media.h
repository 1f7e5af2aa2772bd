#ifndef VIDLINK_MEDIA_H_
#define VIDLINK_MEDIA_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace vidlink {

struct Resolution {
  int width = 0;
  int height = 0;

  std::string ToString() const;
  // Parses "1920x1080". Throws ConfigError on malformed input.
  static Resolution Parse(std::string_view text);

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

inline constexpr Resolution k1080p{1920, 1080};
inline constexpr Resolution k720p{1280, 720};
inline constexpr Resolution k480p{854, 480};

inline constexpr int kPrimaryStream = 0;
inline constexpr int kSecondaryStream = 1;

struct StreamConfig {
  int stream_id = kPrimaryStream;
  double fps = 30.0;
  Resolution resolution = k1080p;
  double target_bitrate_bps = 20e6;
  int gop_length = 30;
  double i_frame_ratio = 4.0;
  // Multiplicative per-frame size jitter, uniform in [1 - j, 1 + j].
  double size_jitter = 0.0;
  // Capture time of frame_seq 0.
  double start_offset = 0.0;

  // Throws ConfigError when any field is out of range.
  void Validate() const;
};

struct FrameDescriptor {
  int stream_id = kPrimaryStream;
  uint32_t frame_seq = 0;
  double capture_time = 0.0;
  Resolution resolution;
  uint32_t size = 0;
  bool is_keyframe = false;
};

// Encoder settings chosen by the controller for one epoch. The primary stream
// consumes encoder_bitrate_bps and resolution; the secondary stream runs at
// secondary_bitrate_bps while secondary_active is set.
struct AdaptationDecision {
  uint32_t epoch_index = 0;
  double encoder_bitrate_bps = 0.0;
  Resolution resolution = k1080p;
  bool secondary_active = false;
  double secondary_bitrate_bps = 0.0;

  friend bool operator==(const AdaptationDecision&,
                         const AdaptationDecision&) = default;
};

// Seeded source of frame-size jitter. Uses the top 53 bits of a 64-bit
// Mersenne Twister so sequences are identical across standard libraries.
class FrameRng {
 public:
  explicit FrameRng(uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double NextUnit();

 private:
  std::mt19937_64 engine_;
};

// Size in bytes of a non-key frame and of a key frame for `config` before
// jitter. The GoP average equals target_bitrate / (8 fps) up to flooring.
uint32_t NonKeyFrameSize(const StreamConfig& config);
uint32_t KeyFrameSize(const StreamConfig& config);

// Produces the descriptor for `frame_seq`. Consumes one draw from `rng` only
// when size_jitter > 0.
FrameDescriptor NextFrame(const StreamConfig& config, uint32_t frame_seq,
                          FrameRng& rng);

// Field substitution of the decision's primary bitrate and resolution.
StreamConfig ApplyDecision(const StreamConfig& config,
                           const AdaptationDecision& decision);

// Stateful wrapper that applies decisions at frame boundaries. A bitrate
// change takes effect on the next encoded frame; a resolution change waits for
// the next keyframe (GoP boundary).
class Encoder {
 public:
  Encoder(StreamConfig config, uint64_t seed);

  void SetTarget(double bitrate_bps, Resolution resolution);
  FrameDescriptor Encode(uint32_t frame_seq);

  const StreamConfig& config() const { return config_; }

 private:
  StreamConfig config_;
  std::optional<Resolution> pending_resolution_;
  FrameRng rng_;
};

}  // namespace vidlink

#endif  // VIDLINK_MEDIA_H_
