#include "vidlink/media.h"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "vidlink/errors.h"

namespace vidlink {
namespace {

constexpr int kMinDimension = 16;

double GopScaledNonKeyBytes(const StreamConfig& config) {
  const double average = config.target_bitrate_bps / (8.0 * config.fps);
  const double gop = config.gop_length;
  return average * gop / (config.i_frame_ratio + gop - 1.0);
}

uint32_t ClampSize(double bytes) {
  return static_cast<uint32_t>(std::max(1.0, std::floor(bytes)));
}

}  // namespace

std::string Resolution::ToString() const {
  return std::to_string(width) + "x" + std::to_string(height);
}

Resolution Resolution::Parse(std::string_view text) {
  const auto sep = text.find('x');
  Resolution r;
  if (sep == std::string_view::npos)
    throw ConfigError("resolution must look like WIDTHxHEIGHT: " +
                      std::string(text));
  auto parse = [&](std::string_view part, int& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(),
                                     out);
    if (ec != std::errc() || ptr != part.data() + part.size())
      throw ConfigError("bad resolution: " + std::string(text));
  };
  parse(text.substr(0, sep), r.width);
  parse(text.substr(sep + 1), r.height);
  if (r.width < kMinDimension || r.height < kMinDimension)
    throw ConfigError("resolution below 16x16: " + std::string(text));
  return r;
}

void StreamConfig::Validate() const {
  if (!(target_bitrate_bps > 0) || !std::isfinite(target_bitrate_bps))
    throw ConfigError("target bitrate must be positive");
  if (!(fps > 0) || !std::isfinite(fps))
    throw ConfigError("fps must be positive");
  if (gop_length < 1)
    throw ConfigError("gop_length must be >= 1");
  if (!(i_frame_ratio >= 1.0))
    throw ConfigError("i_frame_ratio must be >= 1");
  if (!(size_jitter >= 0.0 && size_jitter < 1.0))
    throw ConfigError("size_jitter must be in [0, 1)");
  if (resolution.width < kMinDimension || resolution.height < kMinDimension)
    throw ConfigError("resolution below 16x16");
  if (stream_id != kPrimaryStream && stream_id != kSecondaryStream)
    throw ConfigError("stream_id must be 0 or 1");
}

double FrameRng::NextUnit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

uint32_t NonKeyFrameSize(const StreamConfig& config) {
  return ClampSize(GopScaledNonKeyBytes(config));
}

uint32_t KeyFrameSize(const StreamConfig& config) {
  return ClampSize(config.i_frame_ratio * GopScaledNonKeyBytes(config));
}

FrameDescriptor NextFrame(const StreamConfig& config, uint32_t frame_seq,
                          FrameRng& rng) {
  config.Validate();
  FrameDescriptor frame;
  frame.stream_id = config.stream_id;
  frame.frame_seq = frame_seq;
  frame.capture_time = config.start_offset + frame_seq / config.fps;
  frame.resolution = config.resolution;
  frame.is_keyframe = frame_seq % config.gop_length == 0;

  double bytes = GopScaledNonKeyBytes(config);
  if (frame.is_keyframe)
    bytes *= config.i_frame_ratio;
  if (config.size_jitter > 0.0) {
    const double u = rng.NextUnit();
    bytes *= 1.0 - config.size_jitter + 2.0 * config.size_jitter * u;
  }
  frame.size = ClampSize(bytes);
  return frame;
}

StreamConfig ApplyDecision(const StreamConfig& config,
                           const AdaptationDecision& decision) {
  StreamConfig out = config;
  out.target_bitrate_bps = decision.encoder_bitrate_bps;
  out.resolution = decision.resolution;
  return out;
}

Encoder::Encoder(StreamConfig config, uint64_t seed)
    : config_(config), rng_(seed) {
  config_.Validate();
}

void Encoder::SetTarget(double bitrate_bps, Resolution resolution) {
  config_.target_bitrate_bps = bitrate_bps;
  if (resolution == config_.resolution)
    pending_resolution_.reset();
  else
    pending_resolution_ = resolution;
}

FrameDescriptor Encoder::Encode(uint32_t frame_seq) {
  if (pending_resolution_ && frame_seq % config_.gop_length == 0) {
    config_.resolution = *pending_resolution_;
    pending_resolution_.reset();
  }
  return NextFrame(config_, frame_seq, rng_);
}

}  // namespace vidlink
