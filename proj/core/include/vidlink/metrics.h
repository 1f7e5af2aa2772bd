#ifndef VIDLINK_METRICS_H_
#define VIDLINK_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vidlink/media.h"

namespace vidlink {

inline constexpr double kDefaultQosBudget = 0.100;

enum class FrameOutcome { kOk, kLost, kExpired, kStaleDropped };
std::string_view OutcomeName(FrameOutcome outcome);

struct JobTimes {
  double enqueue = 0.0;
  double start = 0.0;
  double finish = 0.0;
};

// Timeline of one frame. Times are seconds on the simulation (or client)
// clock; absent stages stay empty.
struct FrameRecord {
  int stream_id = 0;
  uint32_t frame_seq = 0;
  double capture_time = 0.0;
  uint32_t size = 0;
  Resolution resolution;
  bool is_keyframe = false;
  std::optional<double> server_completion_time;
  std::optional<JobTimes> detection;
  std::optional<JobTimes> navigation;
  std::optional<JobTimes> vlm;
  // Arrival of the detection result back at the client.
  std::optional<double> feedback_delivery_time;
  FrameOutcome outcome = FrameOutcome::kLost;
  // Set in live mode: uplink/downlink split derived from RTT / 2.
  bool rtt_derived = false;
};

// Capture-to-result latency for a frame whose detection completed: uplink
// completion minus capture, plus detection wait and execution, plus the
// downlink return. Empty for records without a completed detection.
std::optional<double> E2eLatency(const FrameRecord& record);
// E2eLatency less the detection wait and execution.
std::optional<double> NetworkRtt(const FrameRecord& record);

// One row per estimator epoch.
struct EpochRecord {
  uint32_t epoch_index = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  double max_capacity_bps = 0.0;
  double estimate_bps = 0.0;
  double throughput_bps = 0.0;
  bool no_data = false;
  // Controller state after ingesting this epoch's feedback. Empty when the
  // controller is bypassed or the feedback never arrived.
  std::optional<double> link_prediction_bps;
  std::optional<double> prediction_bps;
  std::optional<double> encoder_bitrate_bps;
  std::optional<double> secondary_bitrate_bps;
  std::optional<Resolution> resolution;
  std::optional<bool> secondary_active;
};

// Integer-microsecond summary statistics with nearest-rank percentiles.
struct LatencyStats {
  size_t count = 0;
  int64_t mean_us = 0;
  int64_t median_us = 0;
  int64_t p25_us = 0;
  int64_t p75_us = 0;
  int64_t max_us = 0;
  // Population standard deviation, microseconds.
  double stddev_us = 0.0;
};

struct CdfPoint {
  int64_t latency_us = 0;
  double fraction = 0.0;
};

struct RunSummary {
  std::string scenario;
  bool adaptation_enabled = true;
  uint64_t seed = 0;
  double qos_budget_s = kDefaultQosBudget;
  size_t primary_frames = 0;
  size_t secondary_frames = 0;
  size_t completed_detections = 0;
  size_t lost_frames = 0;
  size_t expired_frames = 0;
  size_t stale_dropped = 0;
  double frame_loss_fraction = 0.0;
  double violation_fraction = 0.0;
  LatencyStats rtt;
  LatencyStats e2e;
  LatencyStats detection_time;
  // Jitter is the standard deviation of the network RTT.
  double jitter_us = 0.0;
  std::vector<CdfPoint> e2e_cdf;
  size_t detection_jobs = 0;
  size_t navigation_jobs = 0;
  size_t vlm_jobs = 0;
  size_t stale_feedback = 0;
  bool rtt_derived = false;
};

int64_t ToMicros(double seconds);

// Nearest-rank percentile of an ascending-sorted sample: element
// ceil(p * n) - 1, clamped to the range. p in [0, 1].
int64_t NearestRank(const std::vector<int64_t>& sorted, double p);
LatencyStats ComputeStats(std::vector<int64_t> values_us);
// One point per distinct latency: fraction of samples <= that latency.
std::vector<CdfPoint> ComputeCdf(std::vector<int64_t> values_us);

// Statistics over completed detection frames of the primary stream. Lost,
// expired, and stale-dropped frames are excluded from latency figures and
// counted separately. Latencies are quantized to whole microseconds before any
// statistic is taken.
RunSummary Summarize(const std::vector<FrameRecord>& frames,
                     double qos_budget_s = kDefaultQosBudget);

// Writes frames.csv, epochs.csv, and summary.json under `dir` (created when
// missing). Throws IoError naming the path on failure.
void ExportRun(const std::filesystem::path& dir, const RunSummary& summary,
               const std::vector<FrameRecord>& frames,
               const std::vector<EpochRecord>& epochs);

std::string FramesCsv(const std::vector<FrameRecord>& frames);
std::string EpochsCsv(const std::vector<EpochRecord>& epochs);
std::string SummaryJson(const RunSummary& summary);

}  // namespace vidlink

#endif  // VIDLINK_METRICS_H_
