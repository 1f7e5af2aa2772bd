#include "vidlink/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vidlink/errors.h"

namespace vidlink {
namespace {

std::string OptMicros(const std::optional<double>& t) {
  return t ? std::to_string(ToMicros(*t)) : std::string();
}

std::string OptRate(const std::optional<double>& v) {
  return v ? std::to_string(std::llround(*v)) : std::string();
}

nlohmann::ordered_json StatsJson(const LatencyStats& s) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["mean_us"] = s.mean_us;
  j["median_us"] = s.median_us;
  j["p25_us"] = s.p25_us;
  j["p75_us"] = s.p75_us;
  j["max_us"] = s.max_us;
  j["stddev_us"] = s.stddev_us;
  return j;
}

void WriteFile(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  out << body;
  out.close();
  if (!out)
    throw IoError("failed writing " + path.string());
}

}  // namespace

std::string_view OutcomeName(FrameOutcome outcome) {
  switch (outcome) {
    case FrameOutcome::kOk:
      return "ok";
    case FrameOutcome::kLost:
      return "lost";
    case FrameOutcome::kExpired:
      return "expired";
    case FrameOutcome::kStaleDropped:
      return "stale_dropped";
  }
  return "unknown";
}

int64_t ToMicros(double seconds) {
  return static_cast<int64_t>(std::llround(seconds * 1e6));
}

std::optional<double> E2eLatency(const FrameRecord& record) {
  if (!record.detection || !record.feedback_delivery_time)
    return std::nullopt;
  return *record.feedback_delivery_time - record.capture_time;
}

std::optional<double> NetworkRtt(const FrameRecord& record) {
  const auto e2e = E2eLatency(record);
  if (!e2e)
    return std::nullopt;
  return *e2e - (record.detection->finish - record.detection->enqueue);
}

int64_t NearestRank(const std::vector<int64_t>& sorted, double p) {
  if (sorted.empty())
    return 0;
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<int64_t>(std::ceil(p * n - 1e-12)) - 1;
  rank = std::clamp<int64_t>(rank, 0, static_cast<int64_t>(sorted.size()) - 1);
  return sorted[static_cast<size_t>(rank)];
}

LatencyStats ComputeStats(std::vector<int64_t> values_us) {
  LatencyStats s;
  s.count = values_us.size();
  if (values_us.empty())
    return s;
  std::sort(values_us.begin(), values_us.end());
  const double n = static_cast<double>(values_us.size());
  const double sum = std::accumulate(values_us.begin(), values_us.end(), 0.0);
  const double mean = sum / n;
  double sq = 0.0;
  for (int64_t v : values_us)
    sq += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  s.mean_us = std::llround(mean);
  s.stddev_us = std::sqrt(sq / n);
  s.median_us = NearestRank(values_us, 0.50);
  s.p25_us = NearestRank(values_us, 0.25);
  s.p75_us = NearestRank(values_us, 0.75);
  s.max_us = values_us.back();
  return s;
}

std::vector<CdfPoint> ComputeCdf(std::vector<int64_t> values_us) {
  std::vector<CdfPoint> cdf;
  std::sort(values_us.begin(), values_us.end());
  const double n = static_cast<double>(values_us.size());
  for (size_t i = 0; i < values_us.size(); ++i) {
    if (i + 1 < values_us.size() && values_us[i + 1] == values_us[i])
      continue;
    cdf.push_back({values_us[i], static_cast<double>(i + 1) / n});
  }
  return cdf;
}

RunSummary Summarize(const std::vector<FrameRecord>& frames,
                     double qos_budget_s) {
  RunSummary s;
  s.qos_budget_s = qos_budget_s;
  const int64_t budget_us = ToMicros(qos_budget_s);
  std::vector<int64_t> e2e, rtt, det;
  size_t violations = 0;
  for (const FrameRecord& f : frames) {
    s.detection_jobs += f.detection.has_value();
    s.navigation_jobs += f.navigation.has_value();
    s.vlm_jobs += f.vlm.has_value();
    s.rtt_derived = s.rtt_derived || f.rtt_derived;
    if (f.stream_id != kPrimaryStream) {
      ++s.secondary_frames;
      continue;
    }
    ++s.primary_frames;
    switch (f.outcome) {
      case FrameOutcome::kLost:
        ++s.lost_frames;
        break;
      case FrameOutcome::kExpired:
        ++s.expired_frames;
        break;
      case FrameOutcome::kStaleDropped:
        ++s.stale_dropped;
        break;
      case FrameOutcome::kOk:
        break;
    }
    const auto latency = E2eLatency(f);
    if (f.outcome != FrameOutcome::kOk || !latency)
      continue;
    const int64_t e = ToMicros(*f.feedback_delivery_time) -
                      ToMicros(f.capture_time);
    const int64_t d = ToMicros(f.detection->finish) -
                      ToMicros(f.detection->enqueue);
    e2e.push_back(e);
    det.push_back(d);
    rtt.push_back(e - d);
    if (e > budget_us)
      ++violations;
  }
  s.completed_detections = e2e.size();
  s.frame_loss_fraction =
      s.primary_frames == 0
          ? 1.0
          : 1.0 - static_cast<double>(s.completed_detections) /
                      static_cast<double>(s.primary_frames);
  if (s.completed_detections == 0)
    s.frame_loss_fraction = 1.0;
  s.violation_fraction =
      e2e.empty() ? 0.0
                  : static_cast<double>(violations) /
                        static_cast<double>(e2e.size());
  s.e2e_cdf = ComputeCdf(e2e);
  s.e2e = ComputeStats(std::move(e2e));
  s.rtt = ComputeStats(std::move(rtt));
  s.detection_time = ComputeStats(std::move(det));
  s.jitter_us = s.rtt.stddev_us;
  return s;
}

std::string FramesCsv(const std::vector<FrameRecord>& frames) {
  std::ostringstream out;
  out << "stream_id,frame_seq,capture_us,size,resolution,keyframe,"
         "server_completion_us,det_enqueue_us,det_start_us,det_finish_us,"
         "nav_finish_us,vlm_finish_us,result_delivery_us,e2e_us,rtt_us,"
         "outcome,rtt_derived\n";
  for (const FrameRecord& f : frames) {
    out << f.stream_id << ',' << f.frame_seq << ','
        << ToMicros(f.capture_time) << ',' << f.size << ','
        << f.resolution.ToString() << ',' << (f.is_keyframe ? 1 : 0) << ','
        << OptMicros(f.server_completion_time) << ',';
    if (f.detection)
      out << ToMicros(f.detection->enqueue) << ','
          << ToMicros(f.detection->start) << ','
          << ToMicros(f.detection->finish) << ',';
    else
      out << ",,,";
    out << (f.navigation ? std::to_string(ToMicros(f.navigation->finish))
                         : std::string())
        << ','
        << (f.vlm ? std::to_string(ToMicros(f.vlm->finish)) : std::string())
        << ',' << OptMicros(f.feedback_delivery_time) << ',';
    const bool complete =
        f.outcome == FrameOutcome::kOk && E2eLatency(f).has_value();
    if (complete) {
      const int64_t e = ToMicros(*f.feedback_delivery_time) -
                        ToMicros(f.capture_time);
      const int64_t d = ToMicros(f.detection->finish) -
                        ToMicros(f.detection->enqueue);
      out << e << ',' << (e - d) << ',';
    } else {
      out << ",,";
    }
    out << OutcomeName(f.outcome) << ',' << (f.rtt_derived ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string EpochsCsv(const std::vector<EpochRecord>& epochs) {
  std::ostringstream out;
  out << "epoch,start_us,end_us,max_capacity_bps,estimate_bps,"
         "throughput_bps,no_data,link_prediction_bps,prediction_bps,"
         "encoder_bitrate_bps,secondary_bitrate_bps,resolution,"
         "secondary_active\n";
  for (const EpochRecord& e : epochs) {
    out << e.epoch_index << ',' << ToMicros(e.start_time) << ','
        << ToMicros(e.end_time) << ',' << std::llround(e.max_capacity_bps)
        << ',' << std::llround(e.estimate_bps) << ','
        << std::llround(e.throughput_bps) << ',' << (e.no_data ? 1 : 0) << ','
        << OptRate(e.link_prediction_bps) << ',' << OptRate(e.prediction_bps)
        << ',' << OptRate(e.encoder_bitrate_bps) << ','
        << OptRate(e.secondary_bitrate_bps) << ','
        << (e.resolution ? e.resolution->ToString() : std::string()) << ','
        << (e.secondary_active ? (*e.secondary_active ? "1" : "0") : "")
        << '\n';
  }
  return out.str();
}

std::string SummaryJson(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario;
  j["adaptation_enabled"] = s.adaptation_enabled;
  j["seed"] = s.seed;
  j["qos_budget_us"] = ToMicros(s.qos_budget_s);
  j["primary_frames"] = s.primary_frames;
  j["secondary_frames"] = s.secondary_frames;
  j["completed_detections"] = s.completed_detections;
  j["lost_frames"] = s.lost_frames;
  j["expired_frames"] = s.expired_frames;
  j["stale_dropped"] = s.stale_dropped;
  j["frame_loss_fraction"] = s.frame_loss_fraction;
  j["violation_fraction"] = s.violation_fraction;
  j["rtt"] = StatsJson(s.rtt);
  j["e2e"] = StatsJson(s.e2e);
  j["detection_time"] = StatsJson(s.detection_time);
  j["jitter_us"] = s.jitter_us;
  j["detection_jobs"] = s.detection_jobs;
  j["navigation_jobs"] = s.navigation_jobs;
  j["vlm_jobs"] = s.vlm_jobs;
  j["stale_feedback"] = s.stale_feedback;
  j["rtt_derived"] = s.rtt_derived;
  auto cdf = nlohmann::ordered_json::array();
  for (const CdfPoint& p : s.e2e_cdf)
    cdf.push_back({p.latency_us, p.fraction});
  j["e2e_cdf"] = std::move(cdf);
  return j.dump(2) + "\n";
}

void ExportRun(const std::filesystem::path& dir, const RunSummary& summary,
               const std::vector<FrameRecord>& frames,
               const std::vector<EpochRecord>& epochs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create " + dir.string() + ": " + ec.message());
  WriteFile(dir / "frames.csv", FramesCsv(frames));
  WriteFile(dir / "epochs.csv", EpochsCsv(epochs));
  WriteFile(dir / "summary.json", SummaryJson(summary));
}

}  // namespace vidlink
