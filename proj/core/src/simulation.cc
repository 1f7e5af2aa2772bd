#include "vidlink/simulation.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>
#include <utility>

#include "vidlink/controller.h"
#include "vidlink/edge.h"
#include "vidlink/estimator.h"
#include "vidlink/media.h"
#include "vidlink/netem.h"
#include "vidlink/transport.h"

namespace vidlink {
namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

uint64_t DeriveSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

StreamConfig PrimaryConfig(const Scenario& s) {
  StreamConfig c = s.primary;
  if (!s.adaptation_enabled) {
    c.target_bitrate_bps = s.fixed.bitrate_bps;
    c.fps = s.fixed.fps;
    c.resolution = s.fixed.resolution;
  }
  return c;
}

class Simulator {
 public:
  explicit Simulator(const Scenario& s)
      : s_(s),
        primary_config_(PrimaryConfig(s)),
        primary_(primary_config_, DeriveSeed(s.seed, 0)),
        secondary_(s.secondary, DeriveSeed(s.seed, 1)),
        link_(s.capacity, s.link),
        reassembler_(s.reassembly_expiry),
        estimator_(s.estimator, 0.0),
        controller_(s.controller),
        pool_(s.edge, DeriveSeed(s.seed, 2)) {
    s_.Validate();
    const double n = std::ceil(s_.run_length / s_.epoch_length() - 1e-9);
    epoch_count_ = static_cast<uint32_t>(std::max(1.0, n));
    out_.epochs.reserve(epoch_count_);
    for (uint32_t i = 0; i < epoch_count_; ++i) {
      EpochRecord e;
      e.epoch_index = i;
      e.start_time = i * s_.epoch_length();
      e.end_time = estimator_.EpochEnd(i);
      e.max_capacity_bps = s_.capacity.MaxOver(e.start_time, e.end_time);
      out_.epochs.push_back(e);
    }
    primary_fps_ = static_cast<int>(std::lround(primary_config_.fps));
    if (s_.adaptation_enabled)
      Apply(controller_.Decide(0.0));
  }

  RunOutput Run() {
    while (true) {
      const double t = NextEventTime();
      if (t == kNever || t > s_.run_length + kDrainTime)
        break;
      Step(t);
    }
    out_.summary = Summarize(out_.frames, s_.qos_budget);
    out_.summary.scenario = s_.name;
    out_.summary.adaptation_enabled = s_.adaptation_enabled;
    out_.summary.seed = s_.seed;
    out_.summary.stale_feedback = controller_.predictor().stale_messages();
    out_.packets_offered = link_.offered();
    out_.packets_dropped = link_.dropped();
    return std::move(out_);
  }

 private:
  struct Paced {
    double time;
    MediaPacket packet;
  };

  double PrimaryCaptureTime(uint32_t seq) const {
    return primary_config_.start_offset + seq / primary_config_.fps;
  }
  double SecondaryTickTime(uint32_t k) const {
    return s_.secondary.start_offset + k / s_.secondary.fps;
  }

  double NextEventTime() const {
    double t = std::min(link_.NextDeliveryTime(), pool_.NextEventTime());
    if (epochs_done_ < epoch_count_)
      t = std::min(t, estimator_.EpochEnd(epochs_done_));
    if (!feedback_.empty())
      t = std::min(t, feedback_.front().first);
    if (!paced_.empty())
      t = std::min(t, paced_.front().time);
    if (const double c = PrimaryCaptureTime(next_primary_); c < s_.run_length)
      t = std::min(t, c);
    if (const double c = SecondaryTickTime(next_secondary_); c < s_.run_length)
      t = std::min(t, c);
    return t;
  }

  void Step(double t) {
    // 1. Deliveries at the server.
    for (const LinkEvent& ev : link_.AdvanceTo(t))
      OnDelivered(ev);
    HandleJobs(pool_.AdvanceTo(t));

    // 2. Epoch finalization.
    bool tick = false;
    if (epochs_done_ < epoch_count_ &&
        t >= estimator_.EpochEnd(epochs_done_)) {
      FinalizeEpoch(t);
      tick = true;
    }

    // 3. Feedback delivery.
    bool fed = false;
    while (!feedback_.empty() && feedback_.front().first <= t) {
      const FeedbackMessage msg = feedback_.front().second;
      feedback_.pop_front();
      if (s_.adaptation_enabled && controller_.OnFeedback(msg, t)) {
        fed = true;
        last_fed_epoch_ = msg.epoch_index;
      }
    }

    // 4. Controller decision.
    if (s_.adaptation_enabled && (fed || tick)) {
      Apply(controller_.Decide(t));
      if (fed)
        TraceDecision(*last_fed_epoch_);
    }

    // 5. Frame generation and sending.
    if (next_primary_ < kMaxFrames && PrimaryCaptureTime(next_primary_) <= t &&
        PrimaryCaptureTime(next_primary_) < s_.run_length)
      SendPrimary(t);
    if (SecondaryTickTime(next_secondary_) <= t &&
        SecondaryTickTime(next_secondary_) < s_.run_length)
      SecondaryTick(t);
    while (!paced_.empty() && paced_.front().time <= t) {
      Offer(paced_.front().packet, t);
      paced_.pop_front();
    }
  }

  void Apply(const AdaptationDecision& d) {
    primary_.SetTarget(d.encoder_bitrate_bps, d.resolution);
    secondary_on_ = d.secondary_active && d.secondary_bitrate_bps > 0.0;
    if (secondary_on_)
      secondary_.SetTarget(d.secondary_bitrate_bps, s_.secondary.resolution);
  }

  void TraceDecision(uint32_t epoch) {
    if (epoch >= out_.epochs.size())
      return;
    EpochRecord& e = out_.epochs[epoch];
    const RatePrediction& p = controller_.last_prediction();
    const AdaptationDecision& d = controller_.last_decision();
    e.link_prediction_bps = p.link_bps;
    e.prediction_bps = p.budget_bps;
    e.encoder_bitrate_bps = d.encoder_bitrate_bps;
    e.secondary_bitrate_bps = d.secondary_bitrate_bps;
    e.resolution = d.resolution;
    e.secondary_active = d.secondary_active;
  }

  void FinalizeEpoch(double t) {
    const RateEstimate est = estimator_.FinalizeEpoch(t);
    EpochRecord& e = out_.epochs[est.epoch_index];
    e.estimate_bps = est.no_data ? 0.0 : est.estimate_bps;
    e.throughput_bps = est.throughput_bps;
    e.no_data = est.no_data;
    feedback_.emplace_back(link_.FeedbackDeliveryTime(kFeedbackMessageSize, t),
                           estimator_.ToFeedback(est, t));
    ++epochs_done_;
    for (const ExpiredFrame& x : reassembler_.Expire(t)) {
      const size_t idx = RecordIndex(x.stream_id, x.frame_seq);
      if (!had_drop_[idx])
        out_.frames[idx].outcome = FrameOutcome::kExpired;
    }
  }

  size_t NewRecord(const FrameDescriptor& f) {
    FrameRecord r;
    r.stream_id = f.stream_id;
    r.frame_seq = f.frame_seq;
    r.capture_time = f.capture_time;
    r.size = f.size;
    r.resolution = f.resolution;
    r.is_keyframe = f.is_keyframe;
    out_.frames.push_back(r);
    had_drop_.push_back(false);
    const size_t idx = out_.frames.size() - 1;
    index_[{f.stream_id, f.frame_seq}] = idx;
    return idx;
  }

  size_t RecordIndex(int stream, uint32_t seq) const {
    return index_.at({stream, seq});
  }

  uint8_t ExtraFlags() const {
    return secondary_on_ ? kFlagSecondaryActive : 0;
  }

  void SendPrimary(double t) {
    const FrameDescriptor f = primary_.Encode(next_primary_++);
    NewRecord(f);
    for (const MediaPacket& p : Packetize(f, s_.mtu, ExtraFlags()))
      Offer(p, t);
  }

  void SecondaryTick(double t) {
    const uint32_t k = next_secondary_++;
    if (!secondary_on_)
      return;
    const FrameDescriptor f = secondary_.Encode(k);
    NewRecord(f);
    const std::vector<MediaPacket> packets =
        Packetize(f, s_.mtu, kFlagSecondaryActive);
    const double spacing = 1.0 / s_.secondary.fps / packets.size();
    for (size_t i = 0; i < packets.size(); ++i)
      paced_.push_back({t + i * spacing, packets[i]});
  }

  void Offer(const MediaPacket& p, double t) {
    const size_t bytes = p.wire_size();
    if (s_.adaptation_enabled)
      controller_.OnPacketSent(bytes, t);
    const BottleneckLink::OfferResult r = link_.Offer(bytes, t);
    if (r.drop) {
      const size_t idx = RecordIndex(p.stream_id, p.frame_seq);
      had_drop_[idx] = true;
      out_.frames[idx].outcome = FrameOutcome::kLost;
      return;
    }
    in_flight_.emplace(r.packet_id, p);
  }

  void OnDelivered(const LinkEvent& ev) {
    auto node = in_flight_.extract(ev.packet_id);
    const MediaPacket& p = node.mapped();
    const bool back_to_back =
        p.stream_id == kPrimaryStream && p.fragment_index > 0 &&
        last_delivered_ &&
        last_delivered_->stream_id == p.stream_id &&
        last_delivered_->frame_seq == p.frame_seq &&
        last_delivered_->fragment_index + 1 == p.fragment_index;
    estimator_.Observe(ev.bytes, ev.deliver_time, back_to_back);
    last_delivered_ = p;
    if (auto arrival = reassembler_.OnPacket(p, ev.deliver_time))
      OnFrame(*arrival, ev.deliver_time);
  }

  void OnFrame(const FrameArrival& arrival, double t) {
    const size_t idx = RecordIndex(arrival.stream_id, arrival.frame_seq);
    out_.frames[idx].server_completion_time = arrival.completion_time;
    const bool secondary_active = arrival.flags & kFlagSecondaryActive;
    for (const InferenceJob& job :
         RouteFrame(arrival, secondary_active, primary_fps_))
      HandleJobs(pool_.Enqueue(job, t));
  }

  void HandleJobs(const std::vector<JobEvent>& events) {
    for (const JobEvent& ev : events) {
      const InferenceJob& job = ev.job;
      FrameRecord& r = out_.frames[RecordIndex(job.stream_id, job.frame_seq)];
      if (ev.kind == JobEvent::Kind::kStaleDropped) {
        r.outcome = FrameOutcome::kStaleDropped;
        continue;
      }
      const JobTimes times{job.enqueue_time, job.start_time, job.finish_time};
      switch (job.service) {
        case ServiceKind::kDetection:
          r.detection = times;
          r.feedback_delivery_time =
              link_.FeedbackDeliveryTime(kResultMessageSize, job.finish_time);
          r.outcome = FrameOutcome::kOk;
          break;
        case ServiceKind::kNavigation:
          r.navigation = times;
          break;
        case ServiceKind::kVlm:
          r.vlm = times;
          break;
      }
      if (r.stream_id == kSecondaryStream)
        r.outcome = FrameOutcome::kOk;
    }
  }

  static constexpr uint32_t kMaxFrames = std::numeric_limits<uint32_t>::max();

  Scenario s_;
  StreamConfig primary_config_;
  Encoder primary_;
  Encoder secondary_;
  BottleneckLink link_;
  Reassembler reassembler_;
  LinkRateEstimator estimator_;
  AdaptationController controller_;
  WorkerPool pool_;

  RunOutput out_;
  std::vector<bool> had_drop_;
  std::map<std::pair<int, uint32_t>, size_t> index_;
  std::unordered_map<uint64_t, MediaPacket> in_flight_;
  std::deque<std::pair<double, FeedbackMessage>> feedback_;
  std::deque<Paced> paced_;
  std::optional<MediaPacket> last_delivered_;
  std::optional<uint32_t> last_fed_epoch_;

  uint32_t epoch_count_ = 0;
  uint32_t epochs_done_ = 0;
  uint32_t next_primary_ = 0;
  uint32_t next_secondary_ = 0;
  int primary_fps_ = 30;
  bool secondary_on_ = false;
};

}  // namespace

RunOutput RunSim(const Scenario& scenario) {
  return Simulator(scenario).Run();
}

RunOutput RunSimAndExport(const Scenario& scenario,
                          const std::filesystem::path& out_dir) {
  RunOutput out = RunSim(scenario);
  ExportRun(out_dir, out.summary, out.frames, out.epochs);
  return out;
}

}  // namespace vidlink
