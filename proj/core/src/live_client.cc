#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "udp_socket.h"
#include "vidlink/controller.h"
#include "vidlink/errors.h"
#include "vidlink/live.h"
#include "vidlink/media.h"
#include "vidlink/shaper.h"
#include "vidlink/transport.h"

namespace vidlink {
namespace {

using SteadyClock = std::chrono::steady_clock;
constexpr double kLiveDrain = 2.0;
constexpr double kIdle = std::numeric_limits<double>::infinity();

struct PacketSent {
  size_t bytes;
  double time;
};
struct FeedbackArrived {
  FeedbackMessage message;
  double time;
};
using ControlEvent = std::variant<PacketSent, FeedbackArrived>;

struct FrameSent {
  FrameDescriptor frame;
};
struct ResultArrived {
  ResultMessage result;
  double time;
};
struct DecisionTrace {
  uint32_t epoch;
  RatePrediction prediction;
  AdaptationDecision decision;
};
using MetricsEvent =
    std::variant<FrameSent, ResultArrived, FeedbackArrived, DecisionTrace>;

class LiveClient {
 public:
  LiveClient(const Scenario& s, const Endpoint& peer)
      : s_(s),
        peer_(peer),
        socket_(UdpSocket::ForPeer(peer, &peer_addr_)),
        control_(s.live.queue_capacity),
        decisions_(16),
        metrics_(s.live.queue_capacity) {
    s_.Validate();
  }

  RunOutput Run() {
    start_ = SteadyClock::now();
    std::thread metrics([this] { MetricsLoop(); });
    std::thread control([this] { ControlLoop(); });
    std::thread receiver([this] { ReceiveLoop(); });
    std::thread sender([this] { SendLoop(); });

    sender.join();
    receiver.join();
    control_.Close();
    control.join();
    metrics_.Close();
    metrics.join();

    if (unreachable_) {
      std::ostringstream msg;
      msg << "peer " << peer_.ToString() << " unreachable: no response within "
          << s_.live.unreachable_timeout << " s";
      throw IoError(msg.str());
    }
    if (!failure_.empty())
      throw IoError(failure_);
    out_.summary = Summarize(out_.frames, s_.qos_budget);
    out_.summary.scenario = s_.name;
    out_.summary.adaptation_enabled = s_.adaptation_enabled;
    out_.summary.seed = s_.seed;
    out_.summary.rtt_derived = true;
    return std::move(out_);
  }

 private:
  double Now() const {
    return std::chrono::duration<double>(SteadyClock::now() - start_).count();
  }

  void Fail(const std::string& what) {
    std::lock_guard lock(failure_mu_);
    if (failure_.empty())
      failure_ = what;
    abort_ = true;
  }

  void SleepUntil(double t) const {
    std::this_thread::sleep_until(
        start_ + std::chrono::duration_cast<SteadyClock::duration>(
                     std::chrono::duration<double>(t)));
  }

  // Send activity. Encodes frames and writes the shaped datagrams.
  void SendLoop() {
    try {
      SendLoopImpl();
    } catch (const std::exception& e) {
      Fail(e.what());
    }
    send_done_ = true;
  }

  void SendLoopImpl() {
    StreamConfig primary_config = s_.primary;
    if (!s_.adaptation_enabled) {
      primary_config.target_bitrate_bps = s_.fixed.bitrate_bps;
      primary_config.fps = s_.fixed.fps;
      primary_config.resolution = s_.fixed.resolution;
    }
    Encoder primary(primary_config, s_.seed);
    Encoder secondary(s_.secondary, s_.seed + 1);
    bool secondary_on = false;
    std::optional<TokenBucketShaper> shaper;
    if (s_.live.emulate_link)
      shaper.emplace(s_.capacity, s_.link.queue_limit, s_.link.prop_delay_up,
                     s_.mtu);
    std::unordered_map<uint64_t, std::vector<uint8_t>> shaped;
    std::deque<std::pair<double, std::vector<uint8_t>>> delay_line;
    std::deque<std::pair<double, MediaPacket>> paced;
    uint32_t next_primary = 0;
    uint32_t next_secondary = 0;

    auto primary_time = [&](uint32_t k) {
      return primary_config.start_offset + k / primary_config.fps;
    };
    auto secondary_time = [&](uint32_t k) {
      return s_.secondary.start_offset + k / s_.secondary.fps;
    };
    auto emit = [&](const MediaPacket& p, double now) {
      std::vector<uint8_t> bytes = Encode(p);
      control_.Push(PacketSent{bytes.size(), now});
      if (!shaper) {
        socket_.SendTo(bytes, peer_addr_);
        return;
      }
      if (auto id = shaper->Offer(bytes.size(), now))
        shaped.emplace(*id, std::move(bytes));
    };

    while (!abort_) {
      const double now = Now();
      while (auto d = decisions_.TryPop()) {
        primary.SetTarget(d->encoder_bitrate_bps, d->resolution);
        secondary_on = d->secondary_active && d->secondary_bitrate_bps > 0.0;
        if (secondary_on)
          secondary.SetTarget(d->secondary_bitrate_bps,
                              s_.secondary.resolution);
      }
      while (primary_time(next_primary) <= now &&
             primary_time(next_primary) < s_.run_length) {
        const FrameDescriptor f = primary.Encode(next_primary++);
        metrics_.Push(FrameSent{f});
        const uint8_t flags = secondary_on ? kFlagSecondaryActive : 0;
        for (const MediaPacket& p : Packetize(f, s_.mtu, flags))
          emit(p, now);
      }
      while (secondary_time(next_secondary) <= now &&
             secondary_time(next_secondary) < s_.run_length) {
        const uint32_t k = next_secondary++;
        if (!secondary_on)
          continue;
        const FrameDescriptor f = secondary.Encode(k);
        metrics_.Push(FrameSent{f});
        const auto packets = Packetize(f, s_.mtu, kFlagSecondaryActive);
        const double spacing = 1.0 / s_.secondary.fps / packets.size();
        for (size_t i = 0; i < packets.size(); ++i)
          paced.emplace_back(now + i * spacing, packets[i]);
      }
      while (!paced.empty() && paced.front().first <= now) {
        emit(paced.front().second, now);
        paced.pop_front();
      }
      if (shaper) {
        for (const auto& r : shaper->AdvanceTo(now)) {
          auto it = shaped.find(r.id);
          delay_line.emplace_back(r.due_time, std::move(it->second));
          shaped.erase(it);
        }
      }
      while (!delay_line.empty() && delay_line.front().first <= now) {
        socket_.SendTo(delay_line.front().second, peer_addr_);
        delay_line.pop_front();
      }

      double wake = kIdle;
      if (primary_time(next_primary) < s_.run_length)
        wake = std::min(wake, primary_time(next_primary));
      if (secondary_time(next_secondary) < s_.run_length)
        wake = std::min(wake, secondary_time(next_secondary));
      if (!paced.empty())
        wake = std::min(wake, paced.front().first);
      if (shaper)
        wake = std::min(wake, shaper->NextWakeTime());
      if (!delay_line.empty())
        wake = std::min(wake, delay_line.front().first);
      if (wake == kIdle)
        break;
      // Wake at least every 10 ms.
      SleepUntil(std::min(wake, Now() + 0.010));
    }
  }

  // Receive activity: feedback and result datagrams from the server.
  void ReceiveLoop() {
    try {
      std::vector<uint8_t> buffer(2048);
      bool heard = false;
      while (!abort_) {
        const double now = Now();
        if (!heard && now > s_.live.unreachable_timeout) {
          unreachable_ = true;
          abort_ = true;
          break;
        }
        if (send_done_ && now > s_.run_length + kLiveDrain)
          break;
        const auto n = socket_.ReceiveFrom(buffer, 0.02, nullptr);
        if (!n)
          continue;
        const double t = Now();
        const std::span<const uint8_t> data(buffer.data(), *n);
        if (*n == kFeedbackMessageSize) {
          heard = true;
          const FeedbackArrived fb{DecodeFeedbackMessage(data), t};
          control_.Push(fb);
          metrics_.Push(fb);
        } else if (*n == kResultMessageSize) {
          heard = true;
          metrics_.Push(ResultArrived{DecodeResultMessage(data), t});
        }
      }
    } catch (const std::exception& e) {
      Fail(e.what());
    }
  }

  // Feedback activity: the adaptation controller.
  void ControlLoop() {
    AdaptationController controller(s_.controller);
    const double epoch = s_.epoch_length();
    double next_tick = epoch;
    auto publish = [&](double t, std::optional<uint32_t> epoch_index) {
      if (!s_.adaptation_enabled)
        return;
      const AdaptationDecision d = controller.Decide(t);
      decisions_.PushReplacingOldest(d);
      if (epoch_index)
        metrics_.Push(
            DecisionTrace{*epoch_index, controller.last_prediction(), d});
    };
    publish(0.0, std::nullopt);
    while (true) {
      const auto deadline =
          start_ + std::chrono::duration_cast<SteadyClock::duration>(
                       std::chrono::duration<double>(next_tick));
      auto ev = control_.PopUntil(deadline);
      if (!ev) {
        if (control_.closed())
          break;
        if (Now() >= next_tick) {
          publish(next_tick, std::nullopt);
          next_tick += epoch;
        }
        continue;
      }
      if (const auto* sent = std::get_if<PacketSent>(&*ev)) {
        controller.OnPacketSent(sent->bytes, sent->time);
      } else {
        const auto& fb = std::get<FeedbackArrived>(*ev);
        if (s_.adaptation_enabled &&
            controller.OnFeedback(fb.message, fb.time))
          publish(fb.time, fb.message.epoch_index);
      }
    }
  }

  // Metrics activity: assembles frame and epoch records.
  void MetricsLoop() {
    const uint32_t epochs = static_cast<uint32_t>(
        std::max(1.0, std::ceil(s_.run_length / s_.epoch_length() - 1e-9)));
    for (uint32_t i = 0; i < epochs; ++i) {
      EpochRecord e;
      e.epoch_index = i;
      e.start_time = i * s_.epoch_length();
      e.end_time = (i + 1) * s_.epoch_length();
      e.max_capacity_bps = s_.capacity.MaxOver(e.start_time, e.end_time);
      e.no_data = true;
      out_.epochs.push_back(e);
    }
    std::map<std::pair<int, uint32_t>, size_t> index;
    while (auto ev = metrics_.Pop()) {
      if (const auto* sent = std::get_if<FrameSent>(&*ev)) {
        FrameRecord r;
        r.stream_id = sent->frame.stream_id;
        r.frame_seq = sent->frame.frame_seq;
        r.capture_time = sent->frame.capture_time;
        r.size = sent->frame.size;
        r.resolution = sent->frame.resolution;
        r.is_keyframe = sent->frame.is_keyframe;
        r.rtt_derived = true;
        index[{r.stream_id, r.frame_seq}] = out_.frames.size();
        out_.frames.push_back(r);
      } else if (const auto* res = std::get_if<ResultArrived>(&*ev)) {
        OnResult(*res, index);
      } else if (const auto* fb = std::get_if<FeedbackArrived>(&*ev)) {
        if (fb->message.epoch_index < out_.epochs.size()) {
          EpochRecord& e = out_.epochs[fb->message.epoch_index];
          e.estimate_bps = static_cast<double>(fb->message.estimate_bps);
          e.no_data = fb->message.estimate_bps == 0;
        }
      } else {
        const auto& tr = std::get<DecisionTrace>(*ev);
        if (tr.epoch < out_.epochs.size()) {
          EpochRecord& e = out_.epochs[tr.epoch];
          e.link_prediction_bps = tr.prediction.link_bps;
          e.prediction_bps = tr.prediction.budget_bps;
          e.encoder_bitrate_bps = tr.decision.encoder_bitrate_bps;
          e.secondary_bitrate_bps = tr.decision.secondary_bitrate_bps;
          e.resolution = tr.decision.resolution;
          e.secondary_active = tr.decision.secondary_active;
        }
      }
    }
  }

  void OnResult(const ResultArrived& res,
                const std::map<std::pair<int, uint32_t>, size_t>& index) {
    const auto it = index.find({res.result.stream_id, res.result.frame_seq});
    if (it == index.end())
      return;
    FrameRecord& r = out_.frames[it->second];
    const double hold = MicrosToSeconds(res.result.server_hold_us);
    const double rtt = (res.time - r.capture_time) - hold;
    // One-way times are taken as half the RTT.
    const double arrival = r.capture_time + rtt / 2.0;
    const JobTimes times{arrival, arrival, arrival + hold};
    switch (static_cast<ServiceKind>(res.result.service)) {
      case ServiceKind::kDetection:
        r.detection = times;
        r.feedback_delivery_time = res.time;
        r.server_completion_time = arrival;
        r.outcome = FrameOutcome::kOk;
        break;
      case ServiceKind::kNavigation:
        r.navigation = times;
        break;
      case ServiceKind::kVlm:
        r.vlm = times;
        break;
    }
    if (r.stream_id == kSecondaryStream) {
      r.outcome = FrameOutcome::kOk;
      r.server_completion_time = arrival;
    }
  }

  Scenario s_;
  Endpoint peer_;
  SocketAddress peer_addr_;
  UdpSocket socket_;
  SteadyClock::time_point start_;

  BoundedQueue<ControlEvent> control_;
  BoundedQueue<AdaptationDecision> decisions_;
  BoundedQueue<MetricsEvent> metrics_;

  std::atomic<bool> abort_{false};
  std::atomic<bool> send_done_{false};
  std::atomic<bool> unreachable_{false};
  std::mutex failure_mu_;
  std::string failure_;
  RunOutput out_;
};

}  // namespace

RunOutput RunLiveClient(const Scenario& scenario, const Endpoint& peer) {
  return LiveClient(scenario, peer).Run();
}

}  // namespace vidlink
