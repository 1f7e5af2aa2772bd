#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <thread>
#include <variant>
#include <vector>

#include "udp_socket.h"
#include "vidlink/edge.h"
#include "vidlink/errors.h"
#include "vidlink/estimator.h"
#include "vidlink/live.h"
#include "vidlink/transport.h"

namespace vidlink {
namespace {

using SteadyClock = std::chrono::steady_clock;

struct Outbound {
  std::vector<uint8_t> bytes;
  SocketAddress to;
};

struct QueuedJob {
  InferenceJob job;
  uint64_t capture_time_us = 0;
  SocketAddress reply_to;
};

struct ServerEvent {
  enum class Kind { kPacket, kFrame, kFeedback, kResult, kStaleDrop };
  Kind kind;
};

double SecondsSince(SteadyClock::time_point start) {
  return std::chrono::duration<double>(SteadyClock::now() - start).count();
}

void RunWorker(const ServiceTimeModel& model, uint64_t seed,
               SteadyClock::time_point start, BoundedQueue<QueuedJob>& jobs,
               BoundedQueue<Outbound>& out, BoundedQueue<ServerEvent>& events) {
  std::mt19937_64 rng(seed);
  while (auto item = jobs.Pop()) {
    const double service = model.Sample(rng);
    std::this_thread::sleep_for(std::chrono::duration<double>(service));
    const double finish = SecondsSince(start);
    ResultMessage r;
    r.frame_seq = item->job.frame_seq;
    r.stream_id = static_cast<uint8_t>(item->job.stream_id);
    r.service = static_cast<uint8_t>(item->job.service);
    r.capture_time_us = item->capture_time_us;
    r.server_hold_us = SecondsToMicros(finish - item->job.enqueue_time);
    out.Push({Encode(r), item->reply_to});
    events.Push({ServerEvent::Kind::kResult});
  }
}

}  // namespace

LiveServerStats RunLiveServer(const Scenario& scenario, const Endpoint& bind,
                              const std::atomic<bool>* stop,
                              double idle_timeout) {
  scenario.Validate();
  UdpSocket socket = UdpSocket::Bind(bind);
  const auto start = SteadyClock::now();
  const size_t cap = scenario.live.queue_capacity;

  BoundedQueue<Outbound> outbound(cap);
  BoundedQueue<ServerEvent> events(cap);
  const PoolConfig& pool = scenario.edge;
  // Detection keeps only the newest waiting frame when stale_drop is set.
  BoundedQueue<QueuedJob> detection(pool.stale_drop ? 1 : cap);
  BoundedQueue<QueuedJob> navigation(cap);
  BoundedQueue<QueuedJob> vlm(cap);

  std::thread sender([&] {
    while (auto msg = outbound.Pop()) {
      try {
        socket.SendTo(msg->bytes, msg->to);
      } catch (const IoError& e) {
        std::cerr << "vidlink server: " << e.what() << "\n";
      }
    }
  });
  LiveServerStats stats;
  std::thread metrics([&] {
    while (auto ev = events.Pop()) {
      switch (ev->kind) {
        case ServerEvent::Kind::kPacket:
          ++stats.packets;
          break;
        case ServerEvent::Kind::kFrame:
          ++stats.frames;
          break;
        case ServerEvent::Kind::kFeedback:
          ++stats.feedback_sent;
          break;
        case ServerEvent::Kind::kResult:
          ++stats.results_sent;
          break;
        case ServerEvent::Kind::kStaleDrop:
          ++stats.stale_dropped;
          break;
      }
    }
  });
  std::array<std::thread, kServiceCount> workers = {
      std::thread(RunWorker, std::cref(pool.detection), scenario.seed + 11,
                  start, std::ref(detection), std::ref(outbound),
                  std::ref(events)),
      std::thread(RunWorker, std::cref(pool.navigation), scenario.seed + 12,
                  start, std::ref(navigation), std::ref(outbound),
                  std::ref(events)),
      std::thread(RunWorker, std::cref(pool.vlm), scenario.seed + 13, start,
                  std::ref(vlm), std::ref(outbound), std::ref(events)),
  };

  auto shutdown = [&] {
    detection.Close();
    navigation.Close();
    vlm.Close();
    for (std::thread& w : workers)
      w.join();
    outbound.Close();
    sender.join();
    events.Close();
    metrics.join();
  };

  try {
    const int fps = static_cast<int>(std::lround(
        scenario.adaptation_enabled ? scenario.primary.fps
                                    : scenario.fixed.fps));
    std::optional<LinkRateEstimator> estimator;
    std::optional<SocketAddress> client;
    Reassembler reassembler(scenario.reassembly_expiry);
    std::optional<MediaPacket> last_packet;
    double last_rx = 0.0;
    uint32_t next_epoch = 0;
    std::vector<uint8_t> buffer(65536);

    auto finalize_due = [&](double now) {
      while (estimator && estimator->EpochEnd(next_epoch) <= now) {
        const double end = estimator->EpochEnd(next_epoch);
        const RateEstimate est = estimator->FinalizeEpoch(end);
        outbound.Push({Encode(estimator->ToFeedback(est, end)), *client});
        events.Push({ServerEvent::Kind::kFeedback});
        ++next_epoch;
        reassembler.Expire(now);
      }
    };

    while (!(stop && stop->load())) {
      double wait = 0.05;
      double now = SecondsSince(start);
      if (estimator)
        wait = std::clamp(estimator->EpochEnd(next_epoch) - now, 0.0, wait);
      SocketAddress from;
      const auto n = socket.ReceiveFrom(buffer, wait, &from);
      now = SecondsSince(start);
      finalize_due(now);
      if (!n) {
        if (client && now - last_rx > idle_timeout)
          break;
        continue;
      }
      MediaPacket packet;
      try {
        packet = DecodeMediaPacket(std::span(buffer.data(), *n));
      } catch (const FramingError&) {
        continue;
      }
      if (!client) {
        client = from;
        estimator.emplace(scenario.estimator, now);
      }
      last_rx = now;
      events.Push({ServerEvent::Kind::kPacket});
      const bool back_to_back =
          packet.stream_id == kPrimaryStream && packet.fragment_index > 0 &&
          last_packet && last_packet->stream_id == packet.stream_id &&
          last_packet->frame_seq == packet.frame_seq &&
          last_packet->fragment_index + 1 == packet.fragment_index;
      estimator->Observe(packet.wire_size(), now, back_to_back);
      last_packet = packet;

      const auto arrival = reassembler.OnPacket(packet, now);
      if (!arrival)
        continue;
      events.Push({ServerEvent::Kind::kFrame});
      const bool secondary_active = arrival->flags & kFlagSecondaryActive;
      for (const InferenceJob& job :
           RouteFrame(*arrival, secondary_active, fps)) {
        QueuedJob q{job, packet.capture_time_us, from};
        q.job.enqueue_time = now;
        switch (job.service) {
          case ServiceKind::kDetection:
            if (!pool.stale_drop)
              detection.Push(q);
            else if (detection.PushReplacingOldest(q))
              events.Push({ServerEvent::Kind::kStaleDrop});
            break;
          case ServiceKind::kNavigation:
            navigation.Push(q);
            break;
          case ServiceKind::kVlm:
            vlm.Push(q);
            break;
        }
      }
    }
  } catch (...) {
    shutdown();
    throw;
  }
  shutdown();
  return stats;
}

}  // namespace vidlink
