#ifndef VIDLINK_EDGE_H_
#define VIDLINK_EDGE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vidlink/transport.h"

namespace vidlink {

enum class ServiceKind : uint8_t { kDetection = 0, kNavigation = 1, kVlm = 2 };
inline constexpr size_t kServiceCount = 3;

std::string_view ServiceName(ServiceKind kind);

struct ServiceTimeModel {
  enum class Kind { kDeterministic, kLogNormal };

  Kind kind = Kind::kDeterministic;
  double mean_s = 0.020;
  // Shape of the underlying normal; ignored for deterministic models.
  double sigma = 0.0;

  static ServiceTimeModel Deterministic(double seconds);
  // Log-normal with the given mean (not median).
  static ServiceTimeModel LogNormal(double mean_s, double sigma);
  // "deterministic 0.3" or "lognormal 0.020 0.185".
  static ServiceTimeModel Parse(std::string_view text);
  std::string ToString() const;

  void Validate() const;
  double Sample(std::mt19937_64& rng) const;
};

struct PoolConfig {
  int worker_count = 3;
  // Detection 20 ms mean with an interquartile range of about 5 ms.
  ServiceTimeModel detection = ServiceTimeModel::LogNormal(0.020, 0.185);
  ServiceTimeModel navigation = ServiceTimeModel::Deterministic(0.300);
  ServiceTimeModel vlm = ServiceTimeModel::Deterministic(0.800);
  // Drop a waiting Detection job when a newer one arrives.
  bool stale_drop = true;

  const ServiceTimeModel& model(ServiceKind kind) const;
  void Validate() const;
};

struct InferenceJob {
  ServiceKind service = ServiceKind::kDetection;
  int stream_id = 0;
  uint32_t frame_seq = 0;
  double enqueue_time = 0.0;
  double start_time = 0.0;
  double finish_time = 0.0;
  int worker = -1;
};

struct JobEvent {
  enum class Kind { kCompleted, kStaleDropped };

  Kind kind = Kind::kCompleted;
  InferenceJob job;
};

// Jobs for one completed frame. Primary frames always get Detection, plus
// Navigation and Vlm on every fps-th frame while the secondary stream is off.
// Secondary frames get Navigation and Vlm only. Throws RoutingError for any
// other stream id.
std::vector<InferenceJob> RouteFrame(const FrameArrival& arrival,
                                     bool secondary_active, int fps_primary);

// Event-driven model of the inference server.
//
// Worker 0 serves Detection only. The remaining workers form a shared pool for
// Navigation and Vlm: any free pool worker takes the head of either queue, but
// each of those services runs at most one job at a time so completions stay
// in enqueue order. With the default three workers this is one worker per
// service, with an idle pool worker picking up the other service's backlog.
class WorkerPool {
 public:
  WorkerPool(PoolConfig config, uint64_t seed);

  // Enqueues at time t (>= pool clock). Jobs start immediately when a worker
  // is free. May emit a stale-drop event for an older waiting Detection job.
  std::vector<JobEvent> Enqueue(InferenceJob job, double t);

  // Completes every job finishing at or before t, starting queued jobs as
  // workers free up.
  std::vector<JobEvent> AdvanceTo(double t);
  double NextEventTime() const;

  size_t in_service() const;
  size_t max_in_service() const { return max_in_service_; }
  size_t queued(ServiceKind kind) const;
  const PoolConfig& config() const { return config_; }

 private:
  struct Worker {
    std::optional<InferenceJob> job;
  };

  void Dispatch(double t);
  bool CanServe(size_t worker, ServiceKind kind) const;
  bool ServiceBusy(ServiceKind kind) const;

  PoolConfig config_;
  std::mt19937_64 rng_;
  double clock_ = 0.0;
  std::vector<Worker> workers_;
  std::array<std::deque<InferenceJob>, kServiceCount> queues_;
  size_t max_in_service_ = 0;
};

}  // namespace vidlink

#endif  // VIDLINK_EDGE_H_
