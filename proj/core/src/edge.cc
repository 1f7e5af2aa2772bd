#include "vidlink/edge.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "vidlink/errors.h"

namespace vidlink {
namespace {

double UnitUniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller on our own uniforms keeps samples identical across standard
// library implementations.
double StandardNormal(std::mt19937_64& rng) {
  const double u1 = 1.0 - UnitUniform(rng);  // (0, 1]
  const double u2 = UnitUniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

size_t Index(ServiceKind kind) {
  return static_cast<size_t>(kind);
}

}  // namespace

std::string_view ServiceName(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::kDetection:
      return "detection";
    case ServiceKind::kNavigation:
      return "navigation";
    case ServiceKind::kVlm:
      return "vlm";
  }
  return "unknown";
}

ServiceTimeModel ServiceTimeModel::Deterministic(double seconds) {
  return {Kind::kDeterministic, seconds, 0.0};
}

ServiceTimeModel ServiceTimeModel::LogNormal(double mean_s, double sigma) {
  return {Kind::kLogNormal, mean_s, sigma};
}

ServiceTimeModel ServiceTimeModel::Parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string kind;
  in >> kind;
  ServiceTimeModel m;
  if (kind == "deterministic") {
    m.kind = Kind::kDeterministic;
    if (!(in >> m.mean_s))
      throw ConfigError("deterministic model needs a duration in seconds");
  } else if (kind == "lognormal") {
    m.kind = Kind::kLogNormal;
    if (!(in >> m.mean_s >> m.sigma))
      throw ConfigError("lognormal model needs mean seconds and sigma");
  } else {
    throw ConfigError("unknown service time model '" + kind +
                      "' (expected deterministic or lognormal)");
  }
  std::string extra;
  if (in >> extra)
    throw ConfigError("trailing text in service time model: " + extra);
  m.Validate();
  return m;
}

std::string ServiceTimeModel::ToString() const {
  std::ostringstream out;
  if (kind == Kind::kDeterministic)
    out << "deterministic " << mean_s;
  else
    out << "lognormal " << mean_s << " " << sigma;
  return out.str();
}

void ServiceTimeModel::Validate() const {
  if (!(mean_s > 0.0) || !std::isfinite(mean_s))
    throw ConfigError("service time must be positive");
  if (kind == Kind::kLogNormal && !(sigma >= 0.0))
    throw ConfigError("lognormal sigma must be >= 0");
}

double ServiceTimeModel::Sample(std::mt19937_64& rng) const {
  if (kind == Kind::kDeterministic)
    return mean_s;
  const double mu = std::log(mean_s) - 0.5 * sigma * sigma;
  return std::exp(mu + sigma * StandardNormal(rng));
}

const ServiceTimeModel& PoolConfig::model(ServiceKind kind) const {
  switch (kind) {
    case ServiceKind::kDetection:
      return detection;
    case ServiceKind::kNavigation:
      return navigation;
    case ServiceKind::kVlm:
      return vlm;
  }
  return detection;
}

void PoolConfig::Validate() const {
  if (worker_count < 1)
    throw ConfigError("worker_count must be >= 1");
  detection.Validate();
  navigation.Validate();
  vlm.Validate();
}

std::vector<InferenceJob> RouteFrame(const FrameArrival& arrival,
                                     bool secondary_active, int fps_primary) {
  std::vector<InferenceJob> jobs;
  auto add = [&](ServiceKind kind) {
    InferenceJob job;
    job.service = kind;
    job.stream_id = arrival.stream_id;
    job.frame_seq = arrival.frame_seq;
    job.enqueue_time = arrival.completion_time;
    jobs.push_back(job);
  };
  if (arrival.stream_id == kPrimaryStream) {
    add(ServiceKind::kDetection);
    if (!secondary_active && fps_primary > 0 &&
        arrival.frame_seq % static_cast<uint32_t>(fps_primary) == 0) {
      add(ServiceKind::kNavigation);
      add(ServiceKind::kVlm);
    }
  } else if (arrival.stream_id == kSecondaryStream) {
    add(ServiceKind::kNavigation);
    add(ServiceKind::kVlm);
  } else {
    throw RoutingError("unknown stream id " +
                       std::to_string(arrival.stream_id));
  }
  return jobs;
}

WorkerPool::WorkerPool(PoolConfig config, uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
  config_.Validate();
  workers_.resize(static_cast<size_t>(config_.worker_count));
}

bool WorkerPool::CanServe(size_t worker, ServiceKind kind) const {
  if (workers_.size() == 1)
    return true;
  return (worker == 0) == (kind == ServiceKind::kDetection);
}

bool WorkerPool::ServiceBusy(ServiceKind kind) const {
  for (const Worker& w : workers_)
    if (w.job && w.job->service == kind)
      return true;
  return false;
}

void WorkerPool::Dispatch(double t) {
  for (size_t s = 0; s < kServiceCount; ++s) {
    const auto kind = static_cast<ServiceKind>(s);
    auto& queue = queues_[s];
    if (queue.empty() || ServiceBusy(kind))
      continue;
    // Prefer the worker whose index matches the service, then the lowest free.
    std::optional<size_t> chosen;
    if (s < workers_.size() && !workers_[s].job && CanServe(s, kind))
      chosen = s;
    for (size_t w = 0; !chosen && w < workers_.size(); ++w)
      if (!workers_[w].job && CanServe(w, kind))
        chosen = w;
    if (!chosen)
      continue;
    InferenceJob job = queue.front();
    queue.pop_front();
    job.start_time = t;
    job.finish_time = t + config_.model(kind).Sample(rng_);
    job.worker = static_cast<int>(*chosen);
    workers_[*chosen].job = job;
  }
  max_in_service_ = std::max(max_in_service_, in_service());
}

std::vector<JobEvent> WorkerPool::Enqueue(InferenceJob job, double t) {
  std::vector<JobEvent> events = AdvanceTo(t);
  auto& queue = queues_[Index(job.service)];
  if (config_.stale_drop && job.service == ServiceKind::kDetection) {
    for (InferenceJob& old : queue)
      events.push_back({JobEvent::Kind::kStaleDropped, old});
    queue.clear();
  }
  job.enqueue_time = t;
  queue.push_back(job);
  Dispatch(t);
  return events;
}

std::vector<JobEvent> WorkerPool::AdvanceTo(double t) {
  if (t < clock_)
    throw ClockError("worker pool clock moved backwards");
  std::vector<JobEvent> events;
  while (true) {
    std::optional<size_t> next;
    for (size_t w = 0; w < workers_.size(); ++w) {
      const auto& job = workers_[w].job;
      if (job && job->finish_time <= t &&
          (!next || job->finish_time < workers_[*next].job->finish_time))
        next = w;
    }
    if (!next)
      break;
    InferenceJob done = *workers_[*next].job;
    workers_[*next].job.reset();
    clock_ = done.finish_time;
    events.push_back({JobEvent::Kind::kCompleted, done});
    Dispatch(clock_);
  }
  clock_ = t;
  return events;
}

double WorkerPool::NextEventTime() const {
  double next = std::numeric_limits<double>::infinity();
  for (const Worker& w : workers_)
    if (w.job)
      next = std::min(next, w.job->finish_time);
  return next;
}

size_t WorkerPool::in_service() const {
  size_t n = 0;
  for (const Worker& w : workers_)
    n += w.job.has_value();
  return n;
}

size_t WorkerPool::queued(ServiceKind kind) const {
  return queues_[Index(kind)].size();
}

}  // namespace vidlink
