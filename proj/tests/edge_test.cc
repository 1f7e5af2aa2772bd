#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "vidlink/edge.h"
#include "vidlink/errors.h"
#include "vidlink/transport.h"

namespace vidlink {
namespace {

FrameArrival Arrival(int stream, uint32_t seq) {
  FrameArrival a;
  a.stream_id = stream;
  a.frame_seq = seq;
  return a;
}

std::multiset<ServiceKind> Services(const std::vector<InferenceJob>& jobs) {
  std::multiset<ServiceKind> out;
  for (const auto& j : jobs)
    out.insert(j.service);
  return out;
}

InferenceJob Job(ServiceKind kind, uint32_t seq) {
  InferenceJob j;
  j.service = kind;
  j.frame_seq = seq;
  return j;
}

PoolConfig DeterministicPool() {
  PoolConfig c;
  c.detection = ServiceTimeModel::Deterministic(0.020);
  c.stale_drop = false;
  return c;
}

std::vector<JobEvent> Drain(WorkerPool& pool) {
  std::vector<JobEvent> out;
  while (std::isfinite(pool.NextEventTime())) {
    auto ev = pool.AdvanceTo(pool.NextEventTime());
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

TEST(RouteFrameTest, EveryFpsthPrimaryFrameFeedsAllServices) {
  using K = ServiceKind;
  EXPECT_EQ(Services(RouteFrame(Arrival(kPrimaryStream, 60), false, 30)),
            (std::multiset<K>{K::kDetection, K::kNavigation, K::kVlm}));
  EXPECT_EQ(Services(RouteFrame(Arrival(kPrimaryStream, 61), false, 30)),
            (std::multiset<K>{K::kDetection}));
}

TEST(RouteFrameTest, SecondaryTakesOverNavigationAndVlm) {
  using K = ServiceKind;
  EXPECT_EQ(Services(RouteFrame(Arrival(kSecondaryStream, 3), true, 30)),
            (std::multiset<K>{K::kNavigation, K::kVlm}));
  EXPECT_EQ(Services(RouteFrame(Arrival(kPrimaryStream, 60), true, 30)),
            (std::multiset<K>{K::kDetection}));
  EXPECT_THROW(RouteFrame(Arrival(7, 0), false, 30), RoutingError);
}

TEST(WorkerPoolTest, SingleDetectionJob) {
  WorkerPool pool(DeterministicPool(), 1);
  pool.Enqueue(Job(ServiceKind::kDetection, 0), 1.0);
  const auto events = Drain(pool);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_NEAR(events[0].job.finish_time, 1.020, 1e-12);
  EXPECT_EQ(events[0].job.worker, 0);
}

TEST(WorkerPoolTest, DetectionJobsQueueOnDedicatedWorker) {
  WorkerPool pool(DeterministicPool(), 1);
  pool.Enqueue(Job(ServiceKind::kDetection, 0), 1.0);
  pool.Enqueue(Job(ServiceKind::kDetection, 1), 1.0);
  const auto events = Drain(pool);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_NEAR(events[1].job.finish_time - events[0].job.start_time, 0.040,
              1e-12);
}

TEST(WorkerPoolTest, NavigationAndVlmRunConcurrently) {
  WorkerPool pool(DeterministicPool(), 1);
  pool.Enqueue(Job(ServiceKind::kNavigation, 0), 2.0);
  pool.Enqueue(Job(ServiceKind::kVlm, 0), 2.0);
  const auto events = Drain(pool);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_NEAR(events[0].job.finish_time, 2.3, 1e-12);
  EXPECT_NEAR(events[1].job.finish_time, 2.8, 1e-12);
  EXPECT_EQ(pool.max_in_service(), 2u);
}

TEST(WorkerPoolTest, StaleDropKeepsNewestWaitingDetection) {
  PoolConfig c = DeterministicPool();
  c.stale_drop = true;
  WorkerPool pool(c, 1);
  pool.Enqueue(Job(ServiceKind::kDetection, 0), 0.0);
  pool.Enqueue(Job(ServiceKind::kDetection, 1), 0.001);
  const auto dropped = pool.Enqueue(Job(ServiceKind::kDetection, 2), 0.002);
  ASSERT_EQ(dropped.size(), 1u);
  EXPECT_EQ(dropped[0].kind, JobEvent::Kind::kStaleDropped);
  EXPECT_EQ(dropped[0].job.frame_seq, 1u);
  const auto events = Drain(pool);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[1].job.frame_seq, 2u);
}

TEST(WorkerPoolTest, NeverMoreJobsThanWorkers) {
  PoolConfig c;
  c.stale_drop = false;
  WorkerPool pool(c, 5);
  std::mt19937_64 rng(5);
  double t = 0.0;
  for (uint32_t k = 0; k < 300; ++k) {
    t += 0.01;
    pool.AdvanceTo(t);
    const auto kind = static_cast<ServiceKind>(rng() % 3);
    pool.Enqueue(Job(kind, k), t);
    EXPECT_LE(pool.in_service(), 3u);
  }
  Drain(pool);
  EXPECT_LE(pool.max_in_service(), 3u);
}

TEST(ServiceTimeModelTest, ParseAndMean) {
  const auto d = ServiceTimeModel::Parse("deterministic 0.3");
  std::mt19937_64 rng(1);
  EXPECT_DOUBLE_EQ(d.Sample(rng), 0.3);
  const auto ln = ServiceTimeModel::Parse("lognormal 0.020 0.185");
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i)
    sum += ln.Sample(rng);
  EXPECT_NEAR(sum / n, 0.020, 0.0002);
  EXPECT_THROW(ServiceTimeModel::Parse("uniform 1 2"), ConfigError);
  EXPECT_THROW(ServiceTimeModel::Parse("deterministic -1"), ConfigError);
}

}  // namespace
}  // namespace vidlink
