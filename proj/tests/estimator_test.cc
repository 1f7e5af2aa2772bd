#include <cmath>

#include <gtest/gtest.h>

#include "cbr_harness.h"
#include "vidlink/errors.h"
#include "vidlink/estimator.h"
#include "vidlink/netem.h"

namespace vidlink {
namespace {

TEST(LinkRateEstimatorTest, AccumulatesBytesInEpoch) {
  LinkRateEstimator est(EstimatorConfig{1.0});
  est.Observe(1220, 0.1);
  est.Observe(1220, 0.2);
  est.Observe(1220, 0.3);
  const RateEstimate e = est.FinalizeEpoch(1.0);
  EXPECT_EQ(e.bytes_received, 3660u);
  EXPECT_EQ(e.packets, 3u);
  EXPECT_DOUBLE_EQ(e.throughput_bps, 3660 * 8.0);
}

TEST(LinkRateEstimatorTest, BoundaryArrivalBelongsToNextEpoch) {
  LinkRateEstimator est(EstimatorConfig{1.0});
  est.Observe(1000, 0.5);
  est.Observe(500, 1.0);
  EXPECT_EQ(est.FinalizeEpoch(1.0).bytes_received, 1000u);
  EXPECT_EQ(est.FinalizeEpoch(2.0).bytes_received, 500u);
}

TEST(LinkRateEstimatorTest, EmptyEpochHasNoData) {
  LinkRateEstimator est(EstimatorConfig{1.0});
  const RateEstimate e = est.FinalizeEpoch(1.0);
  EXPECT_EQ(e.bytes_received, 0u);
  EXPECT_EQ(e.estimate_bps, 0.0);
  EXPECT_TRUE(e.no_data);
  const FeedbackMessage m = est.ToFeedback(e, 1.0);
  EXPECT_EQ(m.estimate_bps, 0u);
  EXPECT_EQ(m.server_time_us, 1'000'000u);
}

TEST(LinkRateEstimatorTest, ThroughputFromEpochBytes) {
  LinkRateEstimator est(EstimatorConfig{1.0});
  for (int i = 0; i < 1000; ++i)
    est.Observe(1250, 0.001 * i);
  const RateEstimate e = est.FinalizeEpoch(1.0);
  EXPECT_DOUBLE_EQ(e.throughput_bps, 10e6);
  EXPECT_DOUBLE_EQ(e.estimate_bps, 10e6);
  EXPECT_EQ(est.ToFeedback(e, 1.0).estimate_bps, 10'000'000u);
}

TEST(LinkRateEstimatorTest, BackToBackSpacingMeasuresBottleneck) {
  // A 10-packet burst every 100 ms through a 6 Mbps link: the average load is
  // about 1 Mbps but the spacing inside each burst is the serialization time.
  BottleneckLink link(CapacitySchedule::Constant(6e6), LinkParams{});
  for (int burst = 0; burst < 10; ++burst)
    for (int i = 0; i < 10; ++i)
      link.Offer(1220, 0.1 * burst);
  LinkRateEstimator est(EstimatorConfig{1.0});
  int index = 0;
  for (const LinkEvent& e : link.AdvanceTo(0.999)) {
    est.Observe(e.bytes, e.deliver_time, index % 10 != 0);
    ++index;
  }
  const RateEstimate r = est.FinalizeEpoch(1.0);
  EXPECT_NEAR(r.estimate_bps, 6e6, 1.0);
  EXPECT_LT(r.throughput_bps, 1.1e6);
  EXPECT_EQ(r.dispersion_samples, 90u);
}

TEST(LinkRateEstimatorTest, AccountingErrors) {
  LinkRateEstimator est(EstimatorConfig{1.0});
  est.Observe(100, 0.5);
  est.FinalizeEpoch(1.0);
  EXPECT_THROW(est.Observe(100, 0.9), AccountingError);
  EXPECT_THROW(est.FinalizeEpoch(1.0), AccountingError);
  EXPECT_THROW(est.FinalizeEpoch(5.0), AccountingError);
  est.Observe(100, 1.5);
  EXPECT_THROW(est.Observe(100, 1.2), AccountingError);
}

TEST(LinkRateEstimatorTest, CbrThroughUnconstrainedLink) {
  const auto estimates = testing::RunCbrThroughLink(10e6, 1e9, 10.0, 1.0);
  ASSERT_EQ(estimates.size(), 10u);
  for (size_t k = 1; k < estimates.size(); ++k)
    EXPECT_NEAR(estimates[k].estimate_bps, 10e6, 0.05 * 10e6) << k;
}

TEST(LinkRateEstimatorTest, CbrThroughSaturatedLink) {
  const double packet_bits = 1220 * 8.0;
  const auto estimates = testing::RunCbrThroughLink(10e6, 6e6, 10.0, 1.0);
  for (size_t k = 1; k < estimates.size(); ++k)
    EXPECT_LE(std::abs(estimates[k].estimate_bps - 6e6), packet_bits) << k;
}

}  // namespace
}  // namespace vidlink
