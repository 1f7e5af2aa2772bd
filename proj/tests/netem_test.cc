#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles/bit_link_oracle.h"
#include "vidlink/errors.h"
#include "vidlink/netem.h"

namespace vidlink {
namespace {

LinkParams Params(double prop, size_t queue_limit = 2'000'000) {
  LinkParams p;
  p.prop_delay_up = prop;
  p.queue_limit = queue_limit;
  return p;
}

TEST(CapacityScheduleTest, LookupAndBoundaries) {
  const CapacitySchedule s({{0, 30e6}, {10, 15e6}, {20, 7.5e6}});
  EXPECT_EQ(s.CapacityAt(12), 15e6);
  EXPECT_EQ(s.CapacityAt(10), 15e6);
  EXPECT_EQ(s.CapacityAt(99), 7.5e6);
  EXPECT_EQ(s.NextChangeAfter(10), 20);
  EXPECT_TRUE(std::isinf(s.NextChangeAfter(20)));
  EXPECT_EQ(s.MaxOver(5, 25), 30e6);
  EXPECT_EQ(s.MaxOver(10, 20), 15e6);
}

TEST(CapacityScheduleTest, RejectsBadSegments) {
  EXPECT_THROW(CapacitySchedule({{0, 10e6}, {5, 5e6}, {3, 1e6}}),
               ConfigError);
  EXPECT_THROW(CapacitySchedule({{1, 10e6}}), ConfigError);
  EXPECT_THROW(CapacitySchedule({{0, 0.0}}), ConfigError);
  EXPECT_THROW(CapacitySchedule({}), ConfigError);
}

TEST(BottleneckLinkTest, SinglePacketOnIdleLink) {
  BottleneckLink link(CapacitySchedule::Constant(10e6), Params(0.005));
  const double t = 2.0;
  EXPECT_FALSE(link.Offer(1200, t).drop);
  const auto events = link.AdvanceTo(10.0);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_NEAR(events[0].deliver_time, t + 0.00096 + 0.005, 1e-12);
}

TEST(BottleneckLinkTest, PacketStraddlingCapacitySwitch) {
  // 2400 bytes; the switch lands after the first 9600 bits at 20 Mbps.
  const double t0 = 1.0;
  const double half = 9600 / 20e6;
  const CapacitySchedule s({{0, 20e6}, {t0 + half, 10e6}});
  BottleneckLink link(s, Params(0.0));
  link.Offer(2400, t0);
  const auto events = link.AdvanceTo(5.0);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_NEAR(events[0].depart_time - t0, 0.00048 + 0.00096, 1e-12);
}

TEST(BottleneckLinkTest, TailDropWhenQueueFull) {
  BottleneckLink link(CapacitySchedule::Constant(1e6), Params(0.0));
  size_t queued = 0;
  while (queued + 1200 <= 1'999'200) {
    ASSERT_FALSE(link.Offer(1200, 0.0).drop);
    queued += 1200;
  }
  ASSERT_FALSE(link.Offer(300, 0.0).drop);
  queued += 300;
  ASSERT_EQ(queued, 1'999'500u);
  EXPECT_EQ(link.QueuedBytes(0.0), queued);
  const auto r = link.Offer(1200, 0.0);
  ASSERT_TRUE(r.drop);
  EXPECT_EQ(r.drop->kind, LinkEvent::Kind::kDropped);
  EXPECT_EQ(link.dropped(), 1u);
}

TEST(BottleneckLinkTest, ClockMayNotRunBackwards) {
  BottleneckLink link(CapacitySchedule::Constant(1e6), Params(0.0));
  link.AdvanceTo(1.0);
  EXPECT_THROW(link.Offer(100, 0.5), ClockError);
}

TEST(BottleneckLinkTest, FeedbackDelivery) {
  LinkParams p = Params(0.0);
  p.prop_delay_down = 0.005;
  p.downlink_capacity_bps = 50e6;
  BottleneckLink link(CapacitySchedule::Constant(1e6), p);
  EXPECT_NEAR(link.FeedbackDeliveryTime(20, 3.0), 3.0 + 0.0050032, 1e-12);

  p.prop_delay_down = 0.0;
  p.downlink_capacity_bps = kInfiniteRate;
  BottleneckLink instant(CapacitySchedule::Constant(1e6), p);
  EXPECT_EQ(instant.FeedbackDeliveryTime(20, 3.0), 3.0);
}

TEST(BottleneckLinkTest, FeedbackSentTogetherKeepsOrder) {
  BottleneckLink link(CapacitySchedule::Constant(1e6), Params(0.0));
  const double a = link.FeedbackDeliveryTime(20, 1.0);
  const double b = link.FeedbackDeliveryTime(20, 1.0);
  EXPECT_LE(a, b);
}

TEST(BottleneckLinkTest, FifoOrderAndAccounting) {
  BottleneckLink link(CapacitySchedule::Constant(5e6), Params(0.01));
  for (int i = 0; i < 10; ++i)
    link.Offer(1000 + 100 * i, 0.001 * i);
  const auto events = link.AdvanceTo(100.0);
  ASSERT_EQ(events.size(), 10u);
  for (size_t i = 1; i < events.size(); ++i) {
    EXPECT_LT(events[i - 1].packet_id, events[i].packet_id);
    EXPECT_LE(events[i - 1].deliver_time, events[i].deliver_time);
  }
  EXPECT_EQ(link.offered(), 10u);
  EXPECT_EQ(link.delivered(), 10u);
}

// Randomized small scenarios with one capacity switch, compared against the
// per-bit reference.
TEST(BottleneckLinkOracleTest, MatchesPerBitReference) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> rate(2e6, 40e6);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    std::vector<oracle::OfferedPacket> offers;
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
      t += std::uniform_real_distribution<double>(0.0, 0.002)(rng);
      offers.push_back(
          {t, std::uniform_int_distribution<size_t>(40, 1220)(rng)});
    }
    const double first = rate(rng);
    const double second = rate(rng);
    const double switch_at =
        std::uniform_real_distribution<double>(0.0001, t + 0.002)(rng);
    const size_t limit =
        std::uniform_int_distribution<size_t>(1300, 12'000)(rng);
    const double prop = 0.005;

    BottleneckLink link(CapacitySchedule({{0, first}, {switch_at, second}}),
                        Params(prop, limit));
    std::vector<bool> dropped;
    for (const auto& o : offers)
      dropped.push_back(link.Offer(o.bytes, o.time).drop.has_value());
    std::map<uint64_t, LinkEvent> delivered;
    for (const LinkEvent& e : link.AdvanceTo(1e6))
      delivered[e.packet_id] = e;

    const auto ref = oracle::SimulateBits(
        {{0, first}, {switch_at, second}}, offers, limit, prop);
    for (int i = 0; i < n; ++i) {
      ASSERT_EQ(dropped[i], ref[i].dropped) << "trial " << trial << " pkt " << i;
      if (ref[i].dropped)
        continue;
      const LinkEvent& e = delivered.at(i);
      EXPECT_LE(std::abs(std::llround(e.deliver_time * 1e6) -
                         std::llround(ref[i].deliver * 1e6)),
                1)
          << "trial " << trial << " pkt " << i;
    }
  }
}

}  // namespace
}  // namespace vidlink
