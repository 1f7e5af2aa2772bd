#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "vidlink/controller.h"
#include "vidlink/errors.h"

namespace vidlink {
namespace {

FeedbackMessage Fb(uint32_t epoch, double bps) {
  return FeedbackMessage{epoch, static_cast<uint64_t>(bps), 0};
}

TEST(RatePredictorTest, AppendsToHistory) {
  RatePredictor p(PredictorConfig{});
  for (uint32_t k = 0; k < 4; ++k)
    EXPECT_TRUE(p.Ingest(Fb(k, 10e6)));
  ASSERT_EQ(p.history().size(), 4u);
  for (const auto& e : p.history()) {
    EXPECT_EQ(e.estimate_bps, 10e6);
    EXPECT_FALSE(e.missing);
  }
}

TEST(RatePredictorTest, DuplicateEpochLeavesStateUnchanged) {
  RatePredictor p(PredictorConfig{});
  p.Ingest(Fb(0, 10e6));
  p.Ingest(Fb(1, 12e6));
  const double before = p.PredictNext();
  EXPECT_FALSE(p.Ingest(Fb(1, 3e6)));
  EXPECT_FALSE(p.Ingest(Fb(0, 3e6)));
  EXPECT_EQ(p.history().size(), 2u);
  EXPECT_EQ(p.PredictNext(), before);
  EXPECT_EQ(p.stale_messages(), 2u);
}

TEST(RatePredictorTest, NoDataHoldsPreviousValue) {
  RatePredictor p(PredictorConfig{});
  p.Ingest(Fb(0, 10e6));
  p.Ingest(Fb(1, 0));
  ASSERT_EQ(p.history().size(), 2u);
  EXPECT_TRUE(p.history().front().missing);
  EXPECT_DOUBLE_EQ(p.FilterOutput(), 10e6);
}

TEST(RatePredictorTest, ColdStartPassesLastValue) {
  RatePredictor p(PredictorConfig{});
  EXPECT_DOUBLE_EQ(p.PredictNext(), PredictorConfig{}.initial_rate_bps);
  p.Ingest(Fb(0, 10e6));
  EXPECT_DOUBLE_EQ(p.PredictNext(), 9e6);
}

TEST(RatePredictorTest, ConstantInputConvergesToSafetyTimesRate) {
  RatePredictor p(PredictorConfig{});
  for (uint32_t k = 0; k < 50; ++k)
    p.Ingest(Fb(k, 10e6));
  EXPECT_NEAR(p.PredictNext(), 9e6, 0.01 * 9e6);
}

TEST(RatePredictorTest, CoefficientsSumToOne) {
  RatePredictor p(PredictorConfig{});
  const double seq[] = {10e6, 14e6, 9e6, 20e6, 6e6, 6e6, 11e6, 17e6, 8e6};
  for (uint32_t k = 0; k < std::size(seq); ++k) {
    p.Ingest(Fb(k, seq[k]));
    const auto c = p.Coefficients();
    EXPECT_NEAR(std::accumulate(c.begin(), c.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(RatePredictorTest, StepDownTrackedWithinTwoEpochs) {
  RatePredictor p(PredictorConfig{});
  uint32_t k = 0;
  for (; k < 20; ++k)
    p.Ingest(Fb(k, 20e6));
  const double target = 0.9 * 6e6;
  bool reached = false;
  for (int step = 0; step < 2 && !reached; ++step) {
    p.Ingest(Fb(k++, 6e6));
    reached = std::abs(p.PredictNext() - target) <= 0.1 * target;
  }
  EXPECT_TRUE(reached) << p.PredictNext();
}

TEST(RatePredictorTest, FloorBoundsPrediction) {
  RatePredictor p(PredictorConfig{});
  p.Ingest(Fb(0, 1));
  EXPECT_DOUBLE_EQ(p.PredictNext(), 0.9 * PredictorConfig{}.floor_bps);
}

TEST(DecideTest, CapAtMaxBitrate) {
  const AdaptationDecision d = Decide({25e6, 25e6}, ResolutionLadder::Default(),
                                      DecisionLimits{}, AdaptationDecision{});
  EXPECT_EQ(d.encoder_bitrate_bps, 20e6);
  EXPECT_EQ(d.resolution, k1080p);
  EXPECT_FALSE(d.secondary_active);
}

TEST(DecideTest, LadderLookup) {
  const AdaptationDecision d = Decide({12e6, 12e6}, ResolutionLadder::Default(),
                                      DecisionLimits{}, AdaptationDecision{});
  EXPECT_EQ(d.encoder_bitrate_bps, 12e6);
  EXPECT_EQ(d.resolution, k1080p);
  EXPECT_FALSE(d.secondary_active);

  AdaptationDecision prev;
  prev.resolution = k1080p;
  EXPECT_EQ(Decide({7e6, 7e6}, ResolutionLadder::Default(), DecisionLimits{},
                   prev)
                .resolution,
            k720p);
}

TEST(DecideTest, LowRateActivatesSecondary) {
  const DecisionLimits limits;
  const AdaptationDecision d = Decide({4e6, 4e6}, ResolutionLadder::Default(),
                                      limits, AdaptationDecision{});
  EXPECT_TRUE(d.secondary_active);
  EXPECT_EQ(d.resolution, k480p);
  EXPECT_EQ(d.secondary_bitrate_bps, limits.secondary_bitrate_bps);
  EXPECT_EQ(d.encoder_bitrate_bps + d.secondary_bitrate_bps, 4e6);
}

TEST(DecideTest, SecondaryPausesWhenBudgetTooSmall) {
  const AdaptationDecision d = Decide({1e6, 1e6}, ResolutionLadder::Default(),
                                      DecisionLimits{}, AdaptationDecision{});
  EXPECT_TRUE(d.secondary_active);
  EXPECT_EQ(d.secondary_bitrate_bps, 0.0);
  EXPECT_EQ(d.encoder_bitrate_bps, 1e6);
}

TEST(SecondaryActiveTest, HysteresisBand) {
  const DecisionLimits limits;
  EXPECT_TRUE(SecondaryActive(4.99e6, false, limits, 0.1));
  EXPECT_FALSE(SecondaryActive(5e6, false, limits, 0.1));
  EXPECT_TRUE(SecondaryActive(5.4e6, true, limits, 0.1));
  EXPECT_TRUE(SecondaryActive(5.5e6, true, limits, 0.1));
  EXPECT_FALSE(SecondaryActive(5.51e6, true, limits, 0.1));
}

TEST(ResolutionLadderTest, UpNeedsMarginDownIsImmediate) {
  const ResolutionLadder ladder = ResolutionLadder::Default();
  const size_t tier720 = ladder.IndexOf(k720p);
  EXPECT_EQ(ladder.Select(10.5e6, tier720), tier720);
  EXPECT_EQ(ladder.Select(11.01e6, tier720), ladder.IndexOf(k1080p));
  EXPECT_EQ(ladder.Select(4.99e6, tier720), ladder.IndexOf(k480p));
}

TEST(AdaptationControllerTest, SilenceDecaysPrediction) {
  ControllerConfig config;
  config.epoch_length = 1.0;
  AdaptationController c(config);
  ASSERT_TRUE(c.OnFeedback(Fb(0, 10e6), 1.0));
  const double expected[] = {9e6, 9e6, 9e6 * 0.8, 9e6 * 0.64, 9e6 * 0.512};
  for (int k = 0; k < 5; ++k) {
    const AdaptationDecision d = c.Decide(1.0 + k);
    EXPECT_NEAR(c.last_prediction().link_bps, expected[k], 1e-6) << k;
    EXPECT_NEAR(d.encoder_bitrate_bps + d.secondary_bitrate_bps, expected[k],
                1e-6)
        << k;
  }
}

TEST(AdaptationControllerTest, StaleFeedbackRejected) {
  AdaptationController c(ControllerConfig{});
  EXPECT_TRUE(c.OnFeedback(Fb(3, 10e6), 4.0));
  EXPECT_FALSE(c.OnFeedback(Fb(2, 10e6), 4.1));
  EXPECT_EQ(c.predictor().stale_messages(), 1u);
}

TEST(AdaptationControllerTest, BacklogReducesBudgetOnly) {
  ControllerConfig config;
  config.epoch_length = 1.0;
  AdaptationController c(config);
  // 12 Mbit sent over an epoch the server measured at 10 Mbps.
  for (int i = 0; i < 1000; ++i)
    c.OnPacketSent(1500, 0.001 * i);
  c.OnFeedback(Fb(0, 10e6), 1.0);
  const AdaptationDecision d = c.Decide(1.0);
  EXPECT_NEAR(c.backlog_bits(), 2e6, 1.0);
  EXPECT_DOUBLE_EQ(c.last_prediction().link_bps, 9e6);
  EXPECT_NEAR(c.last_prediction().budget_bps, 7e6, 1.0);
  EXPECT_NEAR(d.encoder_bitrate_bps, 7e6, 1.0);
}

TEST(ControllerConfigTest, RejectsBadValues) {
  ControllerConfig c;
  c.silence_decay = 0.0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = ControllerConfig{};
  c.predictor.safety_factor = 1.5;
  EXPECT_THROW(c.Validate(), ConfigError);
}

}  // namespace
}  // namespace vidlink
