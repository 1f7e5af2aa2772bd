#ifndef VIDLINK_CONTROLLER_H_
#define VIDLINK_CONTROLLER_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "vidlink/media.h"
#include "vidlink/transport.h"

namespace vidlink {

struct PredictorConfig {
  // Filter order P and history window W.
  int order = 4;
  int window = 10;
  // Multiplier applied to the filter output.
  double safety_factor = 0.9;
  // NLMS step size and per-update coefficient leakage.
  double step_size = 0.2;
  double leakage = 0.01;
  double floor_bps = 100e3;
  // Returned until the first real estimate arrives.
  double initial_rate_bps = 5e6;

  void Validate() const;
};

// Next-epoch link-rate predictor.
//
// The filter is linear in the last P estimates with coefficients constrained
// to sum to one, written in increment form:
//
//   y_hat = x[0] + sum_{j=1}^{P-1} w[j] * (x[j-1] - x[j])
//
// where x[0] is the newest estimate. A constant input is reproduced exactly,
// and a step is followed after a single epoch while the increment weights
// are small. The weights adapt by normalized LMS against each realized
// estimate. Epochs without data repeat the previous value and do not adapt.
class RatePredictor {
 public:
  struct Entry {
    double estimate_bps = 0.0;
    bool missing = false;
  };

  explicit RatePredictor(PredictorConfig config);

  // Appends the message's estimate. A message whose epoch_index is not newer
  // than the last accepted one is dropped and false is returned. An
  // estimate_bps of 0 marks an epoch without data.
  bool Ingest(const FeedbackMessage& message);

  // Raw filter output (no safety factor, no floor). Cold start passes the
  // newest value through until P values are available.
  double FilterOutput() const;
  // safety_factor * max(floor, FilterOutput()), or the initial rate before any
  // real estimate.
  double PredictNext() const;

  // Equivalent direct-form coefficients over x[0..P-1]; they sum to 1.
  std::vector<double> Coefficients() const;
  const std::deque<Entry>& history() const { return history_; }
  bool has_estimate() const { return !inputs_.empty(); }
  std::optional<uint32_t> last_epoch() const { return last_epoch_; }
  uint64_t stale_messages() const { return stale_messages_; }
  const PredictorConfig& config() const { return config_; }

 private:
  double Predict(const std::deque<double>& inputs) const;
  void Adapt(double realized);

  PredictorConfig config_;
  std::deque<Entry> history_;  // newest first, at most W entries
  std::deque<double> inputs_;  // newest first, missing entries held
  std::vector<double> weights_;  // increment weights, index 1..P-1 used
  std::optional<uint32_t> last_epoch_;
  uint64_t stale_messages_ = 0;
};

// Resolution tiers ordered by ascending minimum predicted rate. The lowest
// tier's minimum is 0.
struct ResolutionLadder {
  struct Tier {
    double min_predicted_bps = 0.0;
    Resolution resolution;
  };

  std::vector<Tier> tiers;
  double hysteresis_margin = 0.1;

  // 1920x1080 from 10 Mbps, 1280x720 from 5 Mbps, 854x480 below.
  static ResolutionLadder Default();
  void Validate() const;

  size_t IndexOf(Resolution resolution) const;
  // Tier for `predicted_bps` given the current tier. Moving up requires
  // exceeding the threshold by the hysteresis margin; moving down is
  // immediate.
  size_t Select(double predicted_bps, size_t current) const;
};

struct DecisionLimits {
  double max_encoder_bitrate_bps = 20e6;
  double secondary_threshold_bps = 5e6;
  // Average rate budgeted for the 1 fps high-resolution stream.
  double secondary_bitrate_bps = 1.5e6;
  double floor_bps = 100e3;
};

struct RatePrediction {
  // Predicted link rate (safety factor applied). Drives the resolution tier
  // and secondary-stream activation.
  double link_bps = 0.0;
  // Sending budget for the next epoch: link_bps less what is needed to drain
  // the estimated bottleneck backlog, floored. Drives encoder bitrates.
  double budget_bps = 0.0;
};

// Secondary activation with hysteresis: turns on strictly below the threshold
// and off only above threshold * (1 + margin).
bool SecondaryActive(double predicted_bps, bool currently_active,
                     const DecisionLimits& limits, double hysteresis_margin);

// Maps a prediction to encoder settings. Combined primary + secondary bitrate
// equals min(budget, max_encoder_bitrate); the secondary stream pauses (rate
// 0) when the budget cannot cover its allocation plus the primary floor.
AdaptationDecision Decide(const RatePrediction& prediction,
                          const ResolutionLadder& ladder,
                          const DecisionLimits& limits,
                          const AdaptationDecision& previous);

struct ControllerConfig {
  PredictorConfig predictor;
  ResolutionLadder ladder = ResolutionLadder::Default();
  DecisionLimits limits;
  double epoch_length = 1.0;
  // Silent epochs tolerated before the prediction decays, and the per-epoch
  // decay factor applied after that.
  int silence_epochs = 2;
  double silence_decay = 0.8;
  bool drain_backlog = true;

  void Validate() const;
};

// Client-side adaptation loop. Turns feedback into the encoder decision for
// the next epoch.
//
// The backlog estimate is a fluid model over what the client sent and what the
// server says the link carried: after each accepted estimate c covering an
// interval D, backlog = max(0, backlog + bits_sent - c * D).
class AdaptationController {
 public:
  explicit AdaptationController(ControllerConfig config);

  void OnPacketSent(size_t bytes, double t);
  // Returns false for stale or duplicate feedback.
  bool OnFeedback(const FeedbackMessage& message, double t);
  AdaptationDecision Decide(double t);

  const RatePrediction& last_prediction() const { return last_prediction_; }
  const AdaptationDecision& last_decision() const { return last_decision_; }
  double backlog_bits() const { return backlog_bits_; }
  const RatePredictor& predictor() const { return predictor_; }
  const ControllerConfig& config() const { return config_; }

 private:
  double SilenceFactor(double t) const;

  ControllerConfig config_;
  RatePredictor predictor_;
  double bits_since_feedback_ = 0.0;
  double backlog_bits_ = 0.0;
  double last_feedback_time_ = 0.0;
  std::optional<uint32_t> last_real_epoch_;
  RatePrediction last_prediction_;
  AdaptationDecision last_decision_;
};

}  // namespace vidlink

#endif  // VIDLINK_CONTROLLER_H_
