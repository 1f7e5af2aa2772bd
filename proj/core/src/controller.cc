#include "vidlink/controller.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "vidlink/errors.h"

namespace vidlink {

void PredictorConfig::Validate() const {
  if (order < 1 || window < order)
    throw ConfigError("predictor needs window >= order >= 1");
  if (!(safety_factor > 0.0 && safety_factor <= 1.0))
    throw ConfigError("safety_factor must be in (0, 1]");
  if (!(step_size >= 0.0 && step_size < 2.0))
    throw ConfigError("step_size must be in [0, 2)");
  if (!(leakage >= 0.0 && leakage < 1.0))
    throw ConfigError("leakage must be in [0, 1)");
  if (!(floor_bps > 0.0))
    throw ConfigError("floor must be positive");
  if (!(initial_rate_bps > 0.0))
    throw ConfigError("initial rate must be positive");
}

RatePredictor::RatePredictor(PredictorConfig config)
    : config_(config), weights_(static_cast<size_t>(config.order), 0.0) {
  config_.Validate();
}

bool RatePredictor::Ingest(const FeedbackMessage& message) {
  if (last_epoch_ && message.epoch_index <= *last_epoch_) {
    ++stale_messages_;
    return false;
  }
  last_epoch_ = message.epoch_index;

  const size_t window = static_cast<size_t>(config_.window);
  const bool missing = message.estimate_bps == 0;
  history_.push_front({static_cast<double>(message.estimate_bps), missing});
  if (history_.size() > window)
    history_.pop_back();

  if (missing) {
    if (!inputs_.empty())
      inputs_.push_front(inputs_.front());
  } else {
    const double value = static_cast<double>(message.estimate_bps);
    Adapt(value);
    inputs_.push_front(value);
  }
  if (inputs_.size() > window)
    inputs_.pop_back();
  return true;
}

double RatePredictor::Predict(const std::deque<double>& inputs) const {
  const size_t order = static_cast<size_t>(config_.order);
  if (inputs.empty())
    return config_.initial_rate_bps;
  double y = inputs[0];
  if (inputs.size() < order)
    return y;
  for (size_t j = 1; j < order; ++j)
    y += weights_[j] * (inputs[j - 1] - inputs[j]);
  return y;
}

void RatePredictor::Adapt(double realized) {
  const size_t order = static_cast<size_t>(config_.order);
  if (inputs_.size() < order || order < 2)
    return;
  const double error = realized - Predict(inputs_);
  double norm = 0.0;
  for (size_t j = 1; j < order; ++j) {
    const double d = inputs_[j - 1] - inputs_[j];
    norm += d * d;
  }
  // Regularizer scaled to the signal.
  const double scale = 1e-3 * inputs_[0];
  const double gain = config_.step_size * error / (norm + scale * scale + 1.0);
  for (size_t j = 1; j < order; ++j) {
    const double d = inputs_[j - 1] - inputs_[j];
    double w = (1.0 - config_.leakage) * weights_[j] + gain * d;
    weights_[j] = std::clamp(w, -1.0, 1.0);
  }
}

double RatePredictor::FilterOutput() const {
  return Predict(inputs_);
}

double RatePredictor::PredictNext() const {
  if (inputs_.empty())
    return config_.initial_rate_bps;
  return config_.safety_factor * std::max(config_.floor_bps, FilterOutput());
}

std::vector<double> RatePredictor::Coefficients() const {
  const size_t order = static_cast<size_t>(config_.order);
  std::vector<double> a(order, 0.0);
  a[0] = 1.0;
  for (size_t j = 1; j < order; ++j) {
    a[j - 1] += weights_[j];
    a[j] -= weights_[j];
  }
  return a;
}

ResolutionLadder ResolutionLadder::Default() {
  ResolutionLadder ladder;
  ladder.tiers = {{0.0, k480p}, {5e6, k720p}, {10e6, k1080p}};
  ladder.hysteresis_margin = 0.1;
  return ladder;
}

void ResolutionLadder::Validate() const {
  if (tiers.empty())
    throw ConfigError("ladder needs at least one tier");
  if (tiers.front().min_predicted_bps != 0.0)
    throw ConfigError("lowest ladder tier must start at 0 bps");
  for (size_t i = 1; i < tiers.size(); ++i)
    if (!(tiers[i].min_predicted_bps > tiers[i - 1].min_predicted_bps))
      throw ConfigError("ladder thresholds must be strictly increasing");
  if (!(tiers.back().resolution == k1080p))
    throw ConfigError("top ladder tier must be 1920x1080");
  if (!(hysteresis_margin >= 0.0))
    throw ConfigError("hysteresis margin must be >= 0");
}

size_t ResolutionLadder::IndexOf(Resolution resolution) const {
  for (size_t i = 0; i < tiers.size(); ++i)
    if (tiers[i].resolution == resolution)
      return i;
  return tiers.size();
}

size_t ResolutionLadder::Select(double predicted_bps, size_t current) const {
  size_t raw = 0;
  for (size_t i = 0; i < tiers.size(); ++i)
    if (predicted_bps >= tiers[i].min_predicted_bps)
      raw = i;
  if (current >= tiers.size() || raw <= current)
    return raw;
  size_t up = current;
  for (size_t i = current + 1; i <= raw; ++i)
    if (predicted_bps > tiers[i].min_predicted_bps * (1.0 + hysteresis_margin))
      up = i;
  return up;
}

bool SecondaryActive(double predicted_bps, bool currently_active,
                     const DecisionLimits& limits, double hysteresis_margin) {
  if (currently_active)
    return predicted_bps <=
           limits.secondary_threshold_bps * (1.0 + hysteresis_margin);
  return predicted_bps < limits.secondary_threshold_bps;
}

AdaptationDecision Decide(const RatePrediction& prediction,
                          const ResolutionLadder& ladder,
                          const DecisionLimits& limits,
                          const AdaptationDecision& previous) {
  AdaptationDecision d;
  d.epoch_index = previous.epoch_index;
  d.secondary_active =
      SecondaryActive(prediction.link_bps, previous.secondary_active, limits,
                      ladder.hysteresis_margin);

  size_t tier = ladder.Select(prediction.link_bps,
                              ladder.IndexOf(previous.resolution));
  if (d.secondary_active)
    tier = 0;
  d.resolution = ladder.tiers[tier].resolution;

  const double total =
      std::min(prediction.budget_bps, limits.max_encoder_bitrate_bps);
  if (d.secondary_active &&
      total >= limits.secondary_bitrate_bps + limits.floor_bps) {
    d.secondary_bitrate_bps = limits.secondary_bitrate_bps;
    d.encoder_bitrate_bps = total - limits.secondary_bitrate_bps;
  } else {
    d.secondary_bitrate_bps = 0.0;
    d.encoder_bitrate_bps = total;
  }
  return d;
}

void ControllerConfig::Validate() const {
  predictor.Validate();
  ladder.Validate();
  if (!(epoch_length > 0.0))
    throw ConfigError("epoch_length must be positive");
  if (silence_epochs < 1)
    throw ConfigError("silence_epochs must be >= 1");
  if (!(silence_decay > 0.0 && silence_decay <= 1.0))
    throw ConfigError("silence_decay must be in (0, 1]");
  if (!(limits.max_encoder_bitrate_bps > 0.0))
    throw ConfigError("max encoder bitrate must be positive");
  if (!(limits.secondary_bitrate_bps > 0.0))
    throw ConfigError("secondary bitrate must be positive");
  if (!(limits.floor_bps > 0.0))
    throw ConfigError("rate floor must be positive");
}

AdaptationController::AdaptationController(ControllerConfig config)
    : config_(std::move(config)), predictor_(config_.predictor) {
  config_.Validate();
  last_decision_.encoder_bitrate_bps = config_.predictor.initial_rate_bps;
}

void AdaptationController::OnPacketSent(size_t bytes, double /*t*/) {
  bits_since_feedback_ += 8.0 * static_cast<double>(bytes);
}

bool AdaptationController::OnFeedback(const FeedbackMessage& message,
                                      double t) {
  if (!predictor_.Ingest(message))
    return false;
  last_feedback_time_ = t;
  if (message.estimate_bps == 0)
    return true;

  const uint32_t covered =
      last_real_epoch_ ? message.epoch_index - *last_real_epoch_
                       : message.epoch_index + 1;
  const double carried = static_cast<double>(message.estimate_bps) *
                         config_.epoch_length * covered;
  backlog_bits_ = std::max(0.0, backlog_bits_ + bits_since_feedback_ - carried);
  bits_since_feedback_ = 0.0;
  last_real_epoch_ = message.epoch_index;
  return true;
}

double AdaptationController::SilenceFactor(double t) const {
  const double silent =
      std::floor((t - last_feedback_time_) / config_.epoch_length + 1e-9);
  if (silent < config_.silence_epochs)
    return 1.0;
  return std::pow(config_.silence_decay,
                  silent - config_.silence_epochs + 1.0);
}

AdaptationDecision AdaptationController::Decide(double t) {
  RatePrediction p;
  p.link_bps = predictor_.PredictNext() * SilenceFactor(t);
  p.budget_bps = p.link_bps;
  if (config_.drain_backlog)
    p.budget_bps -= backlog_bits_ / config_.epoch_length;
  p.budget_bps = std::max(p.budget_bps,
                          std::min(config_.limits.floor_bps, p.link_bps));
  last_prediction_ = p;

  AdaptationDecision d =
      vidlink::Decide(p, config_.ladder, config_.limits, last_decision_);
  d.epoch_index = predictor_.last_epoch().value_or(0);
  last_decision_ = d;
  return d;
}

}  // namespace vidlink
