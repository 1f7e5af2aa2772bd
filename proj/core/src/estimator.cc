#include "vidlink/estimator.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "vidlink/errors.h"

namespace vidlink {
namespace {

// Tolerance for floating-point epoch boundaries such as 10 * 0.1.
constexpr double kBoundaryEpsilon = 1e-9;

}  // namespace

LinkRateEstimator::LinkRateEstimator(EstimatorConfig config, double start_time)
    : config_(config), start_time_(start_time) {
  if (!(config_.epoch_length > 0.0))
    throw ConfigError("epoch_length must be positive");
}

uint64_t LinkRateEstimator::EpochIndexAt(double t) const {
  const double x = (t - start_time_) / config_.epoch_length;
  if (x < 0.0)
    return 0;
  return static_cast<uint64_t>(std::floor(x + kBoundaryEpsilon));
}

double LinkRateEstimator::EpochEnd(uint32_t epoch_index) const {
  return start_time_ + (static_cast<double>(epoch_index) + 1.0) *
                           config_.epoch_length;
}

void LinkRateEstimator::Observe(size_t packet_bytes, double arrival_time,
                                bool back_to_back) {
  if (arrival_time < start_time_ ||
      EpochIndexAt(arrival_time) < current_epoch_)
    throw AccountingError("arrival at " + std::to_string(arrival_time) +
                          " precedes epoch " + std::to_string(current_epoch_));
  if (last_arrival_ && arrival_time < *last_arrival_)
    throw AccountingError("arrivals must be observed in time order");

  Accumulator& acc = epochs_[EpochIndexAt(arrival_time)];
  acc.bytes += packet_bytes;
  ++acc.packets;
  if (back_to_back && last_arrival_) {
    const double gap = arrival_time - *last_arrival_;
    if (gap > 0.0) {
      acc.burst_bytes += packet_bytes;
      acc.burst_time += gap;
      ++acc.burst_samples;
    }
  }
  last_arrival_ = arrival_time;
}

RateEstimate LinkRateEstimator::FinalizeEpoch(double epoch_end_time) {
  const double expected = EpochEnd(current_epoch_);
  const double tolerance = kBoundaryEpsilon * std::max(1.0, expected);
  if (epoch_end_time < expected - tolerance)
    throw AccountingError("epoch ending at " + std::to_string(epoch_end_time) +
                          " already finalized");
  if (epoch_end_time > expected + tolerance)
    throw AccountingError("epoch " + std::to_string(current_epoch_) +
                          " ends at " + std::to_string(expected) +
                          ", not " + std::to_string(epoch_end_time));

  Accumulator acc;
  if (auto it = epochs_.find(current_epoch_); it != epochs_.end()) {
    acc = it->second;
    epochs_.erase(it);
  }

  RateEstimate est;
  est.epoch_index = current_epoch_;
  est.bytes_received = acc.bytes;
  est.packets = acc.packets;
  est.dispersion_samples = acc.burst_samples;
  est.throughput_bps =
      8.0 * static_cast<double>(acc.bytes) / config_.epoch_length;
  est.no_data = acc.bytes == 0;
  if (acc.burst_samples > 0 && acc.burst_time > 0.0)
    est.estimate_bps = 8.0 * static_cast<double>(acc.burst_bytes) /
                       acc.burst_time;
  else
    est.estimate_bps = est.throughput_bps;

  ++current_epoch_;
  return est;
}

FeedbackMessage LinkRateEstimator::ToFeedback(const RateEstimate& estimate,
                                              double server_time) const {
  FeedbackMessage m;
  m.epoch_index = estimate.epoch_index;
  // 0 is reserved for "no data"; measured epochs report at least 1 bps.
  m.estimate_bps =
      estimate.no_data
          ? 0
          : std::max<uint64_t>(1, static_cast<uint64_t>(
                                      std::llround(estimate.estimate_bps)));
  m.server_time_us = SecondsToMicros(server_time);
  return m;
}

}  // namespace vidlink
