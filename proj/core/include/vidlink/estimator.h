#ifndef VIDLINK_ESTIMATOR_H_
#define VIDLINK_ESTIMATOR_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>

#include "vidlink/transport.h"

namespace vidlink {

struct EstimatorConfig {
  double epoch_length = 1.0;
};

struct RateEstimate {
  uint32_t epoch_index = 0;
  // Link rate reported to the client. Taken from back-to-back fragment
  // spacing when the epoch has any, otherwise equal to throughput_bps.
  double estimate_bps = 0.0;
  // On-wire bytes received over the epoch, times 8, over epoch_length.
  double throughput_bps = 0.0;
  uint64_t bytes_received = 0;
  size_t packets = 0;
  size_t dispersion_samples = 0;
  bool no_data = false;
};

// Server-side per-epoch link-rate measurement. Epoch k covers arrivals in
// [start + k L, start + (k+1) L); an arrival exactly on a boundary belongs to
// the later epoch.
//
// Packets flagged back_to_back were queued at the bottleneck directly behind
// the previous arrival (non-first fragments of a frame the sender emitted as
// one burst), so the gap since the previous arrival is their serialization
// time. Summing bytes over those gaps measures the bottleneck rate even when
// the sender offers less than the link can carry.
class LinkRateEstimator {
 public:
  explicit LinkRateEstimator(EstimatorConfig config, double start_time = 0.0);

  // Throws AccountingError when arrival_time precedes the current epoch.
  void Observe(size_t packet_bytes, double arrival_time,
               bool back_to_back = false);

  // Closes the current epoch. `epoch_end_time` must match its end; a second
  // call for an already closed epoch throws AccountingError.
  RateEstimate FinalizeEpoch(double epoch_end_time);

  FeedbackMessage ToFeedback(const RateEstimate& estimate,
                             double server_time) const;

  uint32_t current_epoch() const { return current_epoch_; }
  double EpochEnd(uint32_t epoch_index) const;
  uint64_t EpochIndexAt(double t) const;
  const EstimatorConfig& config() const { return config_; }

 private:
  struct Accumulator {
    uint64_t bytes = 0;
    size_t packets = 0;
    uint64_t burst_bytes = 0;
    double burst_time = 0.0;
    size_t burst_samples = 0;
  };

  EstimatorConfig config_;
  double start_time_;
  uint32_t current_epoch_ = 0;
  std::optional<double> last_arrival_;
  // Indexed by epoch; holds the current epoch and any later ones that have
  // already seen arrivals.
  std::map<uint64_t, Accumulator> epochs_;
};

}  // namespace vidlink

#endif  // VIDLINK_ESTIMATOR_H_
