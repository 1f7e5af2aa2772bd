// Acceptance checks. Prints one PASS or FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cbr_harness.h"
#include "oracles/bit_link_oracle.h"
#include "support.h"
#include "vidlink/netem.h"
#include "vidlink/scenario.h"
#include "vidlink/simulation.h"
#include "vidlink/transport.h"

namespace vidlink {
namespace {

namespace fs = std::filesystem;
using testing::DefaultWith;

// Tolerances.
constexpr double kOnViolationMax = 0.02;
constexpr double kOffViolationMin = 0.30;
constexpr double kArmRuntimeMax = 5.0;
constexpr double kTrackingTolerance = 0.10;
constexpr int kTrackingEpochs = 2;
constexpr double kSecondaryThreshold = 5e6;
constexpr double kHysteresisTop = 5.5e6;
constexpr double kCbrTolerance = 0.05;
constexpr double kPacketBits = 1220 * 8.0;
constexpr int64_t kQuantumUs = 1;

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void Report(int id, const std::string& name, const Verdict& v) {
  std::printf("%s criterion %d: %s (%s)\n", v.pass ? "PASS" : "FAIL", id,
              name.c_str(), v.detail.c_str());
  std::fflush(stdout);
  failures += v.pass ? 0 : 1;
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

struct TimedRun {
  RunOutput out;
  double seconds;
};

TimedRun Timed(const Scenario& s) {
  const auto start = std::chrono::steady_clock::now();
  RunOutput out = RunSim(s);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  return {std::move(out), secs};
}

double Iqr(const LatencyStats& s) {
  return static_cast<double>(s.p75_us - s.p25_us);
}

Verdict QosSeparation(const TimedRun& on, const TimedRun& off,
                      const Scenario& s) {
  double below = 0.0;
  const double dt = 0.001;
  for (double t = 0.0; t < s.run_length; t += dt)
    below += s.capacity.CapacityAt(t) < 20e6 ? dt : 0.0;
  Verdict v;
  v.pass = on.out.summary.violation_fraction <= kOnViolationMax &&
           off.out.summary.violation_fraction >= kOffViolationMin &&
           on.seconds < kArmRuntimeMax && off.seconds < kArmRuntimeMax &&
           below >= s.run_length / 3.0;
  v.detail = Fmt("on %.4f <= 0.02, off %.4f >= 0.30, runtime %.2f s / %.2f s",
                 on.out.summary.violation_fraction,
                 off.out.summary.violation_fraction, on.seconds, off.seconds) +
             Fmt(", below 20 Mbps for %.1f s", below);
  return v;
}

Verdict RttOrdering(const RunSummary& on, const RunSummary& off) {
  Verdict v;
  v.pass = on.rtt.median_us < off.rtt.median_us && Iqr(off.rtt) > Iqr(on.rtt);
  v.detail = Fmt("median %.1f ms vs %.1f ms, IQR %.1f ms vs %.1f ms",
                 on.rtt.median_us / 1e3, off.rtt.median_us / 1e3,
                 Iqr(on.rtt) / 1e3, Iqr(off.rtt) / 1e3);
  return v;
}

Verdict RateTracking(const RunOutput& on, const Scenario& s) {
  Verdict v;
  size_t cap_checked = 0;
  size_t cap_bad = 0;
  for (const EpochRecord& e : on.epochs) {
    if (!e.link_prediction_bps)
      continue;
    ++cap_checked;
    const double total = *e.encoder_bitrate_bps + *e.secondary_bitrate_bps;
    if (total != std::min(*e.prediction_bps, 20e6))
      ++cap_bad;
  }
  const double gamma = s.controller.predictor.safety_factor;
  const double epoch = s.epoch_length();
  int steps = 0;
  int tracked = 0;
  std::string misses;
  const auto& segs = s.capacity.segments();
  for (size_t i = 1; i < segs.size(); ++i) {
    if (segs[i].start_time >= s.run_length)
      break;
    ++steps;
    const double target = gamma * segs[i].capacity_bps;
    const auto first = static_cast<size_t>(std::llround(segs[i].start_time / epoch));
    bool ok = false;
    for (size_t k = first; k < first + kTrackingEpochs && k < on.epochs.size();
         ++k) {
      const auto& p = on.epochs[k].link_prediction_bps;
      if (p && std::abs(*p - target) <= kTrackingTolerance * target)
        ok = true;
    }
    tracked += ok;
    if (!ok)
      misses += Fmt(" t=%.0f", segs[i].start_time);
  }
  v.pass = cap_checked > 0 && cap_bad == 0 && tracked == steps;
  v.detail = Fmt("cap rule exact in %.0f/%.0f epochs, %.0f/%.0f steps tracked",
                 static_cast<double>(cap_checked - cap_bad),
                 static_cast<double>(cap_checked), tracked, steps) +
             misses;
  return v;
}

Verdict SecondaryThreshold() {
  Verdict v;
  size_t checked = 0;
  size_t bad = 0;
  size_t below = 0;
  size_t above = 0;
  for (double cap = 3e6; cap <= 8e6 + 1.0; cap += 0.5e6) {
    const Scenario s = DefaultWith(
        {{"run_length", "20"}, {"link.capacity", "0:" + std::to_string(cap)}});
    for (const EpochRecord& e : RunSim(s).epochs) {
      if (!e.link_prediction_bps)
        continue;
      const double p = *e.link_prediction_bps;
      if (p >= kSecondaryThreshold && p <= kHysteresisTop)
        continue;
      ++checked;
      const bool expected = p < kSecondaryThreshold;
      (expected ? below : above) += 1;
      bad += *e.secondary_active != expected;
    }
  }
  // Inside the band the flag keeps its state: one switch on the way down, no
  // switch back while the prediction stays in the band.
  const Scenario band = DefaultWith(
      {{"run_length", "30"}, {"link.capacity", "0:8e6, 10:3e6, 20:5.8e6"}});
  const RunOutput out = RunSim(band);
  int switches = 0;
  bool last = false;
  bool in_band_seen = false;
  for (const EpochRecord& e : out.epochs) {
    if (!e.link_prediction_bps)
      continue;
    if (e.start_time >= 21.0 && *e.link_prediction_bps >= kSecondaryThreshold &&
        *e.link_prediction_bps <= kHysteresisTop)
      in_band_seen = true;
    switches += *e.secondary_active != last;
    last = *e.secondary_active;
  }
  v.pass = bad == 0 && below > 0 && above > 0 && switches == 1 &&
           in_band_seen && last;
  v.detail = Fmt("%.0f mismatches in %.0f epochs outside the band, band run "
                 "switched %.0f time(s)",
                 static_cast<double>(bad), static_cast<double>(checked),
                 switches);
  return v;
}

Verdict EstimatorAccuracy() {
  Verdict v;
  double worst_free = 0.0;
  double worst_sat = 0.0;
  const auto free = testing::RunCbrThroughLink(10e6, 1e9, 20.0, 1.0);
  for (size_t k = 1; k < free.size(); ++k)
    worst_free = std::max(worst_free,
                          std::abs(free[k].estimate_bps - 10e6) / 10e6);
  const auto sat = testing::RunCbrThroughLink(10e6, 6e6, 20.0, 1.0);
  for (size_t k = 1; k < sat.size(); ++k)
    worst_sat = std::max(worst_sat, std::abs(sat[k].estimate_bps - 6e6));
  v.pass = worst_free <= kCbrTolerance && worst_sat <= kPacketBits;
  v.detail = Fmt("unconstrained worst %.3f%%, saturated worst %.0f bps "
                 "(one packet = %.0f bps)",
                 100.0 * worst_free, worst_sat, kPacketBits);
  return v;
}

Verdict NetemOracle() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> rate(2e6, 40e6);
  int compared = 0;
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    std::vector<oracle::OfferedPacket> offers;
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
      t += std::uniform_real_distribution<double>(0.0, 0.002)(rng);
      offers.push_back(
          {t, std::uniform_int_distribution<size_t>(40, 1220)(rng)});
    }
    const double a = rate(rng);
    const double b = rate(rng);
    // Place the switch inside the service of a random packet.
    const double sw =
        std::uniform_real_distribution<double>(0.0001, t + 0.002)(rng);
    LinkParams params;
    params.prop_delay_up = 0.005;
    params.queue_limit = 1'000'000;
    BottleneckLink link(CapacitySchedule({{0, a}, {sw, b}}), params);
    for (const auto& o : offers)
      link.Offer(o.bytes, o.time);
    std::map<uint64_t, double> got;
    for (const LinkEvent& e : link.AdvanceTo(1e6))
      got[e.packet_id] = e.deliver_time;
    const auto ref = oracle::SimulateBits({{0, a}, {sw, b}}, offers,
                                          params.queue_limit, 0.005);
    for (int i = 0; i < n; ++i) {
      ++compared;
      if (!got.count(i) ||
          std::abs(std::llround(got[i] * 1e6) -
                   std::llround(ref[i].deliver * 1e6)) > kQuantumUs)
        ++mismatches;
    }
  }
  Verdict v;
  v.pass = mismatches == 0;
  v.detail = Fmt("%.0f of %.0f deliveries outside 1 us", mismatches, compared);
  return v;
}

Verdict Cadence() {
  const RunOutput out = RunSim(DefaultWith({{"link.capacity", "0:30e6"}}));
  const RunSummary& s = out.summary;
  const RunOutput mixed = RunSim(
      DefaultWith({{"link.capacity", "0:30e6, 20:3e6, 40:30e6"}}));
  size_t secondary_detections = 0;
  for (const FrameRecord& f : mixed.frames)
    secondary_detections += f.stream_id == kSecondaryStream && f.detection;
  Verdict v;
  v.pass = s.frame_loss_fraction == 0.0 && s.detection_jobs == 1800 &&
           s.navigation_jobs >= 59 && s.navigation_jobs <= 61 &&
           s.vlm_jobs >= 59 && s.vlm_jobs <= 61 &&
           mixed.summary.secondary_frames > 0 && secondary_detections == 0;
  v.detail = Fmt("detection %.0f, navigation %.0f, vlm %.0f, ",
                 static_cast<double>(s.detection_jobs),
                 static_cast<double>(s.navigation_jobs),
                 static_cast<double>(s.vlm_jobs)) +
             Fmt("secondary frames %.0f with %.0f detections",
                 static_cast<double>(mixed.summary.secondary_frames),
                 static_cast<double>(secondary_detections));
  return v;
}

Verdict TransportRoundTrip() {
  std::mt19937_64 rng(8);
  int trials = 0;
  int bad = 0;
  for (; trials < 3000; ++trials) {
    const size_t mtu = std::uniform_int_distribution<size_t>(21, 9000)(rng);
    const auto max_size = static_cast<uint32_t>(
        std::min<size_t>(500'000, 65535 * (mtu - 20)));
    FrameDescriptor f;
    f.frame_seq = static_cast<uint32_t>(trials);
    f.size = std::uniform_int_distribution<uint32_t>(1, max_size)(rng);
    auto packets = Packetize(f, mtu);
    const size_t count = packets.size();
    const size_t dups = rng() % (count + 1);
    for (size_t i = 0; i < dups; ++i)
      packets.push_back(packets[rng() % count]);
    std::shuffle(packets.begin(), packets.end(), rng);
    Reassembler r;
    int arrivals = 0;
    bool ok = true;
    for (const MediaPacket& p : packets) {
      if (auto a = r.OnPacket(DecodeMediaPacket(Encode(p)), 0.0)) {
        ++arrivals;
        ok = ok && a->bytes == f.size && a->fragment_count == count;
      }
    }
    bad += !(ok && arrivals == 1);
  }
  Verdict v;
  v.pass = bad == 0;
  v.detail = Fmt("%.0f of %.0f randomized frames failed", bad, trials);
  return v;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict Determinism() {
  const fs::path root = fs::temp_directory_path() /
                        ("vidlink_accept_" + std::to_string(getpid()));
  std::vector<Scenario> cases;
  cases.push_back(LoadScenario("paper-default"));
  cases.back().seed = 7;
  cases.push_back(cases.back());
  cases.back().adaptation_enabled = false;
  cases.push_back(DefaultWith({{"seed", "99"},
                               {"link.capacity", "0:9e6, 7:3.5e6, 13:25e6"},
                               {"run_length", "20"}}));
  int identical = 0;
  int files = 0;
  for (size_t i = 0; i < cases.size(); ++i) {
    const fs::path a = root / (std::to_string(i) + "a");
    const fs::path b = root / (std::to_string(i) + "b");
    RunSimAndExport(cases[i], a);
    RunSimAndExport(cases[i], b);
    for (const char* name : {"frames.csv", "epochs.csv", "summary.json"}) {
      ++files;
      const std::string x = Slurp(a / name);
      identical += !x.empty() && x == Slurp(b / name);
    }
  }
  fs::remove_all(root);
  Verdict v;
  v.pass = identical == files;
  v.detail = Fmt("%.0f of %.0f file pairs byte-identical", identical, files);
  return v;
}

}  // namespace
}  // namespace vidlink

int main() {
  using namespace vidlink;
  Scenario s = LoadScenario("paper-default");
  s.adaptation_enabled = true;
  const TimedRun on = Timed(s);
  s.adaptation_enabled = false;
  const TimedRun off = Timed(s);
  s.adaptation_enabled = true;

  Report(1, "QoS budget separation on paper-default", QosSeparation(on, off, s));
  Report(2, "RTT median and IQR ordering",
         RttOrdering(on.out.summary, off.out.summary));
  Report(3, "rate tracking and cap rule", RateTracking(on.out, s));
  Report(4, "secondary stream threshold sweep 3-8 Mbps", SecondaryThreshold());
  Report(5, "estimator accuracy on CBR", EstimatorAccuracy());
  Report(6, "bottleneck matches per-bit reference", NetemOracle());
  Report(7, "inference job cadence", Cadence());
  Report(8, "packetize and reassemble round trip", TransportRoundTrip());
  Report(9, "byte-identical reruns", Determinism());
  return failures == 0 ? 0 : 1;
}
