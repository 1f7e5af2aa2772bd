#ifndef VIDLINK_SCENARIO_H_
#define VIDLINK_SCENARIO_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vidlink/controller.h"
#include "vidlink/edge.h"
#include "vidlink/estimator.h"
#include "vidlink/media.h"
#include "vidlink/netem.h"
#include "vidlink/transport.h"

namespace vidlink {

inline constexpr std::string_view kPaperDefaultName = "paper-default";

// Encoder settings used when adaptation is disabled.
struct FixedEncoder {
  double bitrate_bps = 20e6;
  double fps = 30.0;
  Resolution resolution = k1080p;
};

struct LiveConfig {
  // Shape the client's uplink to the capacity schedule.
  bool emulate_link = true;
  uint16_t port = 47800;
  double unreachable_timeout = 3.0;
  size_t queue_capacity = 4096;
};

// Everything one run needs. Built by ParseScenario/LoadScenario, which
// validate every field before returning.
struct Scenario {
  std::string name;
  double run_length = 60.0;
  uint64_t seed = 1;
  bool adaptation_enabled = true;
  double qos_budget = 0.100;

  StreamConfig primary;
  StreamConfig secondary;
  FixedEncoder fixed;

  CapacitySchedule capacity = CapacitySchedule::Constant(30e6);
  LinkParams link;
  size_t mtu = kDefaultMtu;
  double reassembly_expiry = 0.5;

  EstimatorConfig estimator;
  ControllerConfig controller;
  PoolConfig edge;
  LiveConfig live;

  Scenario();

  double epoch_length() const { return estimator.epoch_length; }
  // Throws ValidationError (line 0) naming the first offending key.
  void Validate() const;
};

// Parses the flat `key = value` format. Blank lines and `#` comments are
// ignored. Unknown or repeated keys are errors. Keys not present keep their
// defaults. Throws ValidationError with the key and line.
Scenario ParseScenario(std::string_view text, std::string name = "inline");

// Loads "paper-default" or a scenario file. Throws IoError when the file
// cannot be read and ValidationError on bad content.
Scenario LoadScenario(const std::string& name_or_path);

// Source text of the built-in scenario.
std::string_view PaperDefaultText();

// Every key the parser accepts, in canonical order.
const std::vector<std::string>& ScenarioKeys();

}  // namespace vidlink

#endif  // VIDLINK_SCENARIO_H_
